#include "etcpn/signals.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace etcpn {

std::vector<double> InputSignal::sample(long horizon) const {
  std::vector<double> u(static_cast<size_t>(std::max(horizon, 0L)), 0.0);
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  double level = amplitude;
  const long h = std::max(hold, 1L);
  for (long k = 0; k < horizon; ++k) {
    double v = 0.0;
    switch (kind) {
      case InputKind::Constant: v = amplitude; break;
      case InputKind::Step:
        v = (k >= at && (width <= 0 || k < at + width)) ? amplitude : 0.0;
        break;
      case InputKind::Sine: v = amplitude * std::sin(2.0 * std::numbers::pi * k / period); break;
      case InputKind::Prbs:
        if (k % h == 0) level = coin(rng) ? amplitude : -amplitude;
        v = level;
        break;
    }
    u[static_cast<size_t>(k)] = v;
  }
  return u;
}

bool FaultSpec::active(long k) const {
  return std::any_of(intervals.begin(), intervals.end(),
                     [k](const StepInterval& iv) { return iv.contains(k); });
}

}  // namespace etcpn
