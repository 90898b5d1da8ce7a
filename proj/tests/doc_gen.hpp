#pragma once

#include <cmath>
#include <random>
#include <string>

#include "etcpn/dsl.hpp"

namespace etcpn::testing {

// Random valid document built directly as data, never from text.
inline dsl::ModelDocument random_document(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> small(1, 3), mf_dist(0, 2), coin(0, 1);
  std::uniform_real_distribution<double> val(-10.0, 10.0);
  auto mat = [&](Index r, Index c) {
    Eigen::MatrixXd m(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) m(i, j) = coin(rng) ? val(rng) : std::round(val(rng));
    return m;
  };
  dsl::ModelDocument doc;
  doc.name = "doc_" + std::to_string(rng() % 100000);
  doc.dims = {small(rng), small(rng), small(rng), mf_dist(rng), small(rng)};
  const auto& d = doc.dims;
  std::vector<long> ids;
  for (Index q = 0; q < d.modes; ++q) {
    const long id = 10 * q + 1 + static_cast<long>(rng() % 5);
    ids.push_back(id);
    doc.modes.push_back({id, mat(d.n, d.n), mat(d.n, d.p), mat(d.r, d.n), mat(d.n, d.mf), mat(d.r, d.mf)});
  }
  if (d.modes > 1)
    for (int g = 0; g < small(rng); ++g) {
      const size_t a = rng() % ids.size();
      const size_t b = (a + 1 + rng() % (ids.size() - 1)) % ids.size();
      doc.guards.push_back({ids[a], ids[b], static_cast<Index>(rng() % d.n),
                            static_cast<Comparator>(rng() % 4), val(rng)});
    }
  doc.initial_mode = ids[rng() % ids.size()];
  doc.initial_state = mat(d.n, 1);
  if (coin(rng)) {
    InputSignal in;
    in.kind = static_cast<InputKind>(rng() % 4);
    in.amplitude = val(rng);
    in.at = static_cast<long>(rng() % 20);
    in.width = static_cast<long>(rng() % 5);
    in.period = 1.0 + std::abs(val(rng));
    in.seed = rng() % 1000;
    in.hold = 1 + static_cast<long>(rng() % 4);
    doc.input = in;
  }
  for (int f = 0; f < small(rng) - 1; ++f) {
    dsl::FaultDecl fd;
    fd.kind = static_cast<FaultKind>(rng() % 3);
    for (int i = 0; i < small(rng); ++i) {
      const long a = static_cast<long>(rng() % 50);
      fd.intervals.push_back({a, a + static_cast<long>(rng() % 6)});
    }
    if (fd.kind == FaultKind::ModeBlocking) fd.mode = ids[rng() % ids.size()];
    else if (coin(rng) && d.mf > 0) fd.magnitude = mat(d.mf, 1);
    doc.faults.push_back(std::move(fd));
  }
  for (Index q = 0; q < d.modes; ++q)
    if (coin(rng)) doc.gains.push_back({ids[static_cast<size_t>(q)], mat(d.n, d.r)});
  std::uniform_real_distribution<double> unit(0.01, 0.49);
  if (coin(rng)) doc.detectors.push_back({DetectorKind::OcSvm, unit(rng), std::nullopt, std::nullopt});
  if (coin(rng)) doc.detectors.push_back({DetectorKind::Svdd, unit(rng), 0.1 + unit(rng), std::nullopt});
  if (coin(rng)) doc.detectors.push_back({DetectorKind::EllipticEnvelope, std::nullopt, std::nullopt, unit(rng)});
  return doc;
}

}  // namespace etcpn::testing
