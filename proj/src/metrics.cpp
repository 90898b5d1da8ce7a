#include "etcpn/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "etcpn/errors.hpp"

namespace etcpn {

Confusion evaluate(const std::vector<bool>& truth, const std::vector<bool>& alarms) {
  if (truth.size() != alarms.size())
    throw DimensionError("truth and alarm sequences differ in length");
  Confusion c;
  for (size_t k = 0; k < truth.size(); ++k) {
    if (truth[k]) (alarms[k] ? c.tp : c.fn)++;
    else (alarms[k] ? c.fp : c.tn)++;
  }
  return c;
}

namespace {

Metric ratio(long num, long den) {
  if (den <= 0) return {0.0, false};
  return {static_cast<double>(num) / static_cast<double>(den), true};
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

Metric accuracy(const Confusion& c) { return ratio(c.tp + c.tn, c.total()); }
Metric recall(const Confusion& c) { return ratio(c.tp, c.tp + c.fn); }
Metric fpr(const Confusion& c) { return ratio(c.fp, c.fp + c.tn); }
Metric precision(const Confusion& c) { return ratio(c.tp, c.tp + c.fp); }

Metric f1(const Confusion& c) {
  // 2 tp / (2 tp + fp + fn), the harmonic mean of precision and recall.
  return ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  os << "method,accuracy,recall,fpr,precision,f1,tp,fp,tn,fn,undefined\n";
  for (const auto& row : rows) {
    const Confusion& c = row.confusion;
    const Metric m[] = {accuracy(c), recall(c), fpr(c), precision(c), f1(c)};
    const char* names[] = {"accuracy", "recall", "fpr", "precision", "f1"};
    std::string undefined;
    os << row.method;
    for (int i = 0; i < 5; ++i) {
      os << ',' << fixed3(m[i].value);
      if (!m[i].defined) undefined += (undefined.empty() ? "" : ";") + std::string(names[i]);
    }
    os << ',' << c.tp << ',' << c.fp << ',' << c.tn << ',' << c.fn << ',' << undefined << '\n';
  }
  return os.str();
}

std::string metrics_table(const std::vector<MetricRow>& rows) {
  size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.method.size());
  std::ostringstream os;
  auto pad = [](const std::string& s, size_t w) { return s + std::string(w - std::min(w, s.size()), ' '); };
  os << pad("Method", width) << "  Accuracy  Recall  FPR    F1\n";
  for (const auto& r : rows) {
    const Confusion& c = r.confusion;
    auto cell = [](const Metric& m) { return m.defined ? fixed3(m.value) : std::string("  n/a"); };
    os << pad(r.method, width) << "  " << pad(cell(accuracy(c)), 8) << "  " << pad(cell(recall(c)), 6)
       << "  " << pad(cell(fpr(c)), 5) << "  " << cell(f1(c)) << '\n';
  }
  return os.str();
}

}  // namespace etcpn
