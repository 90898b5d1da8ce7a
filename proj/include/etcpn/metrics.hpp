#pragma once

#include <string>
#include <vector>

namespace etcpn {

struct Confusion {
  long tp = 0, fp = 0, tn = 0, fn = 0;

  long total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

/// Stepwise counts; a step is positive when its truth flag is set.
/// Throws DimensionError on a length mismatch.
Confusion evaluate(const std::vector<bool>& truth, const std::vector<bool>& alarms);

/// A ratio whose denominator may vanish; `defined` is false (and value 0) then.
struct Metric {
  double value = 0.0;
  bool defined = true;
};

Metric accuracy(const Confusion& c);
Metric recall(const Confusion& c);
Metric fpr(const Confusion& c);
Metric precision(const Confusion& c);
Metric f1(const Confusion& c);

struct MetricRow {
  std::string method;
  Confusion confusion;
};

/// "method,accuracy,recall,fpr,precision,f1,tp,fp,tn,fn" with 3 decimals;
/// undefined values are written as 0.000 and listed in a trailing column.
std::string metrics_csv(const std::vector<MetricRow>& rows);

/// Aligned table with the columns Method, Accuracy, Recall, FPR, F1.
std::string metrics_table(const std::vector<MetricRow>& rows);

}  // namespace etcpn
