#pragma once

#include <string>
#include <vector>

namespace etcpn::cli {

struct Series {
  std::string name;
  std::vector<double> values;  // NaN entries break the polyline
};

/// Line chart with axes, tick labels and a legend. `step` draws staircase
/// lines (for mode signals).
std::string render_svg(const std::string& title, const std::vector<double>& x,
                       const std::vector<Series>& series, bool step = false);

}  // namespace etcpn::cli
