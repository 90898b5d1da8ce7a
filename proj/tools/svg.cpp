#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace etcpn::cli {

namespace {

constexpr double kWidth = 720, kHeight = 360;
constexpr double kLeft = 60, kRight = 150, kTop = 36, kBottom = 40;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                   "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_svg(const std::string& title, const std::vector<double>& x,
                       const std::vector<Series>& series, bool step) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (double v : x)
    if (std::isfinite(v)) xmin = std::min(xmin, v), xmax = std::max(xmax, v);
  for (const auto& s : series)
    for (double v : s.values)
      if (std::isfinite(v)) ymin = std::min(ymin, v), ymax = std::max(ymax, v);
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1;
  if (!std::isfinite(ymin)) ymin = 0, ymax = 1;
  if (xmax - xmin < 1e-12) xmax = xmin + 1;
  if (ymax - ymin < 1e-12) ymin -= 0.5, ymax += 0.5;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (v - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double v) { return kTop + (ymax - v) / (ymax - ymin) * ph; };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
         num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(kLeft) + "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" +
         escape(title) + "</text>\n";
  out += "<g stroke=\"black\" stroke-width=\"1\">\n";
  out += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(kLeft + pw) +
         "\" y2=\"" + num(kTop + ph) + "\"/>\n";
  out += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
         num(kTop + ph) + "\"/>\n";
  out += "</g>\n<g font-family=\"sans-serif\" font-size=\"10\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 5.0, yv = ymin + (ymax - ymin) * i / 5.0;
    out += "<line x1=\"" + num(px(xv)) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(px(xv)) +
           "\" y2=\"" + num(kTop + ph + 4) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + num(px(xv)) + "\" y=\"" + num(kTop + ph + 16) +
           "\" text-anchor=\"middle\">" + label(xv) + "</text>\n";
    out += "<line x1=\"" + num(kLeft - 4) + "\" y1=\"" + num(py(yv)) + "\" x2=\"" + num(kLeft) +
           "\" y2=\"" + num(py(yv)) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py(yv) + 3) + "\" text-anchor=\"end\">" +
           label(yv) + "</text>\n";
  }
  out += "</g>\n";

  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % std::size(kColors)];
    const auto& vals = series[s].values;
    std::string pts;
    auto flush = [&] {
      if (!pts.empty())
        out += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
               "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
      pts.clear();
    };
    double last_y = 0;
    bool have_last = false;
    for (size_t i = 0; i < std::min(vals.size(), x.size()); ++i) {
      if (!std::isfinite(vals[i]) || !std::isfinite(x[i])) {
        flush();
        have_last = false;
        continue;
      }
      if (step && have_last) pts += num(px(x[i])) + "," + num(py(last_y)) + " ";
      pts += num(px(x[i])) + "," + num(py(vals[i])) + " ";
      last_y = vals[i];
      have_last = true;
    }
    if (!pts.empty()) pts.pop_back();
    flush();
    const double ly = kTop + 14.0 * static_cast<double>(s) + 6;
    out += "<line x1=\"" + num(kLeft + pw + 12) + "\" y1=\"" + num(ly) + "\" x2=\"" +
           num(kLeft + pw + 32) + "\" y2=\"" + num(ly) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + num(kLeft + pw + 36) + "\" y=\"" + num(ly + 4) +
           "\" font-family=\"sans-serif\" font-size=\"11\">" + escape(series[s].name) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace etcpn::cli
