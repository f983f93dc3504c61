#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace vsensor::cli {

namespace {

constexpr double kW = 900, kH = 360, kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
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

std::string render_series_svg(const SeriesPlot& p) {
  const std::size_t n = p.actual.size();
  if (n == 0 || p.predicted.size() != n) throw std::invalid_argument("plot: series empty or of different lengths");

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto* s : {&p.actual, &p.predicted}) {
    for (double v : *s) {
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (!std::isfinite(lo)) lo = 0, hi = 1;
  lo = std::min(lo, 0.0);
  if (hi - lo < 1e-9) hi = lo + 1.0;
  hi += 0.05 * (hi - lo);

  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto x = [&](std::size_t i) { return kLeft + (n == 1 ? 0.5 : static_cast<double>(i) / (n - 1)) * pw; };
  auto y = [&](double v) { return kTop + (1.0 - (v - lo) / (hi - lo)) * ph; };

  auto path_d = [&](const std::vector<double>& s) {
    std::string d;
    bool pen = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(s[i])) {
        pen = false;
        continue;
      }
      d += (pen ? " L" : (d.empty() ? "M" : " M")) + num(x(i)) + " " + num(y(s[i]));
      pen = true;
    }
    return d.empty() ? "M0 0" : d;
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kW) + "\" height=\"" + num(kH) +
         "\" viewBox=\"0 0 " + num(kW) + " " + num(kH) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + num(kW) + "\" height=\"" + num(kH) + "\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(kW / 2) + "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
         escape(p.title) + "</text>\n";
  // axes
  svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(kLeft + pw) + "\" y2=\"" +
         num(kTop + ph) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) + "\" y2=\"" + num(kTop + ph) +
         "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    svg += "<line x1=\"" + num(kLeft - 4) + "\" y1=\"" + num(y(v)) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
           num(y(v)) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(y(v) + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + num(v) + "</text>\n";
  }
  if (!p.labels.empty()) {
    for (std::size_t k : {std::size_t{0}, p.labels.size() - 1}) {
      svg += "<text x=\"" + num(x(k)) + "\" y=\"" + num(kTop + ph + 16) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" + escape(p.labels[k]) +
             "</text>\n";
    }
  }
  svg += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kH - 8) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">hour (UTC)</text>\n";
  svg += "<text x=\"14\" y=\"" + num(kTop + ph / 2) + "\" transform=\"rotate(-90 14 " + num(kTop + ph / 2) +
         ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">NO2 (ug/m3)</text>\n";

  svg += "<path class=\"series actual\" d=\"" + path_d(p.actual) +
         "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n";
  svg += "<path class=\"series predicted\" d=\"" + path_d(p.predicted) +
         "\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"4 2\"/>\n";

  // legend
  svg += "<rect x=\"" + num(kLeft + pw - 150) + "\" y=\"" + num(kTop + 4) +
         "\" width=\"12\" height=\"3\" fill=\"#1f77b4\"/>\n";
  svg += "<text x=\"" + num(kLeft + pw - 132) + "\" y=\"" + num(kTop + 9) +
         "\" font-family=\"sans-serif\" font-size=\"11\">actual</text>\n";
  svg += "<rect x=\"" + num(kLeft + pw - 80) + "\" y=\"" + num(kTop + 4) +
         "\" width=\"12\" height=\"3\" fill=\"#d62728\"/>\n";
  svg += "<text x=\"" + num(kLeft + pw - 62) + "\" y=\"" + num(kTop + 9) +
         "\" font-family=\"sans-serif\" font-size=\"11\">predicted</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace vsensor::cli
