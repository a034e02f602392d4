#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "affex/eval/report.hpp"

namespace affex {

struct SeriesPoint {
  long step = 0;
  double mean = 0.0, lo = 0.0, hi = 0.0;
};

struct ArmSeries {
  std::string arm;
  int seeds = 0;
  std::vector<SeriesPoint> points;
};

// Per-arm curves of one metric: at each step, mean and range over the runs
// that logged it. Rows of other affordances are ignored; "all" always
// matches.
inline std::vector<ArmSeries> MetricSeries(const std::vector<MetricRow>& rows, const std::string& metric,
                                           const std::string& affordance) {
  std::map<std::string, std::map<long, std::vector<double>>> by_arm;
  std::map<std::string, std::set<std::string>> runs;
  for (const auto& r : rows) {
    if (r.metric != metric || (r.affordance != affordance && r.affordance != "all")) continue;
    by_arm[r.arm][r.step].push_back(r.value);
    runs[r.arm].insert(r.run_id);
  }
  std::vector<ArmSeries> out;
  for (const auto& [arm, steps] : by_arm) {
    ArmSeries s{arm, static_cast<int>(runs[arm].size()), {}};
    for (const auto& [step, v] : steps) {
      SeriesPoint p{step, 0.0, *std::min_element(v.begin(), v.end()), *std::max_element(v.begin(), v.end())};
      for (double x : v) p.mean += x;
      p.mean /= static_cast<double>(v.size());
      s.points.push_back(p);
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace plot_detail {

inline const char* ArmColor(const std::string& arm) {
  if (arm == "full") return "#1f77b4";
  if (arm == "no_map_seg") return "#ff7f0e";
  if (arm == "no_map_no_seg") return "#2ca02c";
  return "#7f7f7f";
}

inline std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace plot_detail

// Line chart, metric values on [0, 1]. Arms with more than one seed get a
// shaded min-max band.
inline std::string RenderSvg(const std::string& title, const std::vector<ArmSeries>& series) {
  using plot_detail::Num;
  const double W = 640, H = 400, left = 60, right = 150, top = 40, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  long x0 = std::numeric_limits<long>::max(), x1 = std::numeric_limits<long>::min();
  for (const auto& s : series)
    for (const auto& p : s.points) {
      x0 = std::min(x0, p.step);
      x1 = std::max(x1, p.step);
    }
  if (x0 > x1) x0 = x1 = 0;
  const double span = x1 > x0 ? static_cast<double>(x1 - x0) : 1.0;
  const auto X = [&](long s) { return left + pw * static_cast<double>(s - x0) / span; };
  const auto Y = [&](double v) { return top + ph * (1.0 - std::clamp(v, 0.0, 1.0)); };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + Num(W) + "\" height=\"" + Num(H) +
                    "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + Num(W / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + title + "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = k / 4.0;
    svg += "<line x1=\"" + Num(left) + "\" y1=\"" + Num(Y(v)) + "\" x2=\"" + Num(left + pw) + "\" y2=\"" + Num(Y(v)) +
           "\" stroke=\"#ddd\"/>\n";
    svg += "<text x=\"" + Num(left - 6) + "\" y=\"" + Num(Y(v) + 4) + "\" text-anchor=\"end\">" + Num(v) + "</text>\n";
    const long s = x0 + static_cast<long>(std::llround(span * k / 4.0));
    svg += "<text x=\"" + Num(X(s)) + "\" y=\"" + Num(top + ph + 18) + "\" text-anchor=\"middle\">" +
           std::to_string(s) + "</text>\n";
  }
  svg += "<rect x=\"" + Num(left) + "\" y=\"" + Num(top) + "\" width=\"" + Num(pw) + "\" height=\"" + Num(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  svg += "<text x=\"" + Num(left + pw / 2) + "\" y=\"" + Num(H - 10) + "\" text-anchor=\"middle\">env steps</text>\n";

  double ly = top + 10;
  for (const auto& s : series) {
    const char* color = plot_detail::ArmColor(s.arm);
    if (s.seeds > 1 && !s.points.empty()) {
      std::string band;
      for (const auto& p : s.points) band += Num(X(p.step)) + "," + Num(Y(p.hi)) + " ";
      for (auto it = s.points.rbegin(); it != s.points.rend(); ++it)
        band += Num(X(it->step)) + "," + Num(Y(it->lo)) + " ";
      svg += "<polygon class=\"range\" points=\"" + band + "\" fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    }
    std::string line;
    for (const auto& p : s.points) line += Num(X(p.step)) + "," + Num(Y(p.mean)) + " ";
    svg += "<polyline class=\"mean\" points=\"" + line + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<line x1=\"" + Num(left + pw + 10) + "\" y1=\"" + Num(ly) + "\" x2=\"" + Num(left + pw + 30) + "\" y2=\"" +
           Num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + Num(left + pw + 34) + "\" y=\"" + Num(ly + 4) + "\">" + s.arm + " (" +
           std::to_string(s.seeds) + ")</text>\n";
    ly += 18;
  }
  svg += "</svg>\n";
  return svg;
}

// One chart per metric present in `rows`, written as <dir>/<metric>.svg.
inline std::vector<std::filesystem::path> WriteMetricCharts(const std::vector<MetricRow>& rows,
                                                            const std::filesystem::path& dir,
                                                            const std::string& affordance = "pickup") {
  if (rows.empty()) throw FormatError("no metric rows to plot");
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> out;
  for (const auto& metric : MetricNames()) {
    const auto series = MetricSeries(rows, metric, affordance);
    if (series.empty()) continue;
    const auto path = dir / (metric + ".svg");
    std::ofstream(path) << RenderSvg(metric + " (" + affordance + ")", series);
    out.push_back(path);
  }
  return out;
}

}  // namespace affex
