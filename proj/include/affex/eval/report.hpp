#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "affex/core/error.hpp"

namespace affex {

inline constexpr const char* kMetricsHeader = "run_id,arm,seed,step,metric,affordance,value";

inline const std::set<std::string>& MetricNames() {
  static const std::set<std::string> names = {"affordance_iou",
                                              "object_accuracy",
                                              "interaction_success_rate",
                                              "interacted_object_rate",
                                              "interactable_annotation_rate",
                                              "non_interactable_annotation_rate",
                                              "precision",
                                              "recall",
                                              "f1"};
  return names;
}

struct MetricRow {
  std::string run_id;
  std::string arm;
  std::uint64_t seed = 0;
  long step = 0;
  std::string metric;
  std::string affordance;  // affordance name, or "all"
  double value = 0.0;
};

inline std::string FormatMetricRow(const MetricRow& r) {
  AFFEX_REQUIRE(MetricNames().count(r.metric) != 0, "unknown metric '" + r.metric + "'");
  AFFEX_REQUIRE(std::isfinite(r.value) && r.value >= 0.0 && r.value <= 1.0,
                "metric " + r.metric + " out of [0, 1]: " + std::to_string(r.value));
  char value[32];
  std::snprintf(value, sizeof value, "%.9g", r.value);
  return r.run_id + "," + r.arm + "," + std::to_string(r.seed) + "," + std::to_string(r.step) + "," + r.metric + "," +
         r.affordance + "," + value;
}

// Line-oriented CSV output with a fixed header.
class CsvWriter {
 public:
  CsvWriter() = default;
  // `keep_rows` >= 0 keeps the header plus that many rows of an existing
  // file (used when resuming); -1 starts a fresh file.
  CsvWriter(const std::filesystem::path& path, const std::string& header, long keep_rows = -1) {
    std::vector<std::string> kept;
    if (keep_rows >= 0) {
      std::ifstream in(path);
      std::string line;
      std::getline(in, line);
      while (static_cast<long>(kept.size()) < keep_rows && std::getline(in, line)) kept.push_back(line);
      if (static_cast<long>(kept.size()) != keep_rows)
        throw FormatError(path.string() + " has fewer rows than the checkpoint recorded");
    }
    out_.open(path, std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << header << "\n";
    for (const auto& l : kept) out_ << l << "\n";
    rows_ = static_cast<long>(kept.size());
  }

  void AddLine(const std::string& line) {
    out_ << line << "\n";
    ++rows_;
  }
  void Flush() { out_.flush(); }
  long rows() const { return rows_; }

 private:
  std::ofstream out_;
  long rows_ = 0;
};

class MetricsWriter : public CsvWriter {
 public:
  MetricsWriter() = default;
  explicit MetricsWriter(const std::filesystem::path& path, long keep_rows = -1)
      : CsvWriter(path, kMetricsHeader, keep_rows) {}
  void Add(const MetricRow& r) { AddLine(FormatMetricRow(r)); }
};

// Parses a metrics CSV; any deviation from the documented header or column
// types raises FormatError.
inline std::vector<MetricRow> ReadMetricsCsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsHeader) throw FormatError(path.string() + ": unexpected header '" + line + "'");
  std::vector<MetricRow> rows;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (f.size() != 7) throw FormatError(where + ": expected 7 fields");
    MetricRow r;
    r.run_id = f[0];
    r.arm = f[1];
    r.metric = f[4];
    r.affordance = f[5];
    try {
      std::size_t used = 0;
      r.seed = std::stoull(f[2], &used);
      if (used != f[2].size()) throw std::invalid_argument("seed");
      r.step = std::stol(f[3], &used);
      if (used != f[3].size()) throw std::invalid_argument("step");
      r.value = std::stod(f[6], &used);
      if (used != f[6].size()) throw std::invalid_argument("value");
    } catch (const std::exception&) {
      throw FormatError(where + ": malformed number");
    }
    if (!std::isfinite(r.value)) throw FormatError(where + ": non-finite value");
    if (MetricNames().count(r.metric) == 0) throw FormatError(where + ": unknown metric '" + r.metric + "'");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw FormatError(path.string() + " has no data rows");
  return rows;
}

}  // namespace affex
