#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "affex/cli/artifacts.hpp"
#include "affex/cli/evaluate.hpp"
#include "affex/cli/run.hpp"
#include "affex/eval/plot.hpp"
#include "affex/eval/report.hpp"

namespace affex {

inline constexpr std::array<Arm, 3> kAllArms = {Arm::kFull, Arm::kNoMapSeg, Arm::kNoMapNoSeg};

// Config with the per-run fields blanked, for comparing runs of one suite.
inline std::string SuiteKey(ExperimentConfig c) {
  c.arm = Arm::kFull;
  c.seed = 0;
  return ConfigToIni(c);
}

// Mean of the last `window` values of each (run, metric, affordance) series.
inline std::vector<MetricRow> FinalValues(const std::vector<MetricRow>& rows, int window) {
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<const MetricRow*>> series;
  for (const auto& r : rows) series[{r.run_id, r.metric, r.affordance}].push_back(&r);
  std::vector<MetricRow> out;
  for (auto& [key, v] : series) {
    std::stable_sort(v.begin(), v.end(), [](const MetricRow* a, const MetricRow* b) { return a->step < b->step; });
    const std::size_t n = std::min<std::size_t>(v.size(), static_cast<std::size_t>(window));
    MetricRow f = *v.back();
    f.value = 0.0;
    for (std::size_t i = v.size() - n; i < v.size(); ++i) f.value += v[i]->value;
    f.value /= static_cast<double>(n);
    out.push_back(f);
  }
  return out;
}

struct ArmStat {
  double mean = 0.0, lo = 0.0, hi = 0.0;
  int n = 0;
};

// Per-arm mean and range of one metric over runs.
inline std::map<std::string, ArmStat> ArmStats(const std::vector<MetricRow>& rows, const std::string& metric,
                                               const std::string& affordance) {
  std::map<std::string, std::vector<double>> v;
  for (const auto& r : rows)
    if (r.metric == metric && r.affordance == affordance) v[r.arm].push_back(r.value);
  std::map<std::string, ArmStat> out;
  for (const auto& [arm, xs] : v) {
    ArmStat s{0.0, *std::min_element(xs.begin(), xs.end()), *std::max_element(xs.begin(), xs.end()),
              static_cast<int>(xs.size())};
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    out[arm] = s;
  }
  return out;
}

inline std::vector<MetricRow> ReadAll(const std::vector<fs::path>& files) {
  std::vector<MetricRow> all;
  for (const auto& f : files) {
    auto rows = ReadMetricsCsv(f);
    all.insert(all.end(), rows.begin(), rows.end());
  }
  return all;
}

inline void WriteRows(const std::vector<MetricRow>& rows, const fs::path& path) {
  MetricsWriter w(path);
  for (const auto& r : rows) w.Add(r);
}

inline std::string StatCell(const ArmStat& s) { return Fmt(s.mean) + " [" + Fmt(s.lo) + ", " + Fmt(s.hi) + "]"; }

inline std::string ArmTable(const std::string& title, const std::vector<MetricRow>& rows,
                            const std::vector<std::string>& metrics) {
  std::string md = "## " + title + "\n\n| arm | affordance |";
  for (const auto& m : metrics) md += " " + m + " |";
  md += "\n|---|---|";
  for (std::size_t i = 0; i < metrics.size(); ++i) md += "---|";
  md += "\n";
  for (Arm arm : kAllArms) {
    for (const char* aff : kAffordanceNames) {
      std::string line = std::string("| ") + ArmName(arm) + " | " + aff + " |";
      bool any = false;
      for (const auto& m : metrics) {
        auto stats = ArmStats(rows, m, aff);
        if (stats.empty()) stats = ArmStats(rows, m, "all");
        const auto it = stats.find(ArmName(arm));
        line += " " + (it == stats.end() ? std::string("-") : StatCell(it->second)) + " |";
        any |= it != stats.end();
      }
      if (any) md += line + "\n";
    }
  }
  return md + "\n";
}

// Merges finished run directories of one suite: checks that their configs
// agree apart from arm and seed, then writes metrics.csv (training curves),
// final_train.csv, test_framewise.csv, test_objectwise.csv, report.md and
// plots/ into `out`.
inline void MergeAblation(const std::vector<fs::path>& runs, const fs::path& out) {
  if (runs.empty()) throw MissingArtifact("no runs to merge");
  std::string key;
  int final_window = 1;
  std::vector<fs::path> train, fw, ow;
  for (const auto& r : runs) {
    const ExperimentConfig c = LoadConfig((r / "config.ini").string());
    const std::string k = SuiteKey(c);
    if (key.empty()) {
      key = k;
      final_window = c.final_window;
    } else if (k != key) {
      throw FormatError("config mismatch between ablation runs: " + runs.front().string() + " vs " + r.string());
    }
    train.push_back(r / "metrics.csv");
    fw.push_back(r / "eval" / "framewise.csv");
    ow.push_back(r / "eval" / "objectwise.csv");
  }
  fs::create_directories(out);
  const auto curves = ReadAll(train);
  WriteRows(curves, out / "metrics.csv");
  const auto finals = FinalValues(curves, final_window);
  WriteRows(finals, out / "final_train.csv");
  const auto test_fw = ReadAll(fw), test_ow = ReadAll(ow);
  WriteRows(test_fw, out / "test_framewise.csv");
  WriteRows(test_ow, out / "test_objectwise.csv");
  WriteMetricCharts(curves, out / "plots");

  std::string md = "# Ablation report\n\n" + std::to_string(runs.size()) +
                   " runs. Cells are mean [min, max] over seeds.\n\n";
  md += ArmTable("Training metrics (mean of the last " + std::to_string(final_window) + " logged values)", finals,
                 {"interaction_success_rate", "interacted_object_rate", "interactable_annotation_rate",
                  "non_interactable_annotation_rate"});
  md += ArmTable("Test scenes, frame-wise", test_fw, {"affordance_iou", "object_accuracy", "precision", "recall", "f1"});
  md += ArmTable("Test scenes, object-wise interaction test", test_ow,
                 {"precision", "recall", "f1", "object_accuracy"});
  WriteText(out / "report.md", md);
}

struct AblationProgress {
  std::string run_id;
  EpisodeSummary episode;
};

// Every arm for every configured seed with identical budgets, each run
// evaluated on the test scenes, then merged. Runs execute one after another.
inline void RunAblation(const ExperimentConfig& base, const SceneSets& scenes, const fs::path& out, bool force,
                        bool resume, const std::function<void(const AblationProgress&)>& progress = {}) {
  if (base.ablation_seeds.size() < 2) throw FormatError("ablation needs at least two seeds");
  if (!resume) PrepareOutputDir(out, force);
  WriteText(out / "config.ini", ConfigToIni(base));
  std::vector<fs::path> runs;
  for (int seed : base.ablation_seeds) {
    for (Arm arm : kAllArms) {
      ExperimentConfig c = base;
      c.arm = arm;
      c.seed = static_cast<std::uint64_t>(seed);
      const std::string id = RunId(arm, c.seed);
      const fs::path dir = out / "runs" / id;
      const bool finished = resume && fs::exists(dir / "eval" / "report.md");
      if (!finished) {
        const bool can_resume = resume && fs::exists(dir / "checkpoint" / "state.json");
        RunTraining(c, scenes, dir, true, can_resume, [&](const EpisodeSummary& s) {
          if (progress) progress({id, s});
        });
        EvaluateRun(dir, scenes.test, dir / "eval");
      }
      runs.push_back(dir);
    }
  }
  MergeAblation(runs, out);
}

}  // namespace affex
