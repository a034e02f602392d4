#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "affex/cli/artifacts.hpp"
#include "affex/cli/run.hpp"
#include "affex/eval/protocols.hpp"
#include "affex/eval/report.hpp"
#include "affex/predictor/checkpoint.hpp"

namespace affex {

inline constexpr const char* kTrialsHeader = "scene,instance,affordance,mean_prediction,predicted,outcome";

// A predictor checkpoint stem. Headers with "kind": "oracle" load the
// ground-truth predictor (a test fixture); anything else is a model.
inline PixelPredictor LoadPixelPredictor(const fs::path& stem, const FeatureConfig& features) {
  std::ifstream in(stem.string() + ".json");
  if (!in) throw MissingArtifact("missing predictor checkpoint " + stem.string() + ".json");
  nlohmann::json h;
  try {
    in >> h;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed predictor header " + stem.string() + ".json: " + e.what());
  }
  if (h.is_object() && h.value("kind", "") == "oracle") return OraclePredictor();
  return ModelPredictor(ReadModel<float>(stem), features);
}

inline void WriteOracleCheckpoint(const fs::path& stem) {
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  WriteText(stem.string() + ".json", nlohmann::json{{"schema", "affex.model"}, {"kind", "oracle"}}.dump(1) + "\n");
}

struct EvalReport {
  FramewiseMetrics framewise;
  ObjectwiseResult objectwise;
};

inline void AddObjectwiseRows(MetricsWriter& w, const MetricRow& base, const ObjectwiseResult& r) {
  for (int a = 0; a < kNumAffordances; ++a) {
    MetricRow row = base;
    row.affordance = kAffordanceNames[a];
    const Confusion& c = r.confusion[a];
    for (const auto& [name, value] : {std::pair<const char*, double>{"precision", c.precision()},
                                      {"recall", c.recall()},
                                      {"f1", c.f1()},
                                      {"object_accuracy", c.accuracy()}}) {
      row.metric = name;
      row.value = value;
      w.Add(row);
    }
  }
}

// Frame-wise metrics on scripted tours of the test scenes plus the
// object-wise interaction test. Writes framewise.csv, objectwise.csv,
// objectwise_trials.csv, skipped.txt and report.md into `out`.
inline EvalReport EvaluateOnScenes(const PixelPredictor& predictor, std::span<const Scene> scenes,
                                   const ExperimentConfig& cfg, const MetricRow& base, const fs::path& out) {
  if (scenes.empty()) throw MissingArtifact("no test scenes to evaluate on");
  fs::create_directories(out);
  EvalReport rep;
  rep.framewise = EvaluateTours(TourSet::Of(scenes, cfg), scenes, predictor, cfg.binarize_threshold);
  ObjectwiseConfig ow = cfg.objectwise;
  ow.targets = cfg.episode.targets;
  ow.threshold = cfg.binarize_threshold;
  rep.objectwise = ObjectwiseInteractionTest(scenes, predictor, cfg.episode.world, cfg.episode.camera, ow);

  MetricsWriter fw(out / "framewise.csv");
  AddFramewiseRows(fw, base, rep.framewise);
  MetricsWriter obj(out / "objectwise.csv");
  AddObjectwiseRows(obj, base, rep.objectwise);
  CsvWriter trials(out / "objectwise_trials.csv", kTrialsHeader);
  for (const auto& t : rep.objectwise.trials)
    trials.AddLine(std::to_string(t.scene_index) + "," + std::to_string(t.instance_id) + "," +
                   kAffordanceNames[static_cast<int>(t.affordance)] + "," + Fmt(t.mean_prediction) + "," +
                   (t.predicted ? "1" : "0") + "," + (t.outcome ? "1" : "0"));
  std::string skipped;
  for (const auto& s : rep.objectwise.skipped) skipped += s + "\n";
  WriteText(out / "skipped.txt", skipped);

  std::string md = "# Evaluation " + base.run_id + "\n\n";
  md += std::to_string(scenes.size()) + " test scenes, " + std::to_string(rep.framewise.frames) + " tour frames, " +
        std::to_string(rep.objectwise.trials.size() / kNumAffordances) + " objects tested, " +
        std::to_string(rep.objectwise.skipped.size()) + " skipped.\n\n";
  md += "## Frame-wise\n\n| affordance | IoU | object accuracy | precision | recall | F1 |\n|---|---|---|---|---|---|\n";
  for (int a = 0; a < kNumAffordances; ++a) {
    const auto& m = rep.framewise;
    md += std::string("| ") + kAffordanceNames[a] + " | " + Fmt(m.iou[a]) + " | " + Fmt(m.object_accuracy[a]) + " | " +
          Fmt(m.pixels[a].precision()) + " | " + Fmt(m.pixels[a].recall()) + " | " + Fmt(m.pixels[a].f1()) + " |\n";
  }
  md += "\n## Object-wise\n\n| affordance | precision | recall | F1 | accuracy | tp | fp | fn | tn |\n"
        "|---|---|---|---|---|---|---|---|---|\n";
  for (int a = 0; a < kNumAffordances; ++a) {
    const Confusion& c = rep.objectwise.confusion[a];
    md += std::string("| ") + kAffordanceNames[a] + " | " + Fmt(c.precision()) + " | " + Fmt(c.recall()) + " | " +
          Fmt(c.f1()) + " | " + Fmt(c.accuracy()) + " | " + std::to_string(c.tp) + " | " + std::to_string(c.fp) +
          " | " + std::to_string(c.fn) + " | " + std::to_string(c.tn) + " |\n";
  }
  WriteText(out / "report.md", md);
  return rep;
}

// Evaluates the final predictor of a finished training run.
inline EvalReport EvaluateRun(const fs::path& run_dir, std::span<const Scene> scenes, const fs::path& out) {
  const fs::path manifest_path = run_dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw MissingArtifact("missing " + manifest_path.string());
  nlohmann::json m;
  try {
    in >> m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed manifest: " + std::string(e.what()));
  }
  const ExperimentConfig cfg = LoadConfig((run_dir / "config.ini").string());
  MetricRow base;
  base.run_id = m.value("run_id", RunId(cfg.arm, cfg.seed));
  base.arm = ArmName(cfg.arm);
  base.seed = cfg.seed;
  base.step = m.value("steps", 0L);
  const auto predictor =
      LoadPixelPredictor(run_dir / m.value("final_predictor", std::string("final/predictor")), cfg.predictor.features);
  return EvaluateOnScenes(predictor, scenes, cfg, base, out);
}

}  // namespace affex
