// Command-line front end: scene-gen, train, eval, ablate, replay, plot.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "affex/cli/ablation.hpp"
#include "affex/cli/artifacts.hpp"
#include "affex/cli/config.hpp"
#include "affex/cli/evaluate.hpp"
#include "affex/cli/run.hpp"
#include "affex/eval/plot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kRefused = 2, kMissing = 3, kMalformed = 4 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string arm;
  std::string out;
  std::string scenes;
  std::string run;
  std::string model;
  std::string csv;
  std::string affordance = "pickup";
  bool force = false;
  bool resume = false;
  bool quiet = false;
};

affex::ExperimentConfig BaseConfig(const Options& o) {
  affex::ExperimentConfig c = o.config.empty() ? affex::ExperimentConfig{} : affex::LoadConfig(o.config);
  if (o.seed) c.seed = *o.seed;
  if (!o.arm.empty()) {
    const auto a = affex::ParseArm(o.arm);
    if (!a) throw affex::FormatError("unknown arm '" + o.arm + "'");
    c.arm = *a;
  }
  return c;
}

std::string ScenesDir(const Options& o, const affex::ExperimentConfig& c) {
  return fs::absolute(o.scenes.empty() ? c.scenes_dir : o.scenes).lexically_normal().string();
}

// Adds fields to a manifest written by the library.
void ExtendManifest(const fs::path& dir, const json& extra) {
  json m = json::parse(affex::ReadText(dir / "manifest.json"));
  m.update(extra);
  affex::WriteText(dir / "manifest.json", m.dump(1) + "\n");
}

int SceneGen(const Options& o) {
  affex::ExperimentConfig c = o.config.empty() ? affex::ExperimentConfig{} : affex::LoadConfig(o.config);
  if (o.seed) c.scenes.seed = *o.seed;
  const fs::path out = o.out.empty() ? fs::path(c.scenes_dir) : fs::path(o.out);
  affex::GenerateSceneSets(c, out, o.force);
  const json m = {{"schema", "affex.manifest"}, {"command", "scene-gen"}, {"code_version", AFFEX_VERSION},
                  {"config_hash", affex::ConfigHash(c)}, {"config", "config.ini"}};
  affex::WriteText(out / "manifest.json", m.dump(1) + "\n");
  std::printf("wrote %d train, %d val, %d test scenes to %s\n", c.scenes.train, c.scenes.val, c.scenes.test,
              out.string().c_str());
  return kOk;
}

int Train(const Options& o) {
  const affex::ExperimentConfig c = BaseConfig(o);
  if (o.out.empty()) throw affex::FormatError("train needs --out");
  const std::string scenes_dir = ScenesDir(o, c);
  const affex::SceneSets scenes = affex::LoadSceneSets(scenes_dir);
  affex::RunTraining(c, scenes, o.out, o.force, o.resume, [&](const affex::EpisodeSummary& s) {
    if (!o.quiet)
      std::printf("episode %d  steps %ld  reward %.2f  success %.3f  dataset %d  predictor v%d\n", s.episode,
                  s.env_steps, s.reward_sum, s.rates.interaction_success_rate, s.dataset_frames, s.predictor_version);
  });
  ExtendManifest(o.out, {{"scenes", scenes_dir}});
  std::printf("run complete: %s\n", (fs::path(o.out) / "manifest.json").string().c_str());
  return kOk;
}

int Eval(const Options& o) {
  if (o.out.empty()) throw affex::FormatError("eval needs --out");
  if (o.run.empty() == o.model.empty()) throw affex::FormatError("eval needs exactly one of --run or --model");
  affex::ExperimentConfig c;
  std::string scenes_dir;
  if (!o.run.empty()) {
    if (!fs::exists(fs::path(o.run) / "manifest.json"))
      throw affex::MissingArtifact("no manifest in " + o.run + " (is the run finished?)");
    c = affex::LoadConfig((fs::path(o.run) / "config.ini").string());
    scenes_dir = ScenesDir(o, c);
  } else {
    c = BaseConfig(o);
    scenes_dir = ScenesDir(o, c);
  }
  const affex::SceneSets scenes = affex::LoadSceneSets(scenes_dir);
  affex::PrepareOutputDir(o.out, o.force);
  affex::WriteText(fs::path(o.out) / "config.ini", affex::ConfigToIni(c));
  affex::EvalReport rep;
  json m = {{"schema", "affex.manifest"}, {"command", "eval"},   {"code_version", AFFEX_VERSION},
            {"config_hash", affex::ConfigHash(c)}, {"config", "config.ini"}, {"scenes", scenes_dir},
            {"framewise", "framewise.csv"}, {"objectwise", "objectwise.csv"}, {"report", "report.md"}};
  if (!o.run.empty()) {
    rep = affex::EvaluateRun(o.run, scenes.test, o.out);
    m["run"] = fs::absolute(o.run).lexically_normal().string();
  } else {
    affex::MetricRow base;
    base.run_id = fs::path(o.model).filename().string();
    base.arm = affex::ArmName(c.arm);
    base.seed = c.seed;
    rep = affex::EvaluateOnScenes(affex::LoadPixelPredictor(o.model, c.predictor.features), scenes.test, c, base,
                                  o.out);
    m["model"] = fs::absolute(o.model).lexically_normal().string();
  }
  affex::WriteText(fs::path(o.out) / "manifest.json", m.dump(1) + "\n");
  for (int a = 0; a < affex::kNumAffordances; ++a)
    std::printf("%-7s iou %.3f  object acc %.3f  objectwise P %.3f R %.3f F1 %.3f\n", affex::kAffordanceNames[a],
                rep.framewise.iou[a], rep.framewise.object_accuracy[a], rep.objectwise.confusion[a].precision(),
                rep.objectwise.confusion[a].recall(), rep.objectwise.confusion[a].f1());
  return kOk;
}

int Ablate(const Options& o) {
  const affex::ExperimentConfig c = BaseConfig(o);
  if (o.out.empty()) throw affex::FormatError("ablate needs --out");
  const std::string scenes_dir = ScenesDir(o, c);
  const affex::SceneSets scenes = affex::LoadSceneSets(scenes_dir);
  affex::RunAblation(c, scenes, o.out, o.force, o.resume, [&](const affex::AblationProgress& p) {
    if (!o.quiet)
      std::printf("%s  episode %d  steps %ld  reward %.2f\n", p.run_id.c_str(), p.episode.episode,
                  p.episode.env_steps, p.episode.reward_sum);
  });
  const json m = {{"schema", "affex.manifest"}, {"command", "ablate"}, {"code_version", AFFEX_VERSION},
                  {"config_hash", affex::ConfigHash(c)}, {"config", "config.ini"}, {"scenes", scenes_dir},
                  {"metrics", "metrics.csv"}, {"report", "report.md"}};
  affex::WriteText(fs::path(o.out) / "manifest.json", m.dump(1) + "\n");
  std::printf("report: %s\n", (fs::path(o.out) / "report.md").string().c_str());
  return kOk;
}

int Plot(const Options& o) {
  if (o.csv.empty() || o.out.empty()) throw affex::FormatError("plot needs --csv and --out");
  const auto rows = affex::ReadMetricsCsv(o.csv);
  const auto files = affex::WriteMetricCharts(rows, o.out, o.affordance);
  std::printf("wrote %zu charts to %s\n", files.size(), o.out.c_str());
  return kOk;
}

// CSV outputs plus generated scene files.
std::vector<fs::path> ComparedFiles(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    const fs::path& p = e.path();
    const bool scene = p.extension() == ".json" && p.filename().string().rfind("scene_", 0) == 0;
    if (e.is_regular_file() && (p.extension() == ".csv" || scene)) out.push_back(fs::relative(p, dir));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Re-runs the command recorded in <run>/manifest.json into --out and
// compares its CSV outputs (and scene files) byte for byte.
int Replay(const Options& o) {
  if (o.run.empty() || o.out.empty()) throw affex::FormatError("replay needs --run and --out");
  const fs::path src = o.run;
  const json m = json::parse(affex::ReadText(src / "manifest.json"));
  const std::string cmd = m.at("command");
  Options r;
  r.config = (src / "config.ini").string();
  r.out = o.out;
  r.force = o.force;
  r.quiet = true;
  r.scenes = m.value("scenes", std::string());
  int rc = kOk;
  if (cmd == "scene-gen") rc = SceneGen(r);
  else if (cmd == "train") rc = Train(r);
  else if (cmd == "ablate") rc = Ablate(r);
  else if (cmd == "eval") {
    r.run = m.value("run", std::string());
    r.model = m.value("model", std::string());
    rc = Eval(r);
  } else {
    throw affex::FormatError("cannot replay command '" + cmd + "'");
  }
  if (rc != kOk) return rc;
  const auto a = ComparedFiles(src), b = ComparedFiles(o.out);
  int diffs = 0;
  if (a != b) {
    std::printf("different output file sets\n");
    ++diffs;
  }
  for (const auto& f : a) {
    if (!fs::exists(fs::path(o.out) / f)) continue;
    if (affex::ReadText(src / f) != affex::ReadText(fs::path(o.out) / f)) {
      std::printf("differs: %s\n", f.string().c_str());
      ++diffs;
    }
  }
  std::printf("%zu files compared, %d differences\n", a.size(), diffs);
  return diffs == 0 ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive affordance learning with an object-level map"};
  app.require_subcommand(1);
  Options o;
  const auto common = [&](CLI::App* s) {
    s->add_option("--config", o.config, "INI config file");
    s->add_option("--seed", o.seed, "Override the seed");
    s->add_option("--arm", o.arm, "full | no_map_seg | no_map_no_seg");
    s->add_option("--out", o.out, "Output directory");
    s->add_option("--scenes", o.scenes, "Scene set directory (default: paths.scenes)");
    s->add_flag("--force", o.force, "Overwrite a non-empty output directory");
    s->add_flag("--quiet", o.quiet, "No per-episode progress");
  };
  auto* gen = app.add_subcommand("scene-gen", "Generate train/val/test scene sets");
  common(gen);
  auto* train = app.add_subcommand("train", "Train policy and predictor");
  common(train);
  train->add_flag("--resume", o.resume, "Continue from the run's checkpoint");
  auto* eval = app.add_subcommand("eval", "Evaluate a run or a predictor checkpoint on the test scenes");
  common(eval);
  eval->add_option("--run", o.run, "Finished training run directory");
  eval->add_option("--model", o.model, "Predictor checkpoint stem (without .json/.bin)");
  auto* ablate = app.add_subcommand("ablate", "Run every arm for every configured seed and compare");
  common(ablate);
  ablate->add_flag("--resume", o.resume, "Skip finished runs and resume unfinished ones");
  auto* replay = app.add_subcommand("replay", "Re-run a recorded command and compare its CSV outputs");
  common(replay);
  replay->add_option("--run", o.run, "Output directory of the command to replay")->required();
  auto* plot = app.add_subcommand("plot", "SVG charts from a metrics CSV");
  common(plot);
  plot->add_option("--csv", o.csv, "Metrics CSV")->required();
  plot->add_option("--affordance", o.affordance, "Affordance to chart");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kMalformed;
  }
  try {
    if (gen->parsed()) return SceneGen(o);
    if (train->parsed()) return Train(o);
    if (eval->parsed()) return Eval(o);
    if (ablate->parsed()) return Ablate(o);
    if (replay->parsed()) return Replay(o);
    if (plot->parsed()) return Plot(o);
  } catch (const affex::RefusedOverwrite& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRefused;
  } catch (const affex::MissingArtifact& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kMissing;
  } catch (const affex::FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kMalformed;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "error: malformed JSON: %s\n", e.what());
    return kMalformed;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kFailure;
}
