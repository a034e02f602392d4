#pragma once

#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "affex/cli/artifacts.hpp"
#include "affex/cli/config.hpp"
#include "affex/eval/protocols.hpp"
#include "affex/eval/report.hpp"
#include "affex/labeling/annotate.hpp"
#include "affex/labeling/dataset.hpp"
#include "affex/labeling/masks.hpp"
#include "affex/policy/episode.hpp"
#include "affex/policy/ppo.hpp"
#include "affex/predictor/checkpoint.hpp"
#include "affex/predictor/trainer.hpp"

#ifndef AFFEX_VERSION
#define AFFEX_VERSION "0.0.0"
#endif

namespace affex {

inline constexpr const char* kEpisodesHeader =
    "episode,scene,seed,steps,env_steps,reward_sum,interactions,successes,dataset_frames,pool_size,"
    "predictor_version,replaced,policy_loss";
inline constexpr const char* kStepLogHeader = "step,action,success,target,r_nav,r_int,r_fail,reward";
inline constexpr std::uint64_t kTourSalt = 0x70a7;

inline std::string RunId(Arm arm, std::uint64_t seed) { return std::string(ArmName(arm)) + "_s" + std::to_string(seed); }

inline std::string Fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

struct EpisodeSummary {
  int episode = 0;
  int scene = 0;
  int steps = 0;
  long env_steps = 0;
  double reward_sum = 0.0;
  int interactions = 0;
  int successes = 0;
  int dataset_frames = 0;
  int pool_size = 0;
  int predictor_version = 0;
  bool replaced = false;
  double policy_loss = 0.0;
  EpisodeRates rates;
};

// Evaluation tours over a scene list, rendered once.
struct TourSet {
  std::vector<std::vector<std::shared_ptr<const Frame>>> frames;

  static TourSet Of(std::span<const Scene> scenes, const ExperimentConfig& c) {
    TourSet t;
    for (const auto& s : scenes)
      t.frames.push_back(ScriptedTour(s, c.episode.world, c.episode.camera, MixSeed(s.seed, kTourSalt), c.tour));
    return t;
  }
};

// Frame-wise metrics per affordance over all tours, each scene weighted by
// its number of frames.
inline FramewiseMetrics EvaluateTours(const TourSet& tours, std::span<const Scene> scenes,
                                    const PixelPredictor& predictor, double threshold = kBinarizeThreshold) {
  FramewiseMetrics total;
  std::array<double, kNumAffordances> acc_sum{};
  std::array<int, kNumAffordances> acc_n{};
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const FramewiseMetrics m = EvaluateFrames(tours.frames[s], scenes[s], predictor, threshold);
    for (int a = 0; a < kNumAffordances; ++a) {
      total.iou[a] += m.iou[a] * m.frames;
      acc_sum[a] += m.object_accuracy[a] * m.frames_with_objects;
      acc_n[a] += m.frames_with_objects;
      total.pixels[a].tp += m.pixels[a].tp;
      total.pixels[a].fp += m.pixels[a].fp;
      total.pixels[a].fn += m.pixels[a].fn;
      total.pixels[a].tn += m.pixels[a].tn;
    }
    total.frames += m.frames;
    total.frames_with_objects += m.frames_with_objects;
  }
  for (int a = 0; a < kNumAffordances; ++a) {
    if (total.frames > 0) total.iou[a] /= total.frames;
    total.object_accuracy[a] = acc_n[a] > 0 ? acc_sum[a] / acc_n[a] : 0.0;
  }
  return total;
}

inline void AddFramewiseRows(MetricsWriter& w, const MetricRow& base, const FramewiseMetrics& m) {
  for (int a = 0; a < kNumAffordances; ++a) {
    MetricRow r = base;
    r.affordance = kAffordanceNames[a];
    for (const auto& [name, value] :
         {std::pair<const char*, double>{"affordance_iou", m.iou[a]}, {"object_accuracy", m.object_accuracy[a]},
          {"precision", m.pixels[a].precision()}, {"recall", m.pixels[a].recall()}, {"f1", m.pixels[a].f1()}}) {
      r.metric = name;
      r.value = value;
      w.Add(r);
    }
  }
}

// One training run: episodes on the training scenes, labeling, predictor
// retraining and a PPO update after every episode, all in this process.
// Output layout under `out`:
//   config.ini, metrics.csv, episodes.csv, episodes/episode_NNNNN.csv,
//   checkpoint/ (latest), final/{policy,predictor}.{json,bin}, manifest.json
class TrainingRun {
 public:
  TrainingRun(const ExperimentConfig& cfg, SceneSets scenes, fs::path out)
      : cfg_(cfg),
        scenes_(std::move(scenes)),
        out_(std::move(out)),
        best_(MakeAffordanceModel<float>(MixSeed(cfg.seed, 13), PredictorDims(cfg))),
        candidate_(best_),
        trainer_(MakeTrainState(candidate_, cfg.predictor, MixSeed(cfg.seed, 14))) {
    ValidateConfig(cfg_);
    net_ = PolicyNet<float>(MakePolicyNetConfig(cfg_.arm, cfg_.episode.obs, PolicyActionCount(cfg_.episode)));
    Rng init(MixSeed(cfg_.seed, 11));
    net_.Init(init);
    opt_ = PolicyOptimizer<float>(net_, cfg_.ppo.lr);
    ppo_rng_ = Rng(MixSeed(cfg_.seed, 12));
  }

  // Starts fresh output files, or resumes from out/checkpoint.
  void Open(bool resume) {
    long metric_rows = -1, episode_rows = -1;
    if (resume) {
      LoadCheckpoint(out_ / "checkpoint", &metric_rows, &episode_rows);
    } else {
      fs::create_directories(out_);
      WriteText(out_ / "config.ini", ConfigToIni(cfg_));
    }
    fs::create_directories(out_ / "episodes");
    metrics_ = MetricsWriter(out_ / "metrics.csv", metric_rows);
    episodes_ = CsvWriter(out_ / "episodes.csv", kEpisodesHeader, episode_rows);
  }

  bool done() const { return steps_ >= cfg_.budget_steps; }
  long steps() const { return steps_; }
  int episode() const { return episode_; }
  const PolicyNet<float>& policy() const { return net_; }
  const AffordanceModel<float>& predictor() const { return best_; }
  const TrainState<float>& trainer() const { return trainer_; }

  EpisodeSummary RunOne() {
    AFFEX_REQUIRE(!done(), "training budget exhausted");
    const int ep = episode_;
    const int scene_index = ep % static_cast<int>(scenes_.train.size());
    EpisodeConfig ecfg = cfg_.episode;
    ecfg.max_steps = static_cast<int>(std::min<long>(ecfg.max_steps, cfg_.budget_steps - steps_));
    const std::uint64_t seed = MixSeed(cfg_.seed, 1000 + static_cast<std::uint64_t>(ep));
    EpisodeResult r = RunEpisode(scenes_.train[scene_index], net_, best_, cfg_.arm, ecfg, seed);

    EpisodeSummary s;
    s.episode = ep;
    s.scene = scene_index;
    s.steps = ecfg.max_steps;
    s.reward_sum = r.reward_sum;
    s.interactions = static_cast<int>(r.events.size());
    for (const auto& e : r.events) s.successes += e.success;
    s.policy_loss = PpoUpdate(net_, opt_, {&r.rollout}, cfg_.ppo, ppo_rng_).last.total;

    std::vector<AnnotatedFrame> annotated;
    if (cfg_.arm == Arm::kNoMapNoSeg) {
      annotated = SphereAnnotation(r.events, r.frames, cfg_.sphere_radius, cfg_.sphere_window);
    } else {
      if (steps_ >= cfg_.confidence_warmup_steps)
        AnnotateByConfidence(r.map, r.frames, r.predictions, cfg_.confidence);
      annotated = PropagateToFrames(r.map, r.frames);
    }
    std::vector<PixelLabelMask> labels;
    labels.reserve(annotated.size());
    for (const auto& a : annotated) labels.push_back(a.labels);
    s.rates = ComputeEpisodeRates(r.events, r.initial_scene, r.frames, labels);

    EpisodeDataset ds = ExtractDataset(annotated, cfg_.split, MixSeed(seed, 5), ep);
    CapDataset(ds);
    s.dataset_frames = static_cast<int>(ds.size());
    if (!ds.empty()) trainer_.pool.push_back(std::move(ds));
    for (int k = 0; k < cfg_.predictor.epochs_per_episode; ++k) TrainEpoch(trainer_, candidate_, cfg_.predictor);
    s.replaced = MaybeReplace(best_, candidate_, ValidationSet(trainer_, cfg_.predictor), cfg_.predictor).replaced;
    s.pool_size = static_cast<int>(trainer_.pool.size());
    s.predictor_version = best_.version;

    steps_ += ecfg.max_steps;
    ++episode_;
    s.env_steps = steps_;
    WriteEpisode(s, seed, r);
    if (episode_ % cfg_.eval_every == 0 || done()) WriteValidation();
    metrics_.Flush();
    episodes_.Flush();
    if (cfg_.checkpoint_every > 0 && (episode_ % cfg_.checkpoint_every == 0 || done())) SaveCheckpoint();
    return s;
  }

  // Writes the final models and the manifest; returns the manifest.
  nlohmann::json Finish() {
    fs::create_directories(out_ / "final");
    WritePolicy(net_, cfg_.arm, out_ / "final" / "policy");
    WriteModel(best_, out_ / "final" / "predictor");
    nlohmann::json logs = nlohmann::json::array();
    for (int e = 0; e < episode_; ++e) logs.push_back(EpisodeLogName(e));
    nlohmann::json m = {{"schema", "affex.manifest"},
                        {"command", "train"},
                        {"code_version", AFFEX_VERSION},
                        {"config_hash", ConfigHash(cfg_)},
                        {"config", "config.ini"},
                        {"run_id", RunId(cfg_.arm, cfg_.seed)},
                        {"arm", ArmName(cfg_.arm)},
                        {"seed", cfg_.seed},
                        {"steps", steps_},
                        {"episodes", episode_},
                        {"metrics", "metrics.csv"},
                        {"episode_summary", "episodes.csv"},
                        {"episode_logs", logs},
                        {"final_policy", "final/policy"},
                        {"final_predictor", "final/predictor"}};
    if (cfg_.checkpoint_every > 0) m["checkpoint"] = "checkpoint";
    WriteText(out_ / "manifest.json", m.dump(1) + "\n");
    return m;
  }

  void SaveCheckpoint() {
    const fs::path tmp = out_ / "checkpoint.tmp", dst = out_ / "checkpoint";
    fs::remove_all(tmp);
    fs::create_directories(tmp / "pool");
    WritePolicy(net_, cfg_.arm, tmp / "policy");
    nlohmann::json adam = nlohmann::json::array();
    const auto& opts = opt_.optimizers();
    for (std::size_t k = 0; k < opts.size(); ++k) {
      WriteOptimizer(opts[k], tmp / ("policy_adam_" + std::to_string(k) + ".bin"));
      adam.push_back(opts[k].steps());
    }
    WriteModel(best_, tmp / "predictor_best");
    WriteModel(candidate_, tmp / "predictor_candidate");
    WriteOptimizer(trainer_.optimizer, tmp / "predictor_adam.bin");
    nlohmann::json pool = nlohmann::json::array();
    for (std::size_t k = 0; k < trainer_.pool.size(); ++k) {
      const std::string name = "pool/" + std::to_string(k);
      WriteDataset(trainer_.pool[k], tmp / name);
      pool.push_back(name);
    }
    const nlohmann::json state = {{"schema", "affex.run_state"},
                                  {"version", 1},
                                  {"config_hash", ConfigHash(cfg_)},
                                  {"episode", episode_},
                                  {"steps", steps_},
                                  {"ppo_rng", ppo_rng_.SaveState()},
                                  {"policy_adam_steps", adam},
                                  {"trainer_rng", trainer_.rng.SaveState()},
                                  {"trainer_step", trainer_.step},
                                  {"predictor_adam_steps", trainer_.optimizer.steps()},
                                  {"pool", pool},
                                  {"metrics_rows", metrics_.rows()},
                                  {"episodes_rows", episodes_.rows()}};
    WriteText(tmp / "state.json", state.dump(1) + "\n");
    fs::remove_all(dst);
    fs::rename(tmp, dst);
  }

 private:
  static std::string EpisodeLogName(int ep) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "episodes/episode_%05d.csv", ep);
    return buf;
  }

  // Bounds memory: the train split keeps at most max_stored_frames frames,
  // val and test a quarter of that. Splits are already shuffled.
  void CapDataset(EpisodeDataset& ds) const {
    const auto cap = static_cast<std::size_t>(cfg_.max_stored_frames);
    const std::size_t small = std::max<std::size_t>(1, cap / 4);
    if (ds.train.size() > cap) ds.train.resize(cap);
    if (ds.val.size() > small) ds.val.resize(small);
    if (ds.test.size() > small) ds.test.resize(small);
  }

  MetricRow BaseRow() const {
    MetricRow r;
    r.run_id = RunId(cfg_.arm, cfg_.seed);
    r.arm = ArmName(cfg_.arm);
    r.seed = cfg_.seed;
    r.step = steps_;
    return r;
  }

  void WriteEpisode(const EpisodeSummary& s, std::uint64_t seed, const EpisodeResult& r) {
    MetricRow row = BaseRow();
    row.affordance = "all";
    row.metric = "interaction_success_rate";
    row.value = s.rates.interaction_success_rate;
    metrics_.Add(row);
    if (s.rates.interacted_object_rate) {
      row.metric = "interacted_object_rate";
      row.value = *s.rates.interacted_object_rate;
      metrics_.Add(row);
    }
    for (int a = 0; a < kNumAffordances; ++a) {
      row.affordance = kAffordanceNames[a];
      row.metric = "interactable_annotation_rate";
      row.value = s.rates.interactable_annotation_rate[a];
      metrics_.Add(row);
      row.metric = "non_interactable_annotation_rate";
      row.value = s.rates.non_interactable_annotation_rate[a];
      metrics_.Add(row);
    }
    episodes_.AddLine(std::to_string(s.episode) + "," + std::to_string(s.scene) + "," + std::to_string(seed) + "," +
                      std::to_string(s.steps) + "," + std::to_string(s.env_steps) + "," + Fmt(s.reward_sum) + "," +
                      std::to_string(s.interactions) + "," + std::to_string(s.successes) + "," +
                      std::to_string(s.dataset_frames) + "," + std::to_string(s.pool_size) + "," +
                      std::to_string(s.predictor_version) + "," + (s.replaced ? "1" : "0") + "," +
                      Fmt(s.policy_loss));
    CsvWriter log(out_ / EpisodeLogName(s.episode), kStepLogHeader);
    for (const auto& l : r.log)
      log.AddLine(std::to_string(l.step) + "," + std::to_string(l.action) + "," + (l.success ? "1" : "0") + "," +
                  (l.target ? std::to_string(*l.target) : "") + "," + Fmt(l.components.nav) + "," +
                  Fmt(l.components.interaction) + "," + Fmt(l.components.fail) + "," + Fmt(l.reward));
  }

  // Frame-wise metrics of the current best predictor on the validation
  // scenes' tours.
  void WriteValidation() {
    if (scenes_.val.empty()) return;
    if (!val_tours_) val_tours_ = TourSet::Of(scenes_.val, cfg_);
    const auto m = EvaluateTours(*val_tours_, scenes_.val, ModelPredictor(best_, cfg_.predictor.features),
                                 cfg_.binarize_threshold);
    AddFramewiseRows(metrics_, BaseRow(), m);
  }

  void LoadCheckpoint(const fs::path& dir, long* metric_rows, long* episode_rows) {
    std::ifstream in(dir / "state.json");
    if (!in) throw MissingArtifact("no checkpoint in " + dir.string());
    try {
      nlohmann::json st;
      in >> st;
      if (st.at("schema") != "affex.run_state" || st.at("version") != 1)
        throw FormatError("unsupported checkpoint schema");
      if (st.at("config_hash") != ConfigHash(cfg_))
        throw FormatError("checkpoint was written with a different config");
      episode_ = st.at("episode");
      steps_ = st.at("steps");
      if (!ppo_rng_.LoadState(st.at("ppo_rng").get<std::string>()) ||
          !trainer_.rng.LoadState(st.at("trainer_rng").get<std::string>()))
        throw FormatError("corrupt rng state in checkpoint");
      Arm arm;
      net_ = ReadPolicy(dir / "policy", &arm);
      if (arm != cfg_.arm) throw FormatError("checkpoint arm mismatch");
      opt_ = PolicyOptimizer<float>(net_, cfg_.ppo.lr);
      const auto adam = st.at("policy_adam_steps").get<std::vector<long>>();
      auto& opts = opt_.optimizers();
      if (adam.size() != opts.size()) throw FormatError("policy optimizer block count mismatch");
      for (std::size_t k = 0; k < opts.size(); ++k)
        ReadOptimizer(opts[k], adam[k], dir / ("policy_adam_" + std::to_string(k) + ".bin"));
      best_ = ReadModel<float>(dir / "predictor_best");
      candidate_ = ReadModel<float>(dir / "predictor_candidate");
      trainer_.optimizer = nn::AdamW<float>(candidate_.net.num_params(), cfg_.predictor.optimizer);
      ReadOptimizer(trainer_.optimizer, st.at("predictor_adam_steps").get<long>(), dir / "predictor_adam.bin");
      trainer_.step = st.at("trainer_step");
      trainer_.pool.clear();
      for (const auto& name : st.at("pool")) trainer_.pool.push_back(ReadDataset(dir / name.get<std::string>()));
      *metric_rows = st.at("metrics_rows");
      *episode_rows = st.at("episodes_rows");
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("malformed checkpoint state: ") + e.what());
    }
  }

  ExperimentConfig cfg_;
  SceneSets scenes_;
  fs::path out_;
  PolicyNet<float> net_;
  PolicyOptimizer<float> opt_;
  Rng ppo_rng_{0};
  AffordanceModel<float> best_, candidate_;
  TrainState<float> trainer_;
  long steps_ = 0;
  int episode_ = 0;
  std::optional<TourSet> val_tours_;
  MetricsWriter metrics_;
  CsvWriter episodes_;
};

// Runs (or resumes) training to the configured budget and returns the
// manifest. `force` clears a non-empty output directory; `resume` continues
// from its checkpoint.
inline nlohmann::json RunTraining(const ExperimentConfig& cfg, const SceneSets& scenes, const fs::path& out,
                                  bool force, bool resume,
                                  const std::function<void(const EpisodeSummary&)>& progress = {}) {
  if (!resume) PrepareOutputDir(out, force);
  TrainingRun run(cfg, scenes, out);
  run.Open(resume);
  while (!run.done()) {
    const EpisodeSummary s = run.RunOne();
    if (progress) progress(s);
  }
  return run.Finish();
}

}  // namespace affex
