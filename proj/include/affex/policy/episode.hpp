#pragma once

#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "affex/labeling/annotate.hpp"
#include "affex/labeling/masks.hpp"
#include "affex/mapping/object_map.hpp"
#include "affex/mapping/projection.hpp"
#include "affex/policy/action_mask.hpp"
#include "affex/policy/observation.hpp"
#include "affex/policy/ppo.hpp"
#include "affex/policy/reward.hpp"
#include "affex/policy/targets.hpp"
#include "affex/predictor/model.hpp"
#include "affex/world/sim.hpp"

namespace affex {

struct EpisodeConfig {
  int max_steps = 600;
  WorldConfig world;
  CameraConfig camera;
  MapConfig map;
  SceneConfig scene;
  RewardWeights alpha;
  TargetConfig targets;
  ObservationConfig obs;
  FeatureConfig features;
  bool compact_actions = false;  // 21-action head instead of 30
  bool randomize_scene = true;
};

inline int PolicyActionCount(const EpisodeConfig& cfg) {
  return cfg.compact_actions ? kCompactActionCount : Action::kCount;
}

enum class PolicyMode { kSample, kGreedy, kRandom };

struct StepLog {
  int step = 0;
  int action = 0;  // 30-action index actually executed
  bool success = false;
  std::optional<int> target;
  RewardComponents components;
  double reward = 0.0;
};

struct EpisodeResult {
  Rollout rollout;
  // frames[t] is the observation at step t; the last one follows the last
  // action.
  std::vector<std::shared_ptr<const Frame>> frames;
  std::vector<Image<float>> predictions;
  std::vector<InteractionEvent> events;
  std::vector<StepLog> log;
  ObjectLevelMap map;
  Scene initial_scene;
  Scene final_scene;
  double reward_sum = 0.0;
};

// Runs one episode: render, predict, featurise, mask, act, step, update map
// and reward. Interaction outcomes are written into the map for every arm;
// only the full arm reads the map back through its observation.
inline EpisodeResult RunEpisode(const Scene& base, const PolicyNet<float>& net,
                                const AffordanceModel<float>& predictor, Arm arm, const EpisodeConfig& cfg,
                                std::uint64_t seed, PolicyMode mode = PolicyMode::kSample) {
  EpisodeResult out;
  Scene scene = cfg.randomize_scene ? RandomizeScene(base, MixSeed(seed, 1), cfg.scene) : base;
  Rng spawn(MixSeed(seed, 2));
  const AgentState start = SampleAgent(scene, cfg.world, spawn);
  out.initial_scene = scene;
  Simulator sim(std::move(scene), start, cfg.world, cfg.camera, MixSeed(seed, 3));
  Rng rng(MixSeed(seed, 4));
  out.map = ObjectLevelMap(sim.scene().room, cfg.map);
  VisitGrid visits(sim.scene().room, cfg.world);
  visits.Mark(sim.agent());
  InteractionNovelty novelty;
  const int num_actions = PolicyActionCount(cfg);
  ObservationBuilder builder(arm, cfg.obs, num_actions);
  const bool use_map = UsesMap(arm);

  Rollout& ro = out.rollout;
  ro.num_actions = num_actions;
  ro.flat_size = FlatDim(cfg.obs, num_actions);
  ro.image_size = ObservationPlanes(arm) * cfg.obs.grid * cfg.obs.grid;

  auto frame = std::make_shared<const Frame>(sim.Observe());
  PolicyCache<float> cache;
  std::vector<float> logits, values;
  const auto evaluate = [&](const Observation& o) {
    PolicyInput<float> in{1, o.image, o.flat};
    net.Forward(in, cache, logits, values);
  };

  for (int t = 0;; ++t) {
    out.map.IntegrateFrame(*frame);
    out.frames.push_back(frame);
    out.predictions.push_back(Predict(predictor, *frame, cfg.features));
    const Image<float>& pred = out.predictions.back();
    const Observation obs = builder.Build(*frame, pred, sim.agent(), cfg.world, cfg.camera,
                                          use_map ? &out.map : nullptr, use_map ? &visits : nullptr);
    if (t == cfg.max_steps) {
      evaluate(obs);
      ro.last_value = values[0];
      break;
    }
    const CellTargets targets = ResolveTargets(*frame, pred, cfg.targets);
    CompactCells compact;
    ActionMask mask;
    if (cfg.compact_actions) {
      compact = ResolveCompactCells(sim.agent(), targets, cfg.targets.confidence_floor);
      mask = BuildCompactMask(sim.agent(), compact);
    } else {
      mask = BuildActionMask(sim.agent(), targets);
    }
    evaluate(obs);
    int choice = 0;
    if (mode == PolicyMode::kRandom) {
      std::vector<int> enabled;
      for (int j = 0; j < num_actions; ++j)
        if (mask[j]) enabled.push_back(j);
      choice = enabled[rng.Index(enabled.size())];
    } else if (mode == PolicyMode::kGreedy) {
      choice = -1;
      for (int j = 0; j < num_actions; ++j)
        if (mask[j] && (choice < 0 || logits[j] > logits[choice])) choice = j;
    } else {
      choice = SampleMasked(logits.data(), mask, rng);
    }
    const double logp = MaskedLogSoftmax(logits.data(), mask)[choice];

    const Action action = cfg.compact_actions ? ExpandCompactAction(choice, compact) : Action{choice};
    std::optional<int> target;
    if (const auto aff = action.AttemptedAffordance()) target = targets.target[static_cast<int>(*aff)][action.Cell()];
    if (cfg.compact_actions && action.IsInteraction()) {
      // The compact head picks the largest confident object regardless of type.
      int best_area = 0;
      for (const auto& c : targets.candidates)
        if (c.cell == action.Cell() && std::max(c.mean_prob[0], c.mean_prob[1]) >= cfg.targets.confidence_floor &&
            c.area > best_area) {
          best_area = c.area;
          target = c.id;
        }
    }
    StepResult res = sim.Step(action, target);
    out.map.ApplyMotion(res.moved_instances);
    if (const auto aff = action.AttemptedAffordance(); aff && target) {
      AnnotateByInteraction(out.map, *target, *aff, res.success);
      const TargetCandidate* cand = targets.Find(*target);
      out.events.push_back({frame->step_index, *aff, res.success,
                            BackProject(*frame, cand->anchor_row, cand->anchor_col), *target});
    }
    res.reward_components = ComputeRewardComponents(res, sim.agent(), visits, novelty);
    const double reward = TotalReward(res.reward_components, cfg.alpha);
    builder.Record(choice, res.success, reward);

    ro.images.insert(ro.images.end(), obs.image.begin(), obs.image.end());
    ro.flats.insert(ro.flats.end(), obs.flat.begin(), obs.flat.end());
    ro.masks.push_back(std::move(mask));
    ro.actions.push_back(choice);
    ro.log_probs.push_back(logp);
    ro.values.push_back(values[0]);
    ro.rewards.push_back(reward);
    ro.dones.push_back(0);
    out.log.push_back({t, action.index, res.success, target, res.reward_components, reward});
    out.reward_sum += reward;
    frame = std::make_shared<const Frame>(std::move(res.frame));
  }
  out.final_scene = sim.scene();
  return out;
}

}  // namespace affex
