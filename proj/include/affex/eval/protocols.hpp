#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "affex/core/random.hpp"
#include "affex/eval/metrics.hpp"
#include "affex/policy/targets.hpp"
#include "affex/predictor/model.hpp"
#include "affex/world/render.hpp"
#include "affex/world/sim.hpp"

namespace affex {

// Per-pixel affordance probabilities for a frame of `scene`. Learned models
// ignore the scene; the ground-truth oracle reads it.
using PixelPredictor = std::function<Image<float>(const Frame&, const Scene&)>;

inline PixelPredictor ModelPredictor(AffordanceModel<float> model, FeatureConfig features = {}) {
  return [m = std::move(model), features](const Frame& f, const Scene&) { return Predict(m, f, features); };
}

// Category flags painted over instance masks, i.e. a perfect frame-wise
// predictor.
inline PixelPredictor OraclePredictor() {
  return [](const Frame& f, const Scene& scene) {
    Image<float> out(f.height(), f.width(), kNumAffordances);
    for (int a = 0; a < kNumAffordances; ++a) {
      const Image<std::uint8_t> gt = GroundTruthMask(f, scene, static_cast<Affordance>(a));
      for (std::size_t p = 0; p < gt.pixel_count(); ++p) out.at_pixel(p, a) = gt.at_pixel(p);
    }
    return out;
  };
}

inline PixelPredictor ConstantPredictor(float value) {
  return [value](const Frame& f, const Scene&) { return Image<float>(f.height(), f.width(), kNumAffordances, value); };
}

struct TourConfig {
  int positions = 4;
  std::vector<int> pitches = {0, -2};
};

// Deterministic sweep of a scene: a few seeded collision-free positions, a
// full turn at each, at every listed pitch.
inline std::vector<std::shared_ptr<const Frame>> ScriptedTour(const Scene& scene, const WorldConfig& w,
                                                              const CameraConfig& cam, std::uint64_t seed,
                                                              const TourConfig& cfg = {}) {
  std::vector<std::shared_ptr<const Frame>> frames;
  Rng rng(seed);
  int step = 0;
  for (int k = 0; k < cfg.positions; ++k) {
    AgentState agent = SampleAgent(scene, w, rng);
    for (int yaw = 0; yaw < YawSteps(w); ++yaw)
      for (int pitch : cfg.pitches) {
        agent.yaw_index = yaw;
        agent.pitch_index = pitch;
        frames.push_back(std::make_shared<const Frame>(
            Render(scene, agent, w, cam, MixSeed(seed, static_cast<std::uint64_t>(step)), step)));
        ++step;
      }
  }
  return frames;
}

struct FramewiseMetrics {
  std::array<double, kNumAffordances> iou{};
  std::array<double, kNumAffordances> object_accuracy{};
  std::array<Confusion, kNumAffordances> pixels{};
  int frames = 0;
  int frames_with_objects = 0;
};

// Mean per-frame IoU and object accuracy over the frames, plus the pooled
// pixel confusion. Frames with no visible object are skipped for accuracy.
inline FramewiseMetrics EvaluateFrames(std::span<const std::shared_ptr<const Frame>> frames, const Scene& scene,
                                       const PixelPredictor& predictor, double threshold = kBinarizeThreshold) {
  FramewiseMetrics out;
  out.frames = static_cast<int>(frames.size());
  std::array<double, kNumAffordances> acc_sum{};
  std::array<int, kNumAffordances> acc_n{};
  for (const auto& f : frames) {
    const Image<float> pred = predictor(*f, scene);
    for (int a = 0; a < kNumAffordances; ++a) {
      const Image<std::uint8_t> gt = GroundTruthMask(*f, scene, static_cast<Affordance>(a));
      const Confusion c = PixelConfusion(pred, a, gt, threshold);
      const double iou = c.iou();
      AFFEX_REQUIRE(IouWithinF1Bound(iou, c.f1()) || c.tp + c.fp + c.fn == 0, "IoU exceeds the F1 bound");
      out.iou[a] += iou;
      out.pixels[a].tp += c.tp;
      out.pixels[a].fp += c.fp;
      out.pixels[a].fn += c.fn;
      out.pixels[a].tn += c.tn;
      if (const auto acc = ObjectAccuracy(pred, a, *f, scene, kMinVisiblePixels, threshold)) {
        acc_sum[a] += *acc;
        ++acc_n[a];
      }
    }
  }
  for (int a = 0; a < kNumAffordances; ++a) {
    if (out.frames > 0) out.iou[a] /= out.frames;
    out.object_accuracy[a] = acc_n[a] > 0 ? acc_sum[a] / acc_n[a] : 0.0;
  }
  out.frames_with_objects = acc_n[0];
  return out;
}

struct ObjectwiseConfig {
  double standoff = 1.0;  // metres from the agent to the object's footprint
  double threshold = kBinarizeThreshold;
  TargetConfig targets;
};

struct ObjectTrial {
  int scene_index = 0;
  int instance_id = 0;
  Affordance affordance = Affordance::kPickup;
  double mean_prediction = 0.0;
  bool predicted = false;
  bool outcome = false;
};

struct ObjectwiseResult {
  std::array<Confusion, kNumAffordances> confusion{};
  std::vector<ObjectTrial> trials;
  std::vector<std::string> skipped;
};

namespace detail {

// Lattice poses roughly `standoff` in front of the instance and facing it,
// one per collision-free heading, each with the pitch that shows most of it
// inside the central region.
inline std::vector<AgentState> PlaceAround(const Scene& scene, const ObjectInstance& inst, const WorldConfig& w,
                                           const CameraConfig& cam, const ObjectwiseConfig& cfg) {
  const Aabb box = inst.Bounds();
  const Vec3 centre = box.Center();
  std::vector<AgentState> out;
  for (int yaw = 0; yaw < YawSteps(w); ++yaw) {
    const Vec3 h = HeadingVector(DegToRad(yaw * w.yaw_step_deg));
    const double half = 0.5 * (std::abs(h.x) * (box.max.x - box.min.x) + std::abs(h.y) * (box.max.y - box.min.y));
    const Vec3 p = centre - h * (cfg.standoff + half);
    AgentState agent;
    agent.cell_x = static_cast<int>(std::lround(p.x / w.lattice));
    agent.cell_y = static_cast<int>(std::lround(p.y / w.lattice));
    agent.yaw_index = yaw;
    if (!AgentFits(scene, agent.Position(w), w)) continue;
    std::optional<AgentState> best;
    int best_pixels = kMinVisiblePixels - 1;
    for (int pitch = 0; pitch >= -w.max_pitch_steps; --pitch) {
      agent.pitch_index = pitch;
      const Frame f = Render(scene, agent, w, cam, 0);
      const CentralRegion region = CentralRegion::Of(f, cfg.targets.center_fraction);
      int pixels = 0;
      for (int r = 0; r < f.height(); ++r)
        for (int c = 0; c < f.width(); ++c) pixels += f.instance_ids(r, c) == inst.id && region.Contains(r, c);
      if (pixels > best_pixels) {
        best_pixels = pixels;
        best = agent;
      }
    }
    if (best) out.push_back(*best);
  }
  return out;
}

}  // namespace detail

// Puts the agent in front of every instance of every scene and attempts
// both interactions on a fresh copy of the scene. The object-level
// prediction is the mean pixel prediction over the instance's pixels, seen
// from the first feasible heading. An interaction that fails is retried
// from the other headings (a box against a wall can still be pushed from
// its open side); the outcome is positive if any attempt succeeds.
inline ObjectwiseResult ObjectwiseInteractionTest(std::span<const Scene> scenes, const PixelPredictor& predictor,
                                                  const WorldConfig& w, const CameraConfig& cam,
                                                  const ObjectwiseConfig& cfg = {}) {
  ObjectwiseResult out;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const Scene& scene = scenes[s];
    for (const auto& inst : scene.instances) {
      const std::vector<AgentState> poses = detail::PlaceAround(scene, inst, w, cam, cfg);
      if (poses.empty()) {
        out.skipped.push_back("scene " + std::to_string(s) + " instance " + std::to_string(inst.id) +
                              ": no collision-free viewpoint");
        continue;
      }
      const Frame f = Render(scene, poses.front(), w, cam, MixSeed(s, static_cast<std::uint64_t>(inst.id)));
      const Image<float> pred = predictor(f, scene);
      const CellTargets targets = ResolveTargets(f, Image<float>(), cfg.targets);
      const TargetCandidate* cand = targets.Find(inst.id);
      if (cand == nullptr) {
        out.skipped.push_back("scene " + std::to_string(s) + " instance " + std::to_string(inst.id) +
                              ": not in the central region");
        continue;
      }
      for (int a = 0; a < kNumAffordances; ++a) {
        double sum = 0.0;
        int n = 0;
        for (std::size_t p = 0; p < f.instance_ids.pixel_count(); ++p)
          if (f.instance_ids.at_pixel(p) == inst.id) {
            sum += pred.at_pixel(p, a);
            ++n;
          }
        bool success = false;
        for (std::size_t k = 0; k < poses.size() && !success; ++k) {
          AgentState agent = poses[k];
          int cell = cand->cell;
          if (k > 0) {
            const Frame view = Render(scene, agent, w, cam, 0);
            const CellTargets other = ResolveTargets(view, Image<float>(), cfg.targets);
            const TargetCandidate* c = other.Find(inst.id);
            if (c == nullptr) continue;
            cell = c->cell;
          }
          Scene trial_scene = scene;
          const Action action = a == 0 ? Action::Pickup(cell) : Action::Push(cell);
          success = Step(trial_scene, agent, action, inst.id, w, cam).success;
        }
        ObjectTrial t;
        t.scene_index = static_cast<int>(s);
        t.instance_id = inst.id;
        t.affordance = static_cast<Affordance>(a);
        t.mean_prediction = sum / n;
        t.predicted = t.mean_prediction >= cfg.threshold;
        t.outcome = success;
        out.confusion[a].Add(t.predicted, t.outcome);
        out.trials.push_back(t);
      }
    }
  }
  return out;
}

}  // namespace affex
