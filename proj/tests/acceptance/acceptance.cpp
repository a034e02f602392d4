// Acceptance suite. Prints one PASS/FAIL line per criterion; exit status is
// non-zero if any selected criterion fails.
//
//   acceptance                 all criteria
//   acceptance -c 1 -c 4       a subset
//   acceptance --work DIR      scratch directory for the long-running ones

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "affex/cli/ablation.hpp"
#include "affex/cli/artifacts.hpp"
#include "affex/cli/config.hpp"
#include "affex/cli/run.hpp"
#include "affex/eval/protocols.hpp"
#include "affex/labeling/annotate.hpp"
#include "affex/labeling/masks.hpp"
#include "affex/mapping/object_map.hpp"
#include "affex/policy/episode.hpp"
#include "affex/policy/ppo.hpp"
#include "affex/policy/reward.hpp"
#include "affex/predictor/trainer.hpp"
#include "affex/world/render.hpp"
#include "affex/world/sim.hpp"

namespace affex {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string F(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

fs::path g_work;

fs::path Scratch(const std::string& name) {
  const fs::path p = g_work / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// ---------------------------------------------------------------------------
// Shared episodes for the labeling criteria: 20 seeds, 200 steps, random
// policy over the masked action set so that interactions happen from the
// first step.

struct LabelEpisode {
  EpisodeResult result;
};

const std::vector<LabelEpisode>& LabelEpisodes() {
  static const std::vector<LabelEpisode> episodes = [] {
    std::vector<LabelEpisode> out;
    EpisodeConfig cfg;
    cfg.max_steps = 200;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const Scene scene = GenerateScene(seed, cfg.scene);
      PolicyNet<float> net(MakePolicyNetConfig(Arm::kFull, cfg.obs, PolicyActionCount(cfg)));
      Rng init(seed);
      net.Init(init);
      const AffordanceModel<float> predictor = MakeAffordanceModel<float>(seed);
      out.push_back({RunEpisode(scene, net, predictor, Arm::kFull, cfg, seed, PolicyMode::kRandom)});
    }
    return out;
  }();
  return episodes;
}

std::int8_t LabelValue(const AffordanceLabel& l) {
  if (l.state == LabelState::kPositive) return kLabelPositive;
  if (l.state == LabelState::kNegative) return kLabelNegative;
  return kLabelUnknown;
}

// Every labelled instance must be annotated in exactly the frames it is
// visible in, on exactly its segmentation pixels.
Outcome PropagationExactness() {
  long mismatched_pixels = 0, instances = 0, frame_count_errors = 0, labelled_frames = 0;
  for (const auto& ep : LabelEpisodes()) {
    const EpisodeResult& r = ep.result;
    const auto annotated = PropagateToFrames(r.map, r.frames);
    if (annotated.size() != r.frames.size()) return {false, "annotated frame count differs from frame count"};

    // Expected label of every pixel: the map label of the instance it shows.
    for (std::size_t i = 0; i < annotated.size(); ++i) {
      const Frame& f = *r.frames[i];
      for (std::size_t p = 0; p < f.instance_ids.pixel_count(); ++p) {
        const int id = f.instance_ids.at_pixel(p);
        for (int a = 0; a < kNumAffordances; ++a) {
          std::int8_t want = kLabelUnknown;
          if (id > 0 && r.map.Has(id)) want = LabelValue(r.map.instance(id).labels[a]);
          mismatched_pixels += annotated[i].labels.at_pixel(p, a) != want;
        }
      }
    }

    for (const auto& [id, rec] : r.map.instances()) {
      if (id <= 0) continue;
      std::vector<int> affs;
      for (int a = 0; a < kNumAffordances; ++a)
        if (rec.labels[a].source == LabelSource::kInteraction) affs.push_back(a);
      if (affs.empty()) continue;
      ++instances;
      long visible = 0, annotated_frames = 0;
      for (std::size_t i = 0; i < annotated.size(); ++i) {
        const Frame& f = *r.frames[i];
        bool seen = false, all = true;
        for (std::size_t p = 0; p < f.instance_ids.pixel_count(); ++p) {
          if (f.instance_ids.at_pixel(p) != id) continue;
          seen = true;
          for (int a : affs) all &= annotated[i].labels.at_pixel(p, a) == LabelValue(rec.labels[a]);
        }
        visible += seen;
        annotated_frames += seen && all;
      }
      labelled_frames += annotated_frames;
      frame_count_errors += visible != static_cast<long>(rec.frames_seen.size());
      frame_count_errors += annotated_frames != visible;
    }
  }
  const bool pass = instances > 0 && mismatched_pixels == 0 && frame_count_errors == 0;
  return {pass, std::to_string(instances) + " interaction-labelled instances, " + std::to_string(labelled_frames) +
                    " annotated frames, " + std::to_string(frame_count_errors) + " frame-count errors, " +
                    std::to_string(mismatched_pixels) + " mismatched pixel labels"};
}

// Pixels whose label agrees with the category-level ground truth. Floor and
// walls afford nothing.
long CorrectPixels(const std::vector<AnnotatedFrame>& frames, const Scene& truth) {
  long n = 0;
  for (const auto& af : frames)
    for (std::size_t p = 0; p < af.labels.pixel_count(); ++p) {
      const int id = af.frame->instance_ids.at_pixel(p);
      for (int a = 0; a < kNumAffordances; ++a) {
        const std::int8_t l = af.labels.at_pixel(p, a);
        if (l == kLabelUnknown) continue;
        const bool positive = id > 0 && truth.Affords(id, static_cast<Affordance>(a));
        n += (l == kLabelPositive) == positive;
      }
    }
  return n;
}

struct SpillCount {
  long labelled = 0, off_instance = 0;
  double rate() const { return labelled ? static_cast<double>(off_instance) / labelled : 0.0; }
};

void CountSpill(const std::vector<AnnotatedFrame>& frames, const InteractionEvent& e, SpillCount& c) {
  const int a = static_cast<int>(e.affordance);
  for (const auto& af : frames)
    for (std::size_t p = 0; p < af.labels.pixel_count(); ++p) {
      if (af.labels.at_pixel(p, a) == kLabelUnknown) continue;
      ++c.labelled;
      c.off_instance += af.frame->instance_ids.at_pixel(p) != e.instance_id;
    }
}

// Map propagation against the sphere baseline: correctly labelled pixels per
// interaction, and labels that land off a small target.
Outcome PropagationDensity() {
  long events = 0, prop_correct = 0, sphere_correct = 0, small_events = 0;
  SpillCount prop_spill, sphere_spill;
  for (const auto& ep : LabelEpisodes()) {
    const EpisodeResult& r = ep.result;
    events += static_cast<long>(r.events.size());
    prop_correct += CorrectPixels(PropagateToFrames(r.map, r.frames), r.initial_scene);
    sphere_correct += CorrectPixels(SphereAnnotation(r.events, r.frames, 0.2, 10), r.initial_scene);

    for (const auto& e : r.events) {
      const ObjectInstance* inst = r.initial_scene.Find(e.instance_id);
      if (inst == nullptr || std::max(inst->extent.x, inst->extent.y) >= 0.1 || !r.map.Has(e.instance_id)) continue;
      ++small_events;
      CountSpill(SphereAnnotation(std::span(&e, 1), r.frames, 0.2, 10), e, sphere_spill);
      ObjectLevelMap single = r.map;
      for (const auto& [id, rec] : r.map.instances()) {
        InstanceRecord& m = single.mutable_instance(id);
        m.labels = {};
        m.interacted = {};
      }
      AnnotateByInteraction(single, e.instance_id, e.affordance, e.success);
      CountSpill(PropagateToFrames(single, r.frames), e, prop_spill);
    }
  }
  if (events == 0) return {false, "no interactions in the episodes"};
  const double prop = static_cast<double>(prop_correct) / events, sphere = static_cast<double>(sphere_correct) / events;
  const double ratio = sphere > 0 ? prop / sphere : INFINITY;
  const bool pass = ratio >= 3.0 && small_events > 0 && prop_spill.off_instance == 0 &&
                    sphere_spill.rate() > prop_spill.rate();
  return {pass, std::to_string(events) + " interactions; correct px/interaction " + F("%.1f", prop) +
                    " (map) vs " + F("%.1f", sphere) + " (sphere), ratio " + F("%.2f", ratio) + " >= 3; " +
                    std::to_string(small_events) + " small-object interactions, off-target label rate " +
                    F("%.4f", sphere_spill.rate()) + " (sphere) vs " + F("%.4f", prop_spill.rate()) + " (map, must be 0)"};
}

// ---------------------------------------------------------------------------

float SortedRank(std::vector<float> v, int percent) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  // ceil(percent * n / 100) in integers, 1-indexed
  std::size_t k = (static_cast<std::size_t>(percent) * n) / 100;
  if (k * 100 < static_cast<std::size_t>(percent) * n) ++k;
  k = std::clamp<std::size_t>(k, 1, n);
  return v[k - 1];
}

LabelState BruteForceRule(const std::vector<std::vector<float>>& frames) {
  bool any = false, pos = false, neg = false;
  for (const auto& v : frames) {
    if (v.empty()) continue;
    any = true;
    pos = pos || SortedRank(v, 95) > 0.9f;
    neg = neg || SortedRank(v, 5) < 0.1f;
  }
  if (!any || pos == neg) return LabelState::kUnknown;
  return pos ? LabelState::kPositive : LabelState::kNegative;
}

// Randomised synthetic instances; every trial's labels must match the
// sort-based oracle.
Outcome PercentileRule() {
  Rng rng(2024);
  int agree = 0, boundary_trials = 0;
  const int kTrials = 100;
  for (int trial = 0; trial < kTrials; ++trial) {
    const int side = static_cast<int>(rng.Int(4, 12));
    const int n = static_cast<int>(rng.Int(1, 6));
    const int mode = trial % 4;
    std::vector<Frame> frames;
    std::vector<Image<float>> preds;
    for (int k = 0; k < n; ++k) {
      Frame f;
      f.depth = Image<float>(side, side, 1, 1.0f);
      f.instance_ids = Image<std::int32_t>(side, side, 1, 2);
      f.appearance = Image<float>(side, side, 3, 0.5f);
      f.intrinsics = {side, side, side / 2.0};
      f.step_index = k;
      const double share = rng.Uniform() < 0.15 ? 0.0 : rng.Uniform(0.05, 0.95);
      for (std::size_t p = 0; p < f.instance_ids.pixel_count(); ++p)
        if (rng.Uniform() < share) f.instance_ids.at_pixel(p) = 1;
      Image<float> pr(side, side, kNumAffordances);
      const float level = mode == 2 ? (rng.Uniform() < 0.5 ? 0.9f : 0.1f) : 0.0f;
      const double centre = rng.Uniform();
      for (std::size_t p = 0; p < pr.pixel_count(); ++p)
        for (int a = 0; a < kNumAffordances; ++a) {
          float v = static_cast<float>(std::clamp(centre + 0.35 * rng.Normal(), 0.0, 1.0));
          if (mode == 1) v = std::array<float, 3>{0.9f, 0.1f, 0.5f}[rng.Index(3)];
          if (mode == 2) v = level;
          if (mode == 3 && rng.Uniform() < 0.2) v = rng.Uniform() < 0.5 ? 0.9f : 0.1f;
          pr.at_pixel(p, a) = v;
        }
      frames.push_back(std::move(f));
      preds.push_back(std::move(pr));
    }

    ObjectLevelMap map(Aabb{{0, 0, 0}, {10, 10, 3}});
    map.EnsureInstance(1);
    map.EnsureInstance(2);
    AnnotateByConfidence(map, std::span<const Frame>(frames), preds, ConfidenceThresholds{});

    bool ok = true, boundary = false;
    for (int id : {1, 2})
      for (int a = 0; a < kNumAffordances; ++a) {
        std::vector<std::vector<float>> per_frame;
        for (int k = 0; k < n; ++k) {
          std::vector<float> v;
          for (std::size_t p = 0; p < frames[k].instance_ids.pixel_count(); ++p)
            if (frames[k].instance_ids.at_pixel(p) == id) v.push_back(preds[k].at_pixel(p, a));
          if (!v.empty())
            boundary = boundary || SortedRank(v, 95) == 0.9f || SortedRank(v, 5) == 0.1f;
          per_frame.push_back(std::move(v));
        }
        const AffordanceLabel got = map.instance(id).labels[a];
        const LabelState want = BruteForceRule(per_frame);
        ok = ok && got.state == want &&
             got.source == (want == LabelState::kUnknown ? LabelSource::kNone : LabelSource::kConfidence);
      }
    agree += ok;
    boundary_trials += boundary;
  }
  return {agree == kTrials && boundary_trials > 0,
          std::to_string(agree) + "/" + std::to_string(kTrials) + " instances match the oracle (" +
              std::to_string(boundary_trials) + " with a percentile exactly at a threshold)"};
}

// ---------------------------------------------------------------------------

Outcome RewardSuite() {
  const WorldConfig w;
  const Aabb room{{0, 0, 0}, {5, 5, 3}};
  VisitGrid visits(room, w);
  InteractionNovelty novelty;
  const auto at = [](int x, int y, int yaw) {
    AgentState a;
    a.cell_x = x;
    a.cell_y = y;
    a.yaw_index = yaw;
    return a;
  };
  const auto result = [](Action a, bool success, std::optional<int> target = std::nullopt) {
    StepResult r;
    r.action = a;
    r.success = success;
    r.target = target;
    return r;
  };
  std::vector<std::string> failed;
  int cases = 0;
  const auto expect = [&](const std::string& name, const RewardComponents& got, RewardComponents want) {
    ++cases;
    if (got.nav != want.nav || got.interaction != want.interaction || got.fail != want.fail) failed.push_back(name);
  };

  visits.Visit(at(4, 4, 0));
  expect("novel position", ComputeRewardComponents(result({0}, true), at(4, 5, 0), visits, novelty), {1.0, 0, 0});
  expect("novel orientation", ComputeRewardComponents(result({1}, true), at(4, 5, 1), visits, novelty), {0.3, 0, 0});
  expect("repeat pose", ComputeRewardComponents(result({2}, true), at(4, 5, 0), visits, novelty), {0, 0, 0});
  expect("new successful interaction",
         ComputeRewardComponents(result(Action::Pickup(4), true, 3), at(4, 5, 0), visits, novelty), {0, 1.0, 0});
  expect("repeat success",
         ComputeRewardComponents(result(Action::Pickup(2), true, 3), at(4, 5, 0), visits, novelty), {0, 0, 0});
  expect("other affordance, same object",
         ComputeRewardComponents(result(Action::Push(4), true, 3), at(4, 5, 0), visits, novelty), {0, 1.0, 0});
  expect("failed interaction",
         ComputeRewardComponents(result(Action::Push(7), false, 5), at(4, 5, 0), visits, novelty), {0, 0, -1.0});
  expect("failed navigation", ComputeRewardComponents(result({0}, false), at(4, 5, 0), visits, novelty),
         {0, 0, -1.0});
  expect("novel position and new success",
         ComputeRewardComponents(result(Action::Push(0), true, 9), at(1, 1, 2), visits, novelty), {1.0, 1.0, 0});
  expect("novel orientation and failure",
         ComputeRewardComponents(result(Action::Pickup(0), false, 9), at(1, 1, 5), visits, novelty), {0.3, 0, -1.0});

  // Weighted sums are linear in the components.
  for (double an : {1.0, 0.5, 2.0})
    for (double ai : {1.0, 0.25, 3.0})
      for (double af : {1.0, 0.75, 4.0})
        for (const RewardComponents c : {RewardComponents{1.0, 0, 0}, RewardComponents{0.3, 1.0, 0},
                                         RewardComponents{0, 1.0, -1.0}, RewardComponents{0.3, 0, -1.0}}) {
          ++cases;
          const double want = an * c.nav + ai * c.interaction + af * c.fail;
          if (TotalReward(c, {an, ai, af}) != want) failed.push_back("weighted sum");
        }

  // Every logged step of a real episode is the weighted sum of its parts.
  EpisodeConfig cfg;
  cfg.max_steps = 60;
  cfg.alpha = {0.5, 2.0, 0.25};
  cfg.camera.width = cfg.camera.height = 32;
  const Scene scene = GenerateScene(3, cfg.scene);
  PolicyNet<float> net(MakePolicyNetConfig(Arm::kFull, cfg.obs, PolicyActionCount(cfg)));
  Rng init(3);
  net.Init(init);
  const EpisodeResult r = RunEpisode(scene, net, MakeAffordanceModel<float>(3), Arm::kFull, cfg, 3, PolicyMode::kRandom);
  double sum = 0.0;
  for (const auto& s : r.log) {
    ++cases;
    const auto& c = s.components;
    const bool valid = (c.nav == 0 || c.nav == 0.3 || c.nav == 1.0) && (c.interaction == 0 || c.interaction == 1.0) &&
                       (c.fail == 0 || c.fail == -1.0) && s.reward == TotalReward(c, cfg.alpha);
    if (!valid) failed.push_back("episode step " + std::to_string(s.step));
    sum += s.reward;
  }
  ++cases;
  if (sum != r.reward_sum) failed.push_back("episode reward sum");

  std::string detail = std::to_string(cases - static_cast<int>(failed.size())) + "/" + std::to_string(cases) +
                       " reward cases exact";
  for (std::size_t i = 0; i < std::min<std::size_t>(failed.size(), 3); ++i) detail += "; failed: " + failed[i];
  return {failed.empty(), detail};
}

// ---------------------------------------------------------------------------

Outcome MapCorrectness() {
  const WorldConfig w;
  const CameraConfig cam;
  const Scene scene = GenerateScene(21, SceneConfig{});
  ObjectLevelMap map(scene.room);
  Rng rng(5);
  for (int k = 0; k < 50; ++k) map.IntegrateFrame(Render(scene, SampleAgent(scene, w, rng), w, cam, k, k));
  long total = 0, near = 0;
  for (const auto& [key, e] : map.voxels()) {
    if (e.instance_id <= 0) continue;
    ++total;
    near += scene.Find(e.instance_id)->Bounds().Inflated(map.resolution()).Contains(map.CenterOf(UnpackVoxel(key)));
  }
  const double share = total ? static_cast<double>(near) / total : 0.0;

  // Scripted push: the first pushable instance that moves from a frontal pose.
  int pushed = -1;
  long shifted = 0, voxels = 0;
  std::array<int, 3> offset{};
  for (const auto& inst : scene.instances) {
    if (!scene.CategoryOf(inst).pushable) continue;
    for (const AgentState& pose : detail::PlaceAround(scene, inst, w, cam, ObjectwiseConfig{})) {
      const Frame view = Render(scene, pose, w, cam, 99, 50);
      const CellTargets targets = ResolveTargets(view, Image<float>(), TargetConfig{});
      const TargetCandidate* cand = targets.Find(inst.id);
      if (cand == nullptr) continue;
      Scene moved = scene;
      AgentState agent = pose;
      const StepResult res = Step(moved, agent, Action::Push(cand->cell), inst.id, w, cam);
      if (!res.success) continue;
      ObjectLevelMap m = map;
      m.IntegrateFrame(view);
      std::map<int, std::vector<VoxelIndex>> before;
      for (const auto& mv : res.moved_instances)
        for (VoxelKey k : m.instance(mv.id).voxel_set) before[mv.id].push_back(UnpackVoxel(k));
      m.ApplyMotion(res.moved_instances);
      for (const auto& mv : res.moved_instances) {
        const Vec3 d = moved.Find(mv.id)->pose.position - scene.Find(mv.id)->pose.position;
        const double sx = d.x / map.resolution(), sy = d.y / map.resolution(), sz = d.z / map.resolution();
        offset = {static_cast<int>(std::lround(sx)), static_cast<int>(std::lround(sy)),
                  static_cast<int>(std::lround(sz))};
        const bool integral = std::abs(sx - offset[0]) < 1e-9 && std::abs(sy - offset[1]) < 1e-9 &&
                              std::abs(sz - offset[2]) < 1e-9;
        const auto& after = m.instance(mv.id).voxel_set;
        for (const auto& v : before[mv.id]) {
          ++voxels;
          shifted += integral && after.count(PackVoxel({v.x + offset[0], v.y + offset[1], v.z + offset[2]}));
        }
        if (after.size() != before[mv.id].size()) shifted = -1;
      }
      pushed = inst.id;
      break;
    }
    if (pushed >= 0) break;
  }
  const bool pass = total > 0 && share >= 0.99 && pushed >= 0 && voxels > 0 && shifted == voxels;
  return {pass, F("%.4f", share) + " of " + std::to_string(total) + " object voxels within one voxel of their box (>= 0.99); push of instance " +
                    std::to_string(pushed) + " by (" + std::to_string(offset[0]) + "," + std::to_string(offset[1]) +
                    "," + std::to_string(offset[2]) + ") voxels: " + std::to_string(std::max(shifted, 0L)) + "/" +
                    std::to_string(voxels) + " voxels shifted exactly"};
}

// ---------------------------------------------------------------------------

double RelativeError(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-7}); }

Outcome GradientCheck() {
  // Predictor loss: 50 random 8x8 labelled masks, every parameter.
  Rng rng(31);
  double worst = 0.0;
  long checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    AffordanceModel<double> m = MakeAffordanceModel<double>(500 + trial);
    PixelBatch<double> b;
    for (int i = 0; i < 64 * kNumPixelFeatures; ++i) b.x.push_back(rng.Normal());
    for (int i = 0; i < 64 * kNumAffordances; ++i) b.y.push_back(static_cast<std::int8_t>(rng.Int(-1, 1)));
    b.y[0] = kLabelPositive;
    b.y[2] = kLabelNegative;
    std::vector<double> grad(m.net.num_params(), 0.0);
    LossAndGradient(m, b, LossWeights{}, 1.0, &grad);
    auto& params = m.net.params();
    const double h = 1e-3;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double keep = params[i];
      double v[4];
      const double steps[4] = {-2 * h, -h, h, 2 * h};
      for (int k = 0; k < 4; ++k) {
        params[i] = keep + steps[k];
        v[k] = LossAndGradient<double>(m, b, LossWeights{}, 1.0, nullptr);
      }
      params[i] = keep;
      // fourth-order central difference
      const double fd = (v[0] - 8 * v[1] + 8 * v[2] - v[3]) / (12 * h);
      worst = std::max(worst, RelativeError(grad[i], fd));
      ++checked;
    }
  }

  // Clipped surrogate against its closed form.
  int ppo_cases = 0, ppo_bad = 0;
  for (double eps : {0.1, 0.2, 0.3})
    for (double ratio : {0.3, 0.5, 1.0 - eps / 2, 1.0, 1.0 + eps / 2, 1.5, 2.5})
      for (double adv : {-2.0, -0.5, 0.0, 0.5, 2.0}) {
        ++ppo_cases;
        const double lo = 1.0 - eps, hi = 1.0 + eps;
        const double want = adv >= 0 ? std::min(ratio, hi) * adv : std::max(ratio, lo) * adv;
        const bool active = (ratio >= lo && ratio <= hi) || (adv > 0 && ratio < lo) || (adv < 0 && ratio > hi);
        double g = 0.0;
        const double got = ClippedSurrogate(ratio, adv, eps, &g);
        if (std::abs(got - want) > 1e-12 || g != (active ? adv : 0.0)) ++ppo_bad;
      }

  // Full PPO loss of a small network with ratios placed inside and on both
  // sides of the clip range.
  PolicyNetConfig pc;
  pc.channels = 2;
  pc.grid = 4;
  pc.patch = 2;
  pc.filters = 2;
  pc.flat_dim = 3;
  pc.flat_hidden = 4;
  pc.num_actions = 5;
  pc.head_hidden = {8, 6};
  PolicyNet<double> net(pc);
  Rng nrng(5);
  net.Init(nrng);
  for (auto& p : net.blocks()[pc.channels + 1]->params()) p *= 30.0;
  const int batch = 6;
  PolicyInput<double> in;
  in.batch = batch;
  in.image.resize(static_cast<std::size_t>(batch) * pc.channels * pc.grid * pc.grid);
  in.flat.resize(static_cast<std::size_t>(batch) * pc.flat_dim);
  for (auto& v : in.image) v = nrng.Uniform(-1, 1);
  for (auto& v : in.flat) v = nrng.Uniform(-1, 1);
  std::vector<ActionMask> masks(batch, ActionMask(5, 1));
  masks[1][3] = 0;
  const std::vector<int> actions = {0, 2, 4, 1, 3, 2};
  PolicyCache<double> cache;
  std::vector<double> logits, values;
  net.Forward(in, cache, logits, values);
  const double ratios[] = {1.5, 0.5, 1.05, 1.5, 0.5, 1.0};
  std::vector<double> old_lp(batch), adv = {1.0, 1.0, -0.7, -1.2, -0.4, 0.9}, ret(batch);
  for (int i = 0; i < batch; ++i) {
    old_lp[i] = MaskedLogSoftmax(logits.data() + i * 5, masks[i])[actions[i]] - std::log(ratios[i]);
    ret[i] = nrng.Normal();
  }
  PpoConfig cfg;
  auto grads = net.ZeroGrads();
  PpoLoss(net, in, masks, actions, old_lp, adv, ret, cfg, &grads);
  double ppo_worst = 0.0;
  auto blocks = net.blocks();
  using Grads = std::vector<std::vector<double>>;
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    auto& p = blocks[k]->params();
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double keep = p[j], h = 1e-4;
      double v[4];
      const double steps[4] = {-2 * h, -h, h, 2 * h};
      for (int k = 0; k < 4; ++k) {
        p[j] = keep + steps[k];
        v[k] = PpoLoss(net, in, masks, actions, old_lp, adv, ret, cfg, static_cast<Grads*>(nullptr)).total;
      }
      p[j] = keep;
      const double fd = (v[0] - 8 * v[1] + 8 * v[2] - v[3]) / (12 * h);
      ppo_worst = std::max(ppo_worst, RelativeError(grads[k][j], fd));
    }
  }

  const bool pass = worst < 1e-4 && ppo_bad == 0 && ppo_worst < 1e-4;
  return {pass, "predictor: " + std::to_string(checked) + " partials, worst relative error " + F("%.2e", worst) +
                    " (< 1e-4); clipped surrogate " + std::to_string(ppo_cases - ppo_bad) + "/" +
                    std::to_string(ppo_cases) + " closed-form cases; PPO loss worst relative error " +
                    F("%.2e", ppo_worst)};
}

// ---------------------------------------------------------------------------

ExperimentConfig LoadShippedConfig(const std::string& name) {
  return LoadConfig((fs::path(AFFEX_SOURCE_DIR) / "configs" / name).string());
}

std::vector<double> EpisodeRewards(const fs::path& run) {
  std::ifstream in(run / "episodes.csv");
  std::string line;
  std::getline(in, line);
  std::vector<double> out;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string field;
    for (int i = 0; i < 6 && std::getline(ss, field, ','); ++i) {}
    out.push_back(std::stod(field));
  }
  return out;
}

double Mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Two-room toy scene, five seeds per arm at 50,000 steps each.
Outcome PpoSanity() {
  const ExperimentConfig base = LoadShippedConfig("toy_two_room.ini");
  const fs::path dir = Scratch("c7");
  GenerateSceneSets(base, dir / "scenes", true);
  const SceneSets scenes = LoadSceneSets(dir / "scenes");
  const std::vector<int> seeds = {1, 2, 3, 4, 5};

  std::map<Arm, std::vector<double>> final_isr;
  std::vector<double> trained_reward, random_reward;
  for (int seed : seeds) {
    for (Arm arm : kAllArms) {
      ExperimentConfig c = base;
      c.seed = static_cast<std::uint64_t>(seed);
      c.arm = arm;
      const fs::path run = dir / "runs" / RunId(arm, c.seed);
      RunTraining(c, scenes, run, true, false);
      double isr = 0.0;
      for (const auto& row : FinalValues(ReadMetricsCsv(run / "metrics.csv"), c.final_window))
        if (row.metric == "interaction_success_rate") isr = row.value;
      final_isr[arm].push_back(isr);
      if (arm == Arm::kFull) {
        // Trained policy: the last tenth of its training episodes.
        const auto rewards = EpisodeRewards(run);
        const std::size_t tail = std::max<std::size_t>(1, rewards.size() / 10);
        trained_reward.push_back(Mean({rewards.end() - static_cast<std::ptrdiff_t>(tail), rewards.end()}));
        // Uniform over the same masked action set, same scene and length.
        PolicyNet<float> net(MakePolicyNetConfig(arm, c.episode.obs, PolicyActionCount(c.episode)));
        Rng init(c.seed);
        net.Init(init);
        const AffordanceModel<float> predictor = MakeAffordanceModel<float>(c.seed, PredictorDims(c));
        std::vector<double> r;
        for (std::size_t k = 0; k < tail; ++k)
          r.push_back(RunEpisode(scenes.train[k % scenes.train.size()], net, predictor, arm, c.episode,
                                 MixSeed(c.seed, 50000 + k), PolicyMode::kRandom)
                          .reward_sum);
        random_reward.push_back(Mean(r));
      }
    }
  }
  const double trained = Mean(trained_reward), random = Mean(random_reward);
  // "Twice the random mean"; when the random mean is not positive, twice
  // its distance above it.
  const double bar = random > 0 ? 2.0 * random : random + std::max(1.0, std::abs(random));
  const double full = Mean(final_isr[Arm::kFull]), seg = Mean(final_isr[Arm::kNoMapSeg]),
               noseg = Mean(final_isr[Arm::kNoMapNoSeg]);
  const bool pass = trained >= bar && full > 0.5 * seg && full > 0.5 * noseg;
  return {pass, "mean episodic reward " + F("%.1f", trained) + " trained vs " + F("%.1f", random) +
                    " random (bar " + F("%.1f", bar) + "); final interaction success rate full " + F("%.3f", full) +
                    ", no_map_seg " + F("%.3f", seg) + ", no_map_no_seg " + F("%.3f", noseg) +
                    " (full must exceed half of each)"};
}

// Desk-budget ablation through the ablate pipeline.
Outcome AblationDirection() {
  const ExperimentConfig base = LoadShippedConfig("ablation_desk.ini");
  const fs::path dir = Scratch("c8");
  GenerateSceneSets(base, dir / "scenes", true);
  RunAblation(base, LoadSceneSets(dir / "scenes"), dir / "ablation", true, false);
  const fs::path out = dir / "ablation";
  const auto finals = ReadMetricsCsv(out / "final_train.csv");
  const auto test = ReadMetricsCsv(out / "test_framewise.csv");
  const auto ann = ArmStats(finals, "interactable_annotation_rate", "pickup");
  const auto iou = ArmStats(test, "affordance_iou", "pickup");
  const auto get = [](const std::map<std::string, ArmStat>& m, const char* arm) {
    const auto it = m.find(arm);
    return it == m.end() ? ArmStat{} : it->second;
  };
  const ArmStat fa = get(ann, "full"), na = get(ann, "no_map_no_seg");
  const ArmStat fi = get(iou, "full"), ni = get(iou, "no_map_no_seg");
  const bool report = fs::exists(out / "report.md");
  const bool pass = report && fa.n == 5 && na.n == 5 && fi.n == 5 && ni.n == 5 && fa.mean > na.mean &&
                    fi.mean > ni.mean;
  return {pass, "pick up, mean over " + std::to_string(fa.n) + " seeds: interactable annotation rate full " +
                    F("%.4f", fa.mean) + " vs no_map_no_seg " + F("%.4f", na.mean) + "; test affordance IoU full " +
                    F("%.4f", fi.mean) + " vs no_map_no_seg " + F("%.4f", ni.mean) +
                    (report ? "; report.md written" : "; report.md missing")};
}

// ---------------------------------------------------------------------------

int Shell(const std::string& cmd) {
  const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Compares every CSV (and scene/SVG file) under two output trees.
void CompareTrees(const fs::path& a, const fs::path& b, int* files, std::vector<std::string>* diffs) {
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    const std::string ext = e.path().extension().string();
    if (!e.is_regular_file() || (ext != ".csv" && ext != ".svg" && e.path().filename().string().rfind("scene_", 0) != 0))
      continue;
    ++*files;
    const fs::path other = b / fs::relative(e.path(), a);
    if (!fs::exists(other) || Slurp(e.path()) != Slurp(other)) diffs->push_back(fs::relative(e.path(), a).string());
  }
}

// Every CLI verb run twice with the same config and seed.
Outcome Determinism() {
  const fs::path dir = Scratch("c9");
  const std::string cli = AFFEX_CLI_PATH;
  const fs::path cfg = dir / "tiny.ini";
  WriteText(cfg,
            "[experiment]\nbudget_steps = 400\nepisode_steps = 200\ncheckpoint_every = 1\neval_every = 1\n"
            "[scenes]\ntrain = 2\nval = 1\ntest = 1\nmin_objects = 4\nmax_objects = 6\n"
            "[camera]\nwidth = 32\nheight = 32\n[eval]\ntour_positions = 2\n[ablation]\nseeds = 1,2\n");
  int failures = 0, files = 0;
  std::vector<std::string> diffs;
  const auto run_twice = [&](const std::string& verb, const std::string& args) {
    for (const char* k : {"a", "b"}) {
      const fs::path out = dir / k / verb;
      const int rc = Shell(cli + " " + verb + " --config " + cfg.string() + " --quiet --force --out " + out.string() +
                           " " + args);
      failures += rc != 0;
    }
    CompareTrees(dir / "a" / verb, dir / "b" / verb, &files, &diffs);
  };
  run_twice("scene-gen", "");
  const std::string scenes = "--scenes " + (dir / "a" / "scene-gen").string();
  run_twice("train", scenes + " --seed 3");
  run_twice("eval", scenes + " --run " + (dir / "a" / "train").string());
  run_twice("ablate", scenes);
  run_twice("plot", "--csv " + (dir / "a" / "ablate" / "metrics.csv").string());
  const int replay = Shell(cli + " replay --run " + (dir / "a" / "train").string() + " --force --out " +
                           (dir / "replay").string());
  std::string detail = std::to_string(files) + " output files compared across two runs of scene-gen, train, eval, "
                       "ablate and plot; " + std::to_string(diffs.size()) + " differ; " +
                       std::to_string(failures) + " command failures; replay exit " + std::to_string(replay);
  if (!diffs.empty()) detail += " (first: " + diffs.front() + ")";
  return {files > 0 && diffs.empty() && failures == 0 && replay == 0, detail};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace affex

int main(int argc, char** argv) {
  using namespace affex;
  CLI::App app{"Acceptance criteria"};
  std::vector<int> selected;
  std::string work = (fs::temp_directory_path() / "affex_acceptance").string();
  bool keep = false;
  app.add_option("-c,--criterion", selected, "Criterion number (repeatable); default all")->check(CLI::Range(1, 9));
  app.add_option("--work", work, "Scratch directory");
  app.add_flag("--keep", keep, "Keep scratch outputs");
  CLI11_PARSE(app, argc, argv);
  g_work = work;

  const std::vector<Criterion> all = {
      {1, "label propagation exactness", PropagationExactness},
      {2, "propagation density vs sphere baseline", PropagationDensity},
      {3, "percentile rule oracle", PercentileRule},
      {4, "reward unit suite", RewardSuite},
      {5, "map correctness", MapCorrectness},
      {6, "gradient check", GradientCheck},
      {7, "PPO sanity on the two-room toy scene", PpoSanity},
      {8, "directional ablation", AblationDirection},
      {9, "determinism", Determinism},
  };
  int failed = 0;
  for (const auto& c : all) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  if (!keep) fs::remove_all(g_work);
  return failed == 0 ? 0 : 1;
}
