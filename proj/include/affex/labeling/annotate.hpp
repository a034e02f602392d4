#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "affex/core/error.hpp"
#include "affex/core/image.hpp"
#include "affex/mapping/object_map.hpp"
#include "affex/world/frame.hpp"

namespace affex {

// Records an interaction outcome on the instance. Interaction labels replace
// confidence labels. A success is never downgraded by a later failure of the
// same affordance (e.g. a push that is blocked after an earlier push worked).
inline void AnnotateByInteraction(ObjectLevelMap& map, int instance_id, Affordance a, bool success) {
  InstanceRecord& rec = map.mutable_instance(instance_id);
  if (success) {
    rec.interaction(a) = InteractionState::kSucceeded;
    rec.label(a) = {LabelState::kPositive, LabelSource::kInteraction};
    return;
  }
  if (rec.interaction(a) == InteractionState::kSucceeded) return;
  rec.interaction(a) = InteractionState::kFailed;
  rec.label(a) = {LabelState::kNegative, LabelSource::kInteraction};
}

// Nearest-rank percentile: the ceil(percent * n / 100)-th smallest value
// (1-indexed). Reorders `values`.
inline float NearestRankPercentile(std::span<float> values, int percent) {
  AFFEX_REQUIRE(!values.empty(), "percentile of an empty set");
  AFFEX_REQUIRE(percent > 0 && percent <= 100, "percent must be in (0, 100]");
  const std::size_t n = values.size();
  std::size_t rank = (static_cast<std::size_t>(percent) * n + 99) / 100;
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
  return values[rank - 1];
}

struct ConfidenceThresholds {
  double positive = 0.9;  // max over frames of P95 must exceed this
  double negative = 0.1;  // min over frames of P5 must fall below this
  int upper_percentile = 95;
  int lower_percentile = 5;
};

// Running per-frame percentile extremes for one instance and affordance.
struct ConfidenceStats {
  float max_upper = -std::numeric_limits<float>::infinity();
  float min_lower = std::numeric_limits<float>::infinity();
  int frames = 0;

  void AddFrame(std::span<float> pixels, const ConfidenceThresholds& t) {
    if (pixels.empty()) return;
    max_upper = std::max(max_upper, NearestRankPercentile(pixels, t.upper_percentile));
    min_lower = std::min(min_lower, NearestRankPercentile(pixels, t.lower_percentile));
    ++frames;
  }

  // Positive / negative when exactly one threshold is crossed; nothing when
  // neither or both are.
  LabelState Decide(const ConfidenceThresholds& t) const {
    if (frames == 0) return LabelState::kUnknown;
    // Compare at the precision the predictions are stored in.
    const bool pos = max_upper > static_cast<float>(t.positive);
    const bool neg = min_lower < static_cast<float>(t.negative);
    if (pos == neg) return LabelState::kUnknown;
    return pos ? LabelState::kPositive : LabelState::kNegative;
  }
};

inline LabelState DecideByConfidence(std::vector<std::vector<float>> frames, const ConfidenceThresholds& t) {
  ConfidenceStats s;
  for (auto& f : frames) s.AddFrame(f, t);
  return s.Decide(t);
}

// Labels instances that carry no label and no interaction for an affordance
// from the predictor's per-pixel outputs on the frames they appear in.
// `predictions[i]` is the H x W x A probability image for `frames[i]`.
namespace detail {

template <typename FrameAt>
int AnnotateByConfidence(ObjectLevelMap& map, std::size_t n, FrameAt frame_at,
                         std::span<const Image<float>> predictions, const ConfidenceThresholds& t) {
  AFFEX_REQUIRE(n == predictions.size(), "one prediction image per frame is required");
  std::map<std::pair<int, int>, ConfidenceStats> stats;
  const auto candidate = [&](int id, int a) {
    if (!map.Has(id)) return false;
    const auto& rec = map.instance(id);
    return rec.labels[a].state == LabelState::kUnknown && rec.interacted[a] == InteractionState::kNone;
  };
  std::map<int, std::vector<float>> buckets;
  for (std::size_t i = 0; i < n; ++i) {
    const Frame& f = frame_at(i);
    const Image<float>& pred = predictions[i];
    AFFEX_REQUIRE(pred.SameDims(f.depth) && pred.channels() == kNumAffordances,
                  "prediction image does not match its frame");
    for (int a = 0; a < kNumAffordances; ++a) {
      for (auto& [id, v] : buckets) v.clear();
      for (std::size_t p = 0; p < f.instance_ids.pixel_count(); ++p) {
        const int id = f.instance_ids.at_pixel(p);
        if (id == kNoHitId) continue;
        buckets[id].push_back(pred.at_pixel(p, a));
      }
      for (auto& [id, v] : buckets)
        if (!v.empty() && candidate(id, a)) stats[{id, a}].AddFrame(v, t);
    }
  }
  int labelled = 0;
  for (const auto& [key, s] : stats) {
    const LabelState decision = s.Decide(t);
    if (decision == LabelState::kUnknown) continue;
    map.mutable_instance(key.first).labels[key.second] = {decision, LabelSource::kConfidence};
    ++labelled;
  }
  return labelled;
}

}  // namespace detail

inline int AnnotateByConfidence(ObjectLevelMap& map, std::span<const Frame> frames,
                                std::span<const Image<float>> predictions, const ConfidenceThresholds& t) {
  return detail::AnnotateByConfidence(
      map, frames.size(), [&](std::size_t i) -> const Frame& { return frames[i]; }, predictions, t);
}

inline int AnnotateByConfidence(ObjectLevelMap& map, std::span<const std::shared_ptr<const Frame>> frames,
                                std::span<const Image<float>> predictions, const ConfidenceThresholds& t) {
  return detail::AnnotateByConfidence(
      map, frames.size(), [&](std::size_t i) -> const Frame& { return *frames[i]; }, predictions, t);
}

}  // namespace affex
