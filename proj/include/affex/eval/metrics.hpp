#pragma once

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "affex/core/image.hpp"
#include "affex/labeling/masks.hpp"
#include "affex/world/frame.hpp"
#include "affex/world/scene.hpp"

namespace affex {

inline constexpr double kBinarizeThreshold = 0.5;
inline constexpr int kMinVisiblePixels = 10;

// Ground truth for affordance `a`: the instance's category flag painted
// over its pixels.
inline Image<std::uint8_t> GroundTruthMask(const Frame& f, const Scene& scene, Affordance a) {
  Image<std::uint8_t> out(f.height(), f.width());
  std::map<int, bool> cache;
  for (std::size_t p = 0; p < out.pixel_count(); ++p) {
    const int id = f.instance_ids.at_pixel(p);
    auto it = cache.find(id);
    if (it == cache.end()) it = cache.emplace(id, scene.Affords(id, a)).first;
    out.at_pixel(p) = it->second;
  }
  return out;
}

inline bool Binarize(float prob, double threshold = kBinarizeThreshold) { return prob >= threshold; }

// |P & G| / |P | G| with P = predictions >= threshold; 1 when both are empty.
inline double AffordanceIou(const Image<float>& predictions, int affordance, const Image<std::uint8_t>& truth,
                            double threshold = kBinarizeThreshold) {
  AFFEX_REQUIRE(predictions.SameDims(truth), "prediction and ground truth sizes differ");
  long inter = 0, uni = 0;
  for (int r = 0; r < truth.height(); ++r)
    for (int c = 0; c < truth.width(); ++c) {
      const bool p = Binarize(predictions(r, c, affordance), threshold), g = truth(r, c) != 0;
      inter += p && g;
      uni += p || g;
    }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Fraction of visible objects (id > 0, at least `min_pixels` pixels) whose
// majority pixel vote matches the ground truth. Ties vote positive. Empty
// when nothing is visible.
inline std::optional<double> ObjectAccuracy(const Image<float>& predictions, int affordance, const Frame& f,
                                            const Scene& scene, int min_pixels = kMinVisiblePixels,
                                            double threshold = kBinarizeThreshold) {
  std::map<int, std::pair<int, int>> votes;  // id -> (positive, total)
  for (int r = 0; r < f.height(); ++r)
    for (int c = 0; c < f.width(); ++c) {
      const int id = f.instance_ids(r, c);
      if (id <= 0) continue;
      auto& v = votes[id];
      v.first += Binarize(predictions(r, c, affordance), threshold);
      ++v.second;
    }
  int visible = 0, correct = 0;
  for (const auto& [id, v] : votes) {
    if (v.second < min_pixels) continue;
    ++visible;
    const bool predicted = 2 * v.first >= v.second;
    correct += predicted == scene.Affords(id, static_cast<Affordance>(affordance));
  }
  if (visible == 0) return std::nullopt;
  return static_cast<double>(correct) / visible;
}

struct Confusion {
  long tp = 0, fp = 0, fn = 0, tn = 0;

  void Add(bool predicted, bool truth) {
    if (predicted && truth) ++tp;
    else if (predicted) ++fp;
    else if (truth) ++fn;
    else ++tn;
  }
  long total() const { return tp + fp + fn + tn; }
  // Zero when the denominator is zero.
  double precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn); }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
  double accuracy() const { return total() == 0 ? 0.0 : static_cast<double>(tp + tn) / total(); }
  double iou() const { return tp + fp + fn == 0 ? 1.0 : static_cast<double>(tp) / (tp + fp + fn); }
};

// Pixel confusion of binarised predictions against the ground truth.
inline Confusion PixelConfusion(const Image<float>& predictions, int affordance, const Image<std::uint8_t>& truth,
                                double threshold = kBinarizeThreshold) {
  Confusion c;
  for (int r = 0; r < truth.height(); ++r)
    for (int col = 0; col < truth.width(); ++col)
      c.Add(Binarize(predictions(r, col, affordance), threshold), truth(r, col) != 0);
  return c;
}

// Numerical form of IoU <= F1 / (2 - F1) (equality holds for a single
// pixel confusion).
inline bool IouWithinF1Bound(double iou, double f1, double tol = 1e-9) { return iou <= f1 / (2.0 - f1) + tol; }

struct EpisodeRates {
  double interaction_success_rate = 0.0;
  std::optional<double> interacted_object_rate;  // empty without interactable objects
  std::array<double, kNumAffordances> interactable_annotation_rate{};
  std::array<double, kNumAffordances> non_interactable_annotation_rate{};
};

// Rates over one episode. `labels[t]` annotates `frames[t]`; missing
// annotations count as unlabelled.
inline EpisodeRates ComputeEpisodeRates(std::span<const InteractionEvent> events, const Scene& scene,
                                        std::span<const std::shared_ptr<const Frame>> frames,
                                        std::span<const PixelLabelMask> labels) {
  AFFEX_REQUIRE(labels.size() == frames.size(), "one label mask per frame is required");
  EpisodeRates out;
  int successes = 0;
  std::set<int> interacted;
  for (const auto& e : events) {
    successes += e.success;
    if (scene.Interactable(e.instance_id)) interacted.insert(e.instance_id);
  }
  out.interaction_success_rate = events.empty() ? 0.0 : static_cast<double>(successes) / events.size();
  int interactable = 0;
  for (const auto& inst : scene.instances) interactable += scene.Interactable(inst.id);
  if (interactable > 0) out.interacted_object_rate = static_cast<double>(interacted.size()) / interactable;
  if (frames.empty()) return out;
  for (int a = 0; a < kNumAffordances; ++a) {
    double pos = 0.0, neg = 0.0;
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const Frame& f = *frames[t];
      const PixelLabelMask& m = labels[t];
      long good_pos = 0, good_neg = 0;
      std::map<int, bool> truth;
      for (std::size_t p = 0; p < m.pixel_count(); ++p) {
        const std::int8_t l = m.at_pixel(p, a);
        if (l == kLabelUnknown) continue;
        const int id = f.instance_ids.at_pixel(p);
        auto it = truth.find(id);
        if (it == truth.end()) it = truth.emplace(id, scene.Affords(id, static_cast<Affordance>(a))).first;
        good_pos += l == kLabelPositive && it->second;
        good_neg += l == kLabelNegative && !it->second;
      }
      const double n = static_cast<double>(f.height()) * f.width();
      pos += good_pos / n;
      neg += good_neg / n;
    }
    out.interactable_annotation_rate[a] = pos / frames.size();
    out.non_interactable_annotation_rate[a] = neg / frames.size();
  }
  return out;
}

}  // namespace affex
