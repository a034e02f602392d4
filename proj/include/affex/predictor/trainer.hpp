#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "affex/core/random.hpp"
#include "affex/labeling/dataset.hpp"
#include "affex/nn/adamw.hpp"
#include "affex/predictor/loss.hpp"
#include "affex/predictor/model.hpp"

namespace affex {

struct TrainConfig {
  nn::AdamWConfig optimizer;
  LossWeights loss;
  FeatureConfig features;
  int batch_frames = 8;
  int retire_after = 35;
  int epochs_per_episode = 5;
  // Cost caps: frames drawn per dataset per epoch and labelled pixels drawn
  // per frame. Zero disables a cap.
  int max_frames_per_dataset = 8;
  int max_pixels_per_frame = 256;
  int val_max_frames = 64;
  int val_max_pixels = 512;
};

template <typename T>
struct TrainState {
  std::vector<EpisodeDataset> pool;
  nn::AdamW<T> optimizer;
  long step = 0;
  Rng rng;
};

template <typename T>
TrainState<T> MakeTrainState(const AffordanceModel<T>& model, const TrainConfig& cfg, std::uint64_t seed) {
  return {{}, nn::AdamW<T>(model.net.num_params(), cfg.optimizer), 0, Rng(seed)};
}

// Features and labels of a frame's labelled pixels, optionally subsampled.
template <typename T>
struct PixelBatch {
  std::vector<T> x;
  std::vector<std::int8_t> y;
  int rows() const { return static_cast<int>(y.size() / kNumAffordances); }
};

template <typename T>
void AppendLabelledPixels(const LabeledSample& s, const FeatureConfig& fc, int max_pixels, Rng* rng,
                          PixelBatch<T>& out) {
  std::vector<std::size_t> idx;
  for (std::size_t p = 0; p < s.labels.pixel_count(); ++p)
    for (int a = 0; a < kNumAffordances; ++a)
      if (s.labels.at_pixel(p, a) != kLabelUnknown) {
        idx.push_back(p);
        break;
      }
  if (max_pixels > 0 && idx.size() > static_cast<std::size_t>(max_pixels)) {
    if (rng) {
      rng->Shuffle(idx);
      idx.resize(static_cast<std::size_t>(max_pixels));
      std::sort(idx.begin(), idx.end());
    } else {
      // Deterministic even stride for evaluation.
      std::vector<std::size_t> kept;
      for (int k = 0; k < max_pixels; ++k) kept.push_back(idx[idx.size() * k / max_pixels]);
      idx.swap(kept);
    }
  }
  std::vector<T> feats;
  ComputePixelFeatures(*s.frame, fc, feats);
  for (std::size_t p : idx) {
    out.x.insert(out.x.end(), feats.begin() + p * kNumPixelFeatures, feats.begin() + (p + 1) * kNumPixelFeatures);
    for (int a = 0; a < kNumAffordances; ++a) out.y.push_back(s.labels.at_pixel(p, a));
  }
}

// Loss of one frame's pixel batch and its gradient accumulated into `grad`
// with the given scale.
template <typename T>
T LossAndGradient(const AffordanceModel<T>& m, const PixelBatch<T>& b, const LossWeights& w, T scale,
                  std::vector<T>* grad) {
  nn::MlpCache<T> cache;
  m.net.Forward(b.x.data(), b.rows(), cache);
  std::vector<T> p(cache.output().begin(), cache.output().end());
  for (auto& v : p) v = Sigmoid(v);
  std::vector<T> dp;
  const T loss = AffordanceLoss<T>(p, b.y, kNumAffordances, w, grad ? &dp : nullptr);
  if (grad) {
    for (std::size_t i = 0; i < dp.size(); ++i) dp[i] *= p[i] * (T(1) - p[i]) * scale;
    m.net.Backward(cache, dp.data(), grad->data());
  }
  return loss;
}

struct EpochStats {
  double mean_loss = 0.0;
  int batches = 0;
  int frames = 0;
  int retired = 0;
};

// One pass over (capped) training frames of every live dataset, then usage
// bookkeeping and retirement.
template <typename T>
EpochStats TrainEpoch(TrainState<T>& st, AffordanceModel<T>& model, const TrainConfig& cfg) {
  EpochStats stats;
  std::vector<const LabeledSample*> frames;
  for (auto& ds : st.pool) {
    std::vector<std::size_t> order(ds.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    st.rng.Shuffle(order);
    if (cfg.max_frames_per_dataset > 0 && order.size() > static_cast<std::size_t>(cfg.max_frames_per_dataset))
      order.resize(static_cast<std::size_t>(cfg.max_frames_per_dataset));
    for (std::size_t i : order) frames.push_back(&ds.train[i]);
  }
  st.rng.Shuffle(frames);
  std::vector<T> grad(model.net.num_params());
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < frames.size(); start += static_cast<std::size_t>(cfg.batch_frames)) {
    const std::size_t end = std::min(frames.size(), start + static_cast<std::size_t>(cfg.batch_frames));
    std::fill(grad.begin(), grad.end(), T(0));
    const T scale = T(1) / static_cast<T>(end - start);
    for (std::size_t i = start; i < end; ++i) {
      PixelBatch<T> b;
      AppendLabelledPixels(*frames[i], cfg.features, cfg.max_pixels_per_frame, &st.rng, b);
      loss_sum += static_cast<double>(LossAndGradient(model, b, cfg.loss, scale, &grad));
    }
    st.optimizer.Step(model.net.params(), grad);
    ++st.step;
    ++stats.batches;
  }
  stats.frames = static_cast<int>(frames.size());
  stats.mean_loss = frames.empty() ? 0.0 : loss_sum / static_cast<double>(frames.size());
  for (auto& ds : st.pool) ++ds.usage_count;
  const auto before = st.pool.size();
  std::erase_if(st.pool, [&](const EpisodeDataset& d) { return d.usage_count >= cfg.retire_after; });
  stats.retired = static_cast<int>(before - st.pool.size());
  return stats;
}

// Mean loss over every labelled pixel of the given samples.
template <typename T>
double EvaluateLoss(const AffordanceModel<T>& m, const std::vector<LabeledSample>& samples, const TrainConfig& cfg) {
  double sum = 0.0;
  for (const auto& s : samples) {
    PixelBatch<T> b;
    AppendLabelledPixels(s, cfg.features, 0, static_cast<Rng*>(nullptr), b);
    sum += static_cast<double>(LossAndGradient<T>(m, b, cfg.loss, T(1), nullptr));
  }
  return samples.empty() ? 0.0 : sum / static_cast<double>(samples.size());
}

// Validation frames shared by incumbent and candidate: the newest val samples
// across the pool, capped.
template <typename T>
std::vector<const LabeledSample*> ValidationSet(const TrainState<T>& st, const TrainConfig& cfg) {
  std::vector<const LabeledSample*> out;
  for (auto it = st.pool.rbegin(); it != st.pool.rend(); ++it)
    for (const auto& s : it->val) {
      if (cfg.val_max_frames > 0 && out.size() >= static_cast<std::size_t>(cfg.val_max_frames)) return out;
      out.push_back(&s);
    }
  return out;
}

// Mean over affordances of pixel F1 on labelled pixels at threshold 0.5.
// Affordances with no positives and no predicted positives are skipped.
template <typename T>
double PixelF1(const AffordanceModel<T>& m, const std::vector<const LabeledSample*>& val, const TrainConfig& cfg) {
  std::array<long, kNumAffordances> tp{}, fp{}, fn{};
  for (const auto* s : val) {
    PixelBatch<T> b;
    AppendLabelledPixels(*s, cfg.features, cfg.val_max_pixels, static_cast<Rng*>(nullptr), b);
    const std::vector<T> p = PredictFeatures(m, b.x);
    for (std::size_t j = 0; j < b.y.size(); ++j) {
      if (b.y[j] == kLabelUnknown) continue;
      const int a = static_cast<int>(j % kNumAffordances);
      const bool pred = p[j] >= T(0.5), truth = b.y[j] == kLabelPositive;
      tp[a] += pred && truth;
      fp[a] += pred && !truth;
      fn[a] += !pred && truth;
    }
  }
  double sum = 0.0;
  int defined = 0;
  for (int a = 0; a < kNumAffordances; ++a) {
    const long den = 2 * tp[a] + fp[a] + fn[a];
    if (den == 0) continue;
    sum += 2.0 * static_cast<double>(tp[a]) / static_cast<double>(den);
    ++defined;
  }
  return defined == 0 ? 0.0 : sum / defined;
}

struct ReplaceDecision {
  bool replaced = false;
  double incumbent_score = 0.0;
  double candidate_score = 0.0;
};

// Adopts the candidate iff its validation F1 strictly beats the incumbent's
// on the same validation frames. An empty validation set keeps the incumbent.
template <typename T>
ReplaceDecision MaybeReplace(AffordanceModel<T>& best, const AffordanceModel<T>& candidate,
                             const std::vector<const LabeledSample*>& val, const TrainConfig& cfg) {
  ReplaceDecision d;
  if (val.empty()) {
    d.incumbent_score = best.val_score;
    return d;
  }
  d.incumbent_score = PixelF1(best, val, cfg);
  d.candidate_score = PixelF1(candidate, val, cfg);
  if (d.candidate_score > d.incumbent_score) {
    const int version = best.version;
    best.net = candidate.net;
    best.version = version + 1;
    best.val_score = d.candidate_score;
    d.replaced = true;
  } else {
    best.val_score = d.incumbent_score;
  }
  return d;
}

}  // namespace affex
