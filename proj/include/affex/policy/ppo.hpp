#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "affex/core/error.hpp"
#include "affex/core/random.hpp"
#include "affex/policy/action_mask.hpp"
#include "affex/policy/network.hpp"

namespace affex {


// Log-probabilities of the softmax restricted to enabled actions; disabled
// actions get -inf.
template <typename T>
std::vector<T> MaskedLogSoftmax(const T* logits, const ActionMask& mask) {
  const std::size_t n = mask.size();
  T hi = -std::numeric_limits<T>::infinity();
  for (std::size_t j = 0; j < n; ++j)
    if (mask[j]) hi = std::max(hi, logits[j]);
  AFFEX_REQUIRE(std::isfinite(hi), "action mask disables every action");
  T sum = T(0);
  for (std::size_t j = 0; j < n; ++j)
    if (mask[j]) sum += std::exp(logits[j] - hi);
  const T lse = hi + std::log(sum);
  std::vector<T> out(n, -std::numeric_limits<T>::infinity());
  for (std::size_t j = 0; j < n; ++j)
    if (mask[j]) out[j] = logits[j] - lse;
  return out;
}

template <typename T>
int SampleMasked(const T* logits, const ActionMask& mask, Rng& rng) {
  const std::vector<T> logp = MaskedLogSoftmax(logits, mask);
  double u = rng.Uniform();
  int last = -1;
  for (std::size_t j = 0; j < mask.size(); ++j) {
    if (!mask[j]) continue;
    last = static_cast<int>(j);
    u -= std::exp(static_cast<double>(logp[j]));
    if (u < 0.0) return last;
  }
  return last;
}

struct PpoConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  int epochs = 4;
  int minibatch = 100;
  double lr = 3e-4;
  double max_grad_norm = 0.5;
  bool normalize_advantages = true;
};

// Generalised advantage estimation over one trajectory segment. `dones[t]`
// marks that no bootstrap happens after step t; `last_value` bootstraps the
// final step otherwise.
inline void ComputeGae(const std::vector<double>& rewards, const std::vector<double>& values,
                       const std::vector<std::uint8_t>& dones, double last_value, double gamma, double lambda,
                       std::vector<double>& advantages, std::vector<double>& returns) {
  const std::size_t n = rewards.size();
  AFFEX_REQUIRE(values.size() == n && dones.size() == n, "GAE inputs differ in length");
  advantages.assign(n, 0.0);
  returns.assign(n, 0.0);
  double gae = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double next_value = k + 1 < n ? values[k + 1] : last_value;
    const double live = dones[k] ? 0.0 : 1.0;
    const double delta = rewards[k] + gamma * next_value * live - values[k];
    gae = delta + gamma * lambda * live * gae;
    advantages[k] = gae;
    returns[k] = gae + values[k];
  }
}

// min(r A, clip(r, 1 - eps, 1 + eps) A) and its derivative in r.
inline double ClippedSurrogate(double ratio, double adv, double eps, double* dratio = nullptr) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  const double a = ratio * adv, b = clipped * adv;
  if (dratio) *dratio = a <= b ? adv : 0.0;
  return std::min(a, b);
}

struct Rollout {
  int image_size = 0;  // floats per observation image
  int flat_size = 0;
  int num_actions = 0;
  std::vector<float> images;
  std::vector<float> flats;
  std::vector<ActionMask> masks;
  std::vector<int> actions;
  std::vector<double> log_probs;
  std::vector<double> values;
  std::vector<double> rewards;
  std::vector<std::uint8_t> dones;
  double last_value = 0.0;

  std::size_t size() const { return actions.size(); }
};

struct PpoLossParts {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

// Mean PPO loss over a minibatch and, when `grads` is given, its gradient.
template <typename T>
PpoLossParts PpoLoss(const PolicyNet<T>& net, const PolicyInput<T>& in, const std::vector<ActionMask>& masks,
                     const std::vector<int>& actions, const std::vector<double>& old_logp,
                     const std::vector<double>& adv, const std::vector<double>& returns, const PpoConfig& cfg,
                     std::vector<std::vector<T>>* grads) {
  PolicyCache<T> cache;
  std::vector<T> logits, values;
  net.Forward(in, cache, logits, values);
  const int b = in.batch, na = net.num_actions();
  std::vector<T> dlogits(logits.size(), T(0)), dvalues(values.size(), T(0));
  PpoLossParts parts;
  const double inv = 1.0 / b;
  for (int i = 0; i < b; ++i) {
    const T* z = logits.data() + static_cast<std::size_t>(i) * na;
    const std::vector<T> logp = MaskedLogSoftmax(z, masks[i]);
    const int a = actions[i];
    AFFEX_REQUIRE(masks[i][a], "rollout action is masked");
    const double lp = static_cast<double>(logp[a]);
    const double ratio = std::exp(lp - old_logp[i]);
    double dratio = 0.0;
    const double surr = ClippedSurrogate(ratio, adv[i], cfg.clip, &dratio);
    parts.clip_fraction += std::abs(ratio - 1.0) > cfg.clip ? inv : 0.0;
    parts.approx_kl += (old_logp[i] - lp) * inv;
    double h = 0.0;
    for (int j = 0; j < na; ++j)
      if (masks[i][j]) h -= std::exp(static_cast<double>(logp[j])) * static_cast<double>(logp[j]);
    const double v = static_cast<double>(values[i]);
    parts.policy -= surr * inv;
    parts.value += (v - returns[i]) * (v - returns[i]) * inv;
    parts.entropy += h * inv;
    // d(-surr)/dlogp = -dratio * ratio; dlogp_a/dz_j = [j == a] - p_j.
    const double g_lp = -dratio * ratio * inv;
    T* dz = dlogits.data() + static_cast<std::size_t>(i) * na;
    for (int j = 0; j < na; ++j) {
      if (!masks[i][j]) continue;
      const double pj = std::exp(static_cast<double>(logp[j]));
      double g = g_lp * ((j == a ? 1.0 : 0.0) - pj);
      g -= cfg.entropy_coef * inv * (-pj * (static_cast<double>(logp[j]) + h));
      dz[j] = static_cast<T>(g);
    }
    dvalues[i] = static_cast<T>(cfg.value_coef * 2.0 * (v - returns[i]) * inv);
  }
  parts.total = parts.policy + cfg.value_coef * parts.value - cfg.entropy_coef * parts.entropy;
  if (grads) net.Backward(cache, dlogits, dvalues, *grads);
  return parts;
}

template <typename T>
class PolicyOptimizer {
 public:
  PolicyOptimizer() = default;
  PolicyOptimizer(const PolicyNet<T>& net, double lr) {
    nn::AdamWConfig cfg;
    cfg.lr = lr;
    cfg.weight_decay = 0.0;
    for (const auto* b : net.blocks()) opts_.emplace_back(b->num_params(), cfg);
  }
  void Step(PolicyNet<T>& net, std::vector<std::vector<T>>& grads, double max_norm) {
    double sq = 0.0;
    for (const auto& g : grads)
      for (T v : g) sq += static_cast<double>(v) * static_cast<double>(v);
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
      const T s = static_cast<T>(max_norm / norm);
      for (auto& g : grads)
        for (T& v : g) v *= s;
    }
    auto blocks = net.blocks();
    for (std::size_t k = 0; k < blocks.size(); ++k) opts_[k].Step(blocks[k]->params(), grads[k]);
  }
  const std::vector<nn::AdamW<T>>& optimizers() const { return opts_; }
  std::vector<nn::AdamW<T>>& optimizers() { return opts_; }

 private:
  std::vector<nn::AdamW<T>> opts_;
};

struct PpoStats {
  PpoLossParts last;
  int minibatches = 0;
  double mean_return = 0.0;
};

inline void ValidateRollout(const Rollout& r) {
  const auto bad = [](double v) { return !std::isfinite(v); };
  for (std::size_t t = 0; t < r.size(); ++t) {
    if (bad(r.rewards[t]) || bad(r.values[t]) || bad(r.log_probs[t]))
      throw ContractViolation("rollout has a non-finite reward/value/log-prob at step " + std::to_string(t) +
                              " (reward " + std::to_string(r.rewards[t]) + ", value " +
                              std::to_string(r.values[t]) + ", log-prob " + std::to_string(r.log_probs[t]) + ")");
  }
  for (float v : r.images)
    if (!std::isfinite(v)) throw ContractViolation("rollout has a non-finite observation value");
  if (bad(r.last_value)) throw ContractViolation("rollout has a non-finite bootstrap value");
}

// Clipped-surrogate update over one or more rollouts.
template <typename T>
PpoStats PpoUpdate(PolicyNet<T>& net, PolicyOptimizer<T>& opt, const std::vector<const Rollout*>& rollouts,
                   const PpoConfig& cfg, Rng& rng) {
  AFFEX_REQUIRE(!rollouts.empty(), "PPO update needs at least one rollout");
  std::vector<std::pair<const Rollout*, std::size_t>> index;
  std::vector<double> adv_all, ret_all;
  for (const Rollout* r : rollouts) {
    ValidateRollout(*r);
    std::vector<double> adv, ret;
    ComputeGae(r->rewards, r->values, r->dones, r->last_value, cfg.gamma, cfg.lambda, adv, ret);
    for (std::size_t t = 0; t < r->size(); ++t) index.emplace_back(r, t);
    adv_all.insert(adv_all.end(), adv.begin(), adv.end());
    ret_all.insert(ret_all.end(), ret.begin(), ret.end());
  }
  const std::size_t n = index.size();
  PpoStats stats;
  if (n == 0) return stats;
  stats.mean_return = std::accumulate(ret_all.begin(), ret_all.end(), 0.0) / static_cast<double>(n);
  if (cfg.normalize_advantages && n > 1) {
    const double mean = std::accumulate(adv_all.begin(), adv_all.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double a : adv_all) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (double& a : adv_all) a = (a - mean) / (sd + 1e-8);
  }
  const Rollout& first = *rollouts.front();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.Shuffle(order);
    for (std::size_t s = 0; s < n; s += static_cast<std::size_t>(cfg.minibatch)) {
      const std::size_t e = std::min(n, s + static_cast<std::size_t>(cfg.minibatch));
      PolicyInput<T> in;
      in.batch = static_cast<int>(e - s);
      std::vector<ActionMask> masks;
      std::vector<int> actions;
      std::vector<double> old_lp, adv, ret;
      for (std::size_t k = s; k < e; ++k) {
        const auto [r, t] = index[order[k]];
        in.image.insert(in.image.end(), r->images.begin() + static_cast<std::ptrdiff_t>(t * first.image_size),
                        r->images.begin() + static_cast<std::ptrdiff_t>((t + 1) * first.image_size));
        in.flat.insert(in.flat.end(), r->flats.begin() + static_cast<std::ptrdiff_t>(t * first.flat_size),
                       r->flats.begin() + static_cast<std::ptrdiff_t>((t + 1) * first.flat_size));
        masks.push_back(r->masks[t]);
        actions.push_back(r->actions[t]);
        old_lp.push_back(r->log_probs[t]);
        adv.push_back(adv_all[order[k]]);
        ret.push_back(ret_all[order[k]]);
      }
      auto grads = net.ZeroGrads();
      stats.last = PpoLoss(net, in, masks, actions, old_lp, adv, ret, cfg, &grads);
      opt.Step(net, grads, cfg.max_grad_norm);
      ++stats.minibatches;
    }
  }
  return stats;
}

}  // namespace affex
