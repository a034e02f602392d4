#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "affex/core/error.hpp"
#include "affex/core/random.hpp"
#include "affex/nn/adamw.hpp"
#include "affex/nn/mlp.hpp"

namespace affex {

struct PolicyNetConfig {
  int channels = 15;      // image-like input planes
  int grid = 16;          // each plane is grid x grid
  int patch = 4;          // encoder patch side (and stride)
  int filters = 4;        // encoder outputs per patch
  int flat_dim = 161;
  int flat_hidden = 32;
  int num_actions = 30;
  std::vector<int> head_hidden = {64, 32};
};

// Batched network inputs: `image` is batch x channels x grid x grid, `flat`
// batch x flat_dim.
template <typename T>
struct PolicyInput {
  int batch = 0;
  std::vector<T> image;
  std::vector<T> flat;
};

template <typename T>
struct PolicyCache {
  std::vector<nn::MlpCache<T>> encoders;
  nn::MlpCache<T> flat;
  nn::MlpCache<T> actor;
  nn::MlpCache<T> critic;
  std::vector<T> embedding;
};

// Per-plane patch encoders (a stride-`patch` convolution with its own
// weights for every plane), a flat-input MLP, and separate actor and critic
// heads on the concatenated embedding.
template <typename T>
class PolicyNet {
 public:
  PolicyNet() = default;
  explicit PolicyNet(const PolicyNetConfig& cfg) : cfg_(cfg) {
    AFFEX_REQUIRE(cfg.grid % cfg.patch == 0, "grid must be a multiple of the patch size");
    for (int c = 0; c < cfg.channels; ++c)
      encoders_.emplace_back(std::vector<int>{cfg.patch * cfg.patch, cfg.filters}, nn::Activation::kTanh,
                             nn::Activation::kTanh);
    flat_ = nn::Mlp<T>({cfg.flat_dim, cfg.flat_hidden}, nn::Activation::kTanh, nn::Activation::kTanh);
    std::vector<int> a = {embedding_dim()}, v = {embedding_dim()};
    for (int h : cfg.head_hidden) {
      a.push_back(h);
      v.push_back(h);
    }
    a.push_back(cfg.num_actions);
    v.push_back(1);
    actor_ = nn::Mlp<T>(a, nn::Activation::kTanh);
    critic_ = nn::Mlp<T>(v, nn::Activation::kTanh);
  }

  const PolicyNetConfig& config() const { return cfg_; }
  int patches_per_plane() const { return (cfg_.grid / cfg_.patch) * (cfg_.grid / cfg_.patch); }
  int embedding_dim() const { return cfg_.channels * patches_per_plane() * cfg_.filters + cfg_.flat_hidden; }
  int num_actions() const { return cfg_.num_actions; }

  // Every parameter block, in a fixed order.
  std::vector<nn::Mlp<T>*> blocks() {
    std::vector<nn::Mlp<T>*> out;
    for (auto& e : encoders_) out.push_back(&e);
    out.push_back(&flat_);
    out.push_back(&actor_);
    out.push_back(&critic_);
    return out;
  }
  std::vector<const nn::Mlp<T>*> blocks() const {
    std::vector<const nn::Mlp<T>*> out;
    for (const auto& e : encoders_) out.push_back(&e);
    out.push_back(&flat_);
    out.push_back(&actor_);
    out.push_back(&critic_);
    return out;
  }
  std::size_t num_params() const {
    std::size_t n = 0;
    for (const auto* b : blocks()) n += b->num_params();
    return n;
  }

  void Init(Rng& rng) {
    for (auto* b : blocks()) b->Init(rng);
    // Small final actor layer keeps the initial policy close to uniform.
    auto& p = actor_.params();
    const int last_in = cfg_.head_hidden.empty() ? embedding_dim() : cfg_.head_hidden.back();
    const std::size_t start = p.size() - static_cast<std::size_t>(last_in + 1) * cfg_.num_actions;
    for (std::size_t i = start; i < p.size(); ++i) p[i] *= T(0.01);
  }

  // Outputs logits (batch x num_actions) and values (batch).
  void Forward(const PolicyInput<T>& in, PolicyCache<T>& cache, std::vector<T>& logits, std::vector<T>& values) const {
    const int b = in.batch, g = cfg_.grid, k = cfg_.patch, pp = patches_per_plane(), f = cfg_.filters;
    const int e = embedding_dim();
    AFFEX_REQUIRE(in.image.size() == static_cast<std::size_t>(b) * cfg_.channels * g * g, "image input size mismatch");
    AFFEX_REQUIRE(in.flat.size() == static_cast<std::size_t>(b) * cfg_.flat_dim, "flat input size mismatch");
    cache.embedding.assign(static_cast<std::size_t>(b) * e, T(0));
    cache.encoders.resize(static_cast<std::size_t>(cfg_.channels));
    std::vector<T> patches(static_cast<std::size_t>(b) * pp * k * k);
    const int per_row = g / k;
    for (int c = 0; c < cfg_.channels; ++c) {
      for (int i = 0; i < b; ++i) {
        const T* plane = in.image.data() + (static_cast<std::size_t>(i) * cfg_.channels + c) * g * g;
        for (int q = 0; q < pp; ++q) {
          T* dst = patches.data() + (static_cast<std::size_t>(i) * pp + q) * k * k;
          const int r0 = (q / per_row) * k, c0 = (q % per_row) * k;
          for (int dr = 0; dr < k; ++dr)
            for (int dc = 0; dc < k; ++dc) dst[dr * k + dc] = plane[(r0 + dr) * g + c0 + dc];
        }
      }
      encoders_[c].Forward(patches.data(), b * pp, cache.encoders[c]);
      const auto& out = cache.encoders[c].output();
      for (int i = 0; i < b; ++i)
        std::copy(out.begin() + static_cast<std::ptrdiff_t>(i) * pp * f,
                  out.begin() + static_cast<std::ptrdiff_t>(i + 1) * pp * f,
                  cache.embedding.begin() + static_cast<std::ptrdiff_t>(i) * e + c * pp * f);
    }
    flat_.Forward(in.flat.data(), b, cache.flat);
    const int off = cfg_.channels * pp * f;
    for (int i = 0; i < b; ++i)
      std::copy(cache.flat.output().begin() + static_cast<std::ptrdiff_t>(i) * cfg_.flat_hidden,
                cache.flat.output().begin() + static_cast<std::ptrdiff_t>(i + 1) * cfg_.flat_hidden,
                cache.embedding.begin() + static_cast<std::ptrdiff_t>(i) * e + off);
    actor_.Forward(cache.embedding.data(), b, cache.actor);
    critic_.Forward(cache.embedding.data(), b, cache.critic);
    logits.assign(cache.actor.output().begin(), cache.actor.output().end());
    values.assign(cache.critic.output().begin(), cache.critic.output().end());
  }

  // Accumulates parameter gradients for dL/dlogits and dL/dvalues. `grads`
  // is laid out like blocks().
  void Backward(const PolicyCache<T>& cache, const std::vector<T>& dlogits, const std::vector<T>& dvalues,
                std::vector<std::vector<T>>& grads) const {
    const int b = cache.actor.batch, pp = patches_per_plane(), f = cfg_.filters, e = embedding_dim();
    const std::size_t nenc = encoders_.size();
    std::vector<T> de_a(static_cast<std::size_t>(b) * e), de_c(static_cast<std::size_t>(b) * e);
    actor_.Backward(cache.actor, dlogits.data(), grads[nenc + 1].data(), de_a.data());
    critic_.Backward(cache.critic, dvalues.data(), grads[nenc + 2].data(), de_c.data());
    for (std::size_t j = 0; j < de_a.size(); ++j) de_a[j] += de_c[j];
    std::vector<T> part;
    for (std::size_t c = 0; c < nenc; ++c) {
      part.resize(static_cast<std::size_t>(b) * pp * f);
      for (int i = 0; i < b; ++i)
        std::copy(de_a.begin() + static_cast<std::ptrdiff_t>(i) * e + static_cast<std::ptrdiff_t>(c) * pp * f,
                  de_a.begin() + static_cast<std::ptrdiff_t>(i) * e + static_cast<std::ptrdiff_t>(c + 1) * pp * f,
                  part.begin() + static_cast<std::ptrdiff_t>(i) * pp * f);
      encoders_[c].Backward(cache.encoders[c], part.data(), grads[c].data());
    }
    const int off = static_cast<int>(nenc) * pp * f;
    part.resize(static_cast<std::size_t>(b) * cfg_.flat_hidden);
    for (int i = 0; i < b; ++i)
      std::copy(de_a.begin() + static_cast<std::ptrdiff_t>(i) * e + off,
                de_a.begin() + static_cast<std::ptrdiff_t>(i + 1) * e,
                part.begin() + static_cast<std::ptrdiff_t>(i) * cfg_.flat_hidden);
    flat_.Backward(cache.flat, part.data(), grads[nenc].data());
  }

  std::vector<std::vector<T>> ZeroGrads() const {
    std::vector<std::vector<T>> g;
    for (const auto* b : blocks()) g.emplace_back(b->num_params(), T(0));
    return g;
  }

 private:
  PolicyNetConfig cfg_;
  std::vector<nn::Mlp<T>> encoders_;
  nn::Mlp<T> flat_;
  nn::Mlp<T> actor_;
  nn::Mlp<T> critic_;
};

}  // namespace affex
