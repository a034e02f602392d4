#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "affex/core/image.hpp"
#include "affex/nn/mlp.hpp"
#include "affex/predictor/features.hpp"
#include "affex/world/scene.hpp"

namespace affex {

template <typename T>
struct AffordanceModel {
  nn::Mlp<T> net;
  int version = 0;
  double val_score = 0.0;
};

inline std::vector<int> DefaultPredictorDims() { return {kNumPixelFeatures, 32, 16, kNumAffordances}; }

template <typename T = float>
AffordanceModel<T> MakeAffordanceModel(std::uint64_t seed, std::vector<int> dims = DefaultPredictorDims()) {
  AffordanceModel<T> m{nn::Mlp<T>(std::move(dims), nn::Activation::kTanh), 0, 0.0};
  Rng rng(seed);
  m.net.Init(rng);
  return m;
}

template <typename T>
T Sigmoid(T z) {
  return T(1) / (T(1) + std::exp(-z));
}

// Per-pixel probabilities for a feature matrix.
template <typename T>
std::vector<T> PredictFeatures(const AffordanceModel<T>& m, const std::vector<T>& x) {
  const int n = static_cast<int>(x.size() / kNumPixelFeatures);
  std::vector<T> z = m.net.Forward(x.data(), n);
  for (auto& v : z) v = Sigmoid(v);
  return z;
}

// H x W x A probabilities.
template <typename T>
Image<float> Predict(const AffordanceModel<T>& m, const Frame& f, const FeatureConfig& cfg = {}) {
  std::vector<T> x;
  ComputePixelFeatures(f, cfg, x);
  const std::vector<T> p = PredictFeatures(m, x);
  Image<float> out(f.height(), f.width(), m.net.out_dim());
  std::transform(p.begin(), p.end(), out.raw().begin(), [](T v) { return static_cast<float>(v); });
  return out;
}

}  // namespace affex
