#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "affex/core/error.hpp"
#include "affex/labeling/masks.hpp"

namespace affex {

struct LossWeights {
  double bce = 1.0;
  double dice = 1.0;
  double dice_eps = 1.0;
  double clip = 1e-6;
};

// BCE + (1 - Dice) over labelled pixels, averaged over the affordances that
// have at least one label. `probs` and `labels` are n x A row-major. When
// `dprobs` is given it receives dL/dp (zero where p was clipped).
template <typename T>
T AffordanceLoss(std::span<const T> probs, std::span<const std::int8_t> labels, int num_affordances,
                 const LossWeights& w = {}, std::vector<T>* dprobs = nullptr) {
  AFFEX_REQUIRE(probs.size() == labels.size(), "prediction and label sizes differ");
  const std::size_t n = probs.size() / num_affordances;
  const double lo = w.clip, hi = 1.0 - w.clip;
  if (dprobs) dprobs->assign(probs.size(), T(0));
  double total = 0.0;
  int active = 0;
  for (int a = 0; a < num_affordances; ++a) {
    double bce = 0.0, spy = 0.0, sp = 0.0, sy = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::int8_t y = labels[i * num_affordances + a];
      if (y == kLabelUnknown) continue;
      const double p = std::clamp(static_cast<double>(probs[i * num_affordances + a]), lo, hi);
      bce -= y == kLabelPositive ? std::log(p) : std::log(1.0 - p);
      spy += y == kLabelPositive ? p : 0.0;
      sp += p;
      sy += y == kLabelPositive ? 1.0 : 0.0;
      ++count;
    }
    if (count == 0) continue;
    ++active;
    const double num = 2.0 * spy + w.dice_eps;
    const double den = sp + sy + w.dice_eps;
    total += w.bce * bce / static_cast<double>(count) + w.dice * (1.0 - num / den);
    if (!dprobs) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i * num_affordances + a;
      if (labels[j] == kLabelUnknown) continue;
      const double raw = static_cast<double>(probs[j]);
      if (raw < lo || raw > hi) continue;
      const double y = labels[j] == kLabelPositive ? 1.0 : 0.0;
      const double dbce = -(y / raw - (1.0 - y) / (1.0 - raw)) / static_cast<double>(count);
      const double ddice = (2.0 * y * den - num) / (den * den);
      (*dprobs)[j] = static_cast<T>(w.bce * dbce - w.dice * ddice);
    }
  }
  AFFEX_REQUIRE(active > 0, "loss needs at least one labelled pixel");
  if (dprobs)
    for (auto& g : *dprobs) g = static_cast<T>(g / active);
  return static_cast<T>(total / active);
}

}  // namespace affex
