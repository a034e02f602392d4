#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "affex/core/error.hpp"

namespace affex::nn {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

// Adam with decoupled weight decay.
template <typename T>
class AdamW {
 public:
  AdamW() = default;
  AdamW(std::size_t n, const AdamWConfig& cfg = {}) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

  const AdamWConfig& config() const { return cfg_; }
  long steps() const { return t_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }
  void Restore(long t, std::vector<double> m, std::vector<double> v) {
    AFFEX_REQUIRE(m.size() == m_.size() && v.size() == v_.size(), "optimizer state size mismatch");
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
  }

  void Step(std::span<T> params, std::span<const T> grad) {
    AFFEX_REQUIRE(params.size() == m_.size() && grad.size() == m_.size(), "optimizer size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = static_cast<double>(grad[i]);
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
      double p = static_cast<double>(params[i]);
      p -= cfg_.lr * cfg_.weight_decay * p;
      p -= cfg_.lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.eps);
      params[i] = static_cast<T>(p);
    }
  }

 private:
  AdamWConfig cfg_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

}  // namespace affex::nn
