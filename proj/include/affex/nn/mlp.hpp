#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "affex/core/error.hpp"
#include "affex/core/random.hpp"

namespace affex::nn {

enum class Activation { kIdentity, kRelu, kTanh };

inline const char* ActivationName(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
  }
  return "?";
}

// Eigen picks vectorised or scalar kernels per element from the buffer's
// address, and the two round differently. Every buffer Eigen touches is
// allocated with the same alignment so results do not depend on where the
// heap happened to place it.
template <typename T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

// Activations of one batched forward pass, kept for the backward pass.
// acts[0] is the input, acts[l + 1] the output of layer l.
template <typename T>
struct MlpCache {
  int batch = 0;
  std::vector<AlignedVector<T>> acts;
  const AlignedVector<T>& output() const { return acts.back(); }
};

// Fully connected network over a flat parameter vector. Each layer stores an
// in x out weight block followed by out biases.
template <typename T>
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> dims, Activation hidden, Activation output = Activation::kIdentity)
      : dims_(std::move(dims)), hidden_(hidden), output_(output) {
    AFFEX_REQUIRE(dims_.size() >= 2, "an MLP needs at least input and output widths");
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      offsets_.push_back(n);
      n += static_cast<std::size_t>(dims_[l]) * dims_[l + 1] + dims_[l + 1];
    }
    params_.assign(n, T(0));
  }

  const std::vector<int>& dims() const { return dims_; }
  int in_dim() const { return dims_.front(); }
  int out_dim() const { return dims_.back(); }
  int num_layers() const { return static_cast<int>(dims_.size()) - 1; }
  Activation hidden_activation() const { return hidden_; }
  Activation output_activation() const { return output_; }
  std::size_t num_params() const { return params_.size(); }
  AlignedVector<T>& params() { return params_; }
  const AlignedVector<T>& params() const { return params_; }

  // Glorot-uniform weights, zero biases.
  void Init(Rng& rng, double gain = 1.0) {
    for (int l = 0; l < num_layers(); ++l) {
      const int in = dims_[l], out = dims_[l + 1];
      const double a = gain * std::sqrt(6.0 / (in + out));
      T* w = params_.data() + offsets_[l];
      for (int k = 0; k < in * out; ++k) w[k] = static_cast<T>(rng.Uniform(-a, a));
      for (int o = 0; o < out; ++o) w[in * out + o] = T(0);
    }
  }

  void Forward(const T* x, int batch, MlpCache<T>& cache) const {
    cache.batch = batch;
    cache.acts.resize(dims_.size());
    cache.acts[0].assign(x, x + static_cast<std::size_t>(batch) * in_dim());
    for (int l = 0; l < num_layers(); ++l) {
      const int in = dims_[l], out = dims_[l + 1];
      AlignedVector<T>& dst = cache.acts[l + 1];
      dst.resize(static_cast<std::size_t>(batch) * out);
      ConstMat X(cache.acts[l].data(), batch, in);
      ConstMat W(params_.data() + offsets_[l], in, out);
      ConstRow b(params_.data() + offsets_[l] + static_cast<std::size_t>(in) * out, out);
      Mat Y(dst.data(), batch, out);
      Y.noalias() = X * W;
      Y.rowwise() += b;
      Activate(l + 1 == num_layers() ? output_ : hidden_, Y);
    }
  }

  std::vector<T> Forward(const T* x, int batch) const {
    MlpCache<T> c;
    Forward(x, batch, c);
    return std::vector<T>(c.acts.back().begin(), c.acts.back().end());
  }

  // Accumulates dL/dparams into `grad` given dL/doutput (post-activation).
  // Writes dL/dinput when `dinput` is non-null.
  void Backward(const MlpCache<T>& cache, const T* dout, T* grad, T* dinput = nullptr) const {
    const int batch = cache.batch;
    AlignedVector<T> delta(dout, dout + static_cast<std::size_t>(batch) * out_dim());
    AlignedVector<T> prev, gw;
    for (int l = num_layers() - 1; l >= 0; --l) {
      const int in = dims_[l], out = dims_[l + 1];
      Mat D(delta.data(), batch, out);
      ConstMat Y(cache.acts[l + 1].data(), batch, out);
      ScaleByDerivative(l + 1 == num_layers() ? output_ : hidden_, Y, D);
      ConstMat X(cache.acts[l].data(), batch, in);
      // The caller's gradient buffer has arbitrary alignment: form the
      // product in scratch and add it element by element.
      gw.resize(static_cast<std::size_t>(in) * out);
      Mat GW(gw.data(), in, out);
      GW.noalias() = X.transpose() * D;
      T* g = grad + offsets_[l];
      for (std::size_t k = 0; k < gw.size(); ++k) g[k] += gw[k];
      g += gw.size();
      for (int o = 0; o < out; ++o) {
        T sum = T(0);
        for (int i = 0; i < batch; ++i) sum += D(i, o);
        g[o] += sum;
      }
      if (l == 0 && dinput == nullptr) break;
      prev.resize(static_cast<std::size_t>(batch) * in);
      ConstMat W(params_.data() + offsets_[l], in, out);
      Mat P(prev.data(), batch, in);
      P.noalias() = D * W.transpose();
      delta.swap(prev);
    }
    if (dinput != nullptr) std::copy(delta.begin(), delta.end(), dinput);
  }

 private:
  using Mat = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMat = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using Row = Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>;
  using ConstRow = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>;

  static void Activate(Activation a, Mat& y) {
    switch (a) {
      case Activation::kIdentity: return;
      case Activation::kRelu: y = y.cwiseMax(T(0)); return;
      case Activation::kTanh: y = y.array().tanh().matrix(); return;
    }
  }
  // Derivative expressed through the activation output.
  static void ScaleByDerivative(Activation a, const ConstMat& y, Mat& d) {
    switch (a) {
      case Activation::kIdentity: return;
      case Activation::kRelu: d = (y.array() > T(0)).select(d.array(), T(0)).matrix(); return;
      case Activation::kTanh: d.array() *= (T(1) - y.array().square()); return;
    }
  }

  std::vector<int> dims_;
  Activation hidden_ = Activation::kTanh;
  Activation output_ = Activation::kIdentity;
  std::vector<std::size_t> offsets_;
  AlignedVector<T> params_;
};

}  // namespace affex::nn
