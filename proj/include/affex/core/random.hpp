#pragma once

#include <cmath>
#include <cstdint>
#include <bit>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace affex {

// SplitMix64 finaliser, used to derive independent stream seeds.
constexpr std::uint64_t MixSeed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t MixSeed(std::uint64_t a, std::uint64_t b) {
  return MixSeed(a ^ MixSeed(b + 0x632be59bd9b4e019ULL));
}

// Mersenne twister with distribution code written out so that sequences are
// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(MixSeed(seed)) {}

  std::uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1).
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t Index(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }
  int Int(int lo, int hi_inclusive) {
    return lo + static_cast<int>(Index(static_cast<std::uint64_t>(hi_inclusive - lo + 1)));
  }

  double Normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = Uniform();
    while (u1 <= 0.0) u1 = Uniform();
    const double u2 = Uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename T>
  void Shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[Index(i)]);
  }

  // Samples an index proportional to non-negative weights.
  template <typename Container>
  std::size_t Categorical(const Container& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = Uniform() * total;
    std::size_t last = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      last = i;
      if (u < weights[i]) return i;
      u -= weights[i];
    }
    return last;
  }

  // Full generator state as text, for checkpoints.
  std::string SaveState() const {
    std::ostringstream out;
    out << engine_ << ' ' << has_spare_ << ' ' << std::bit_cast<std::uint64_t>(spare_);
    return out.str();
  }
  bool LoadState(const std::string& text) {
    std::istringstream in(text);
    std::uint64_t bits = 0;
    in >> engine_ >> has_spare_ >> bits;
    spare_ = std::bit_cast<double>(bits);
    return !in.fail();
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace affex
