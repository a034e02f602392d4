#pragma once

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "affex/core/image.hpp"
#include "affex/world/frame.hpp"
#include "affex/world/sim.hpp"

namespace affex {

struct TargetConfig {
  double center_fraction = 0.5;  // side of the central region, as a fraction of the image
  double confidence_floor = 0.05;
};

// An object seen inside the central region of a frame.
struct TargetCandidate {
  int id = 0;
  int area = 0;  // pixels inside the central region
  int cell = 0;
  double row = 0.0, col = 0.0;  // pixel centroid
  std::array<double, kNumAffordances> mean_prob{};
  int anchor_row = 0, anchor_col = 0;  // instance pixel closest to the centroid
};

struct CellTargets {
  std::vector<TargetCandidate> candidates;
  std::array<std::array<std::optional<int>, Action::kCells>, kNumAffordances> target{};

  const TargetCandidate* Find(int id) const {
    for (const auto& c : candidates)
      if (c.id == id) return &c;
    return nullptr;
  }
};

struct CentralRegion {
  double r0, c0, h, w;
  static CentralRegion Of(const Frame& f, double fraction) {
    const double h = f.height() * fraction, w = f.width() * fraction;
    return {0.5 * (f.height() - h), 0.5 * (f.width() - w), h, w};
  }
  bool Contains(int r, int c) const { return r + 0.5 >= r0 && r + 0.5 < r0 + h && c + 0.5 >= c0 && c + 0.5 < c0 + w; }
  // Cell whose centre is nearest the given pixel coordinate (centre-based).
  int NearestCell(double r, double c) const {
    int best = 0;
    double best_d = 1e300;
    for (int k = 0; k < Action::kCells; ++k) {
      const double cr = r0 + (k / 3 + 0.5) * h / 3.0, cc = c0 + (k % 3 + 0.5) * w / 3.0;
      const double d = (r + 0.5 - cr) * (r + 0.5 - cr) + (c + 0.5 - cc) * (c + 0.5 - cc);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return best;
  }
};

// Collects every object (id > 0) with pixels in the central region, assigns
// it to the cell nearest its centroid, and picks per cell and affordance the
// largest candidate whose mean prediction reaches the confidence floor.
// `predictions` may be empty, in which case nothing is filtered.
inline CellTargets ResolveTargets(const Frame& f, const Image<float>& predictions, const TargetConfig& cfg) {
  const CentralRegion region = CentralRegion::Of(f, cfg.center_fraction);
  std::map<int, TargetCandidate> acc;
  for (int r = 0; r < f.height(); ++r)
    for (int c = 0; c < f.width(); ++c) {
      const int id = f.instance_ids(r, c);
      if (id <= 0 || !region.Contains(r, c)) continue;
      TargetCandidate& t = acc[id];
      t.id = id;
      ++t.area;
      t.row += r;
      t.col += c;
      if (!predictions.empty())
        for (int a = 0; a < kNumAffordances; ++a) t.mean_prob[a] += predictions(r, c, a);
    }
  CellTargets out;
  for (auto& [id, t] : acc) {
    t.row /= t.area;
    t.col /= t.area;
    for (int a = 0; a < kNumAffordances; ++a) t.mean_prob[a] = predictions.empty() ? 1.0 : t.mean_prob[a] / t.area;
    t.cell = region.NearestCell(t.row, t.col);
    out.candidates.push_back(t);
  }
  // Anchor pixel for the interaction point.
  std::vector<double> best(out.candidates.size(), 1e300);
  for (int r = 0; r < f.height(); ++r)
    for (int c = 0; c < f.width(); ++c) {
      const int id = f.instance_ids(r, c);
      if (id <= 0 || !region.Contains(r, c)) continue;
      for (std::size_t k = 0; k < out.candidates.size(); ++k) {
        auto& t = out.candidates[k];
        if (t.id != id) continue;
        const double d = (r - t.row) * (r - t.row) + (c - t.col) * (c - t.col);
        if (d < best[k]) {
          best[k] = d;
          t.anchor_row = r;
          t.anchor_col = c;
        }
      }
    }
  for (int a = 0; a < kNumAffordances; ++a) {
    std::array<int, Action::kCells> area{};
    for (const auto& t : out.candidates) {
      if (t.mean_prob[a] < cfg.confidence_floor) continue;
      if (t.area > area[t.cell]) {
        area[t.cell] = t.area;
        out.target[a][t.cell] = t.id;
      }
    }
  }
  return out;
}

inline std::optional<int> SelectTarget(const Frame& f, const Image<float>& predictions, int cell, Affordance a,
                                       const TargetConfig& cfg = {}) {
  AFFEX_REQUIRE(cell >= 0 && cell < Action::kCells, "cell index out of range");
  return ResolveTargets(f, predictions, cfg).target[static_cast<int>(a)][cell];
}

}  // namespace affex
