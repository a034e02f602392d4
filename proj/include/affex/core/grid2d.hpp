#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "affex/core/geometry.hpp"

namespace affex {

// Top-down raster. Row 0 is the northern (max y) edge and columns grow with
// x, so an agent with yaw 0 faces "up" in the image.
struct Grid2D {
  double resolution = 0.05;
  double origin_x = 0.0;  // world x of the west edge of column 0
  double origin_y = 0.0;  // world y of the south edge of the last row
  int rows = 0;
  int cols = 0;
  std::vector<float> cells;

  Grid2D() = default;
  Grid2D(int rows_, int cols_, double res, double ox = 0.0, double oy = 0.0)
      : resolution(res), origin_x(ox), origin_y(oy), rows(rows_), cols(cols_),
        cells(static_cast<std::size_t>(rows_) * cols_, 0.0f) {}

  float& at(int r, int c) { return cells[static_cast<std::size_t>(r) * cols + c]; }
  float at(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c]; }
  bool InBounds(int r, int c) const { return r >= 0 && r < rows && c >= 0 && c < cols; }

  int ColOf(double x) const { return static_cast<int>(std::floor((x - origin_x) / resolution)); }
  int RowOf(double y) const {
    return rows - 1 - static_cast<int>(std::floor((y - origin_y) / resolution));
  }
  // Value at a world point; zero outside the grid.
  float Sample(double x, double y) const {
    const int r = RowOf(y);
    const int c = ColOf(x);
    return InBounds(r, c) ? at(r, c) : 0.0f;
  }
  std::size_t CountNonZero() const {
    std::size_t n = 0;
    for (float v : cells) n += v != 0.0f;
    return n;
  }
  bool operator==(const Grid2D&) const = default;
};

// Max over factor x factor blocks.
inline Grid2D MaxPool(const Grid2D& in, int factor) {
  Grid2D out(in.rows / factor, in.cols / factor, in.resolution * factor, in.origin_x, in.origin_y);
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) {
      float m = 0.0f;
      for (int dr = 0; dr < factor; ++dr)
        for (int dc = 0; dc < factor; ++dc) m = std::max(m, in.at(r * factor + dr, c * factor + dc));
      out.at(r, c) = m;
    }
  return out;
}

}  // namespace affex
