#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace affex {

// Dense row-major image with interleaved channels.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels = 1, T fill = T{})
      : height_(height), width_(width), channels_(channels),
        data_(static_cast<std::size_t>(height) * width * channels, fill) {}

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }

  T& operator()(int r, int c, int ch = 0) { return data_[Index(r, c, ch)]; }
  const T& operator()(int r, int c, int ch = 0) const { return data_[Index(r, c, ch)]; }

  T& at_pixel(std::size_t p, int ch = 0) { return data_[p * channels_ + ch]; }
  const T& at_pixel(std::size_t p, int ch = 0) const { return data_[p * channels_ + ch]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  bool SameShape(const Image& o) const {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }
  template <typename U>
  bool SameDims(const Image<U>& o) const {
    return height_ == o.height() && width_ == o.width();
  }

  bool operator==(const Image&) const = default;

 private:
  std::size_t Index(int r, int c, int ch) const {
    assert(r >= 0 && r < height_ && c >= 0 && c < width_ && ch >= 0 && ch < channels_);
    return (static_cast<std::size_t>(r) * width_ + c) * channels_ + ch;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

// Block average over factor x factor cells. Dimensions must divide evenly.
template <typename T>
Image<float> AveragePool(const Image<T>& in, int factor) {
  const int h = in.height() / factor;
  const int w = in.width() / factor;
  Image<float> out(h, w, in.channels());
  const float norm = 1.0f / static_cast<float>(factor * factor);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int ch = 0; ch < in.channels(); ++ch) {
        float acc = 0.0f;
        for (int dr = 0; dr < factor; ++dr)
          for (int dc = 0; dc < factor; ++dc)
            acc += static_cast<float>(in(r * factor + dr, c * factor + dc, ch));
        out(r, c, ch) = acc * norm;
      }
  return out;
}

}  // namespace affex
