#ifndef MSP_CORE_IMAGE_HPP_
#define MSP_CORE_IMAGE_HPP_

#include <array>
#include <cmath>
#include <vector>

#include "msp/core/error.hpp"
#include "msp/core/grid.hpp"

namespace msp {

/// RGB color in [0,1] per channel.
using Rgb = std::array<float, 3>;

/// Planar RGB image, channels-first (c, y, x), values in [0,1].
class Image {
 public:
  Image() = default;
  Image(int height, int width, Rgb fill = {0.f, 0.f, 0.f})
      : h_(height), w_(width) {
    if (height <= 0 || width <= 0) {
      throw ArgumentError("Image: dimensions must be positive");
    }
    data_.resize(static_cast<size_t>(3) * height * width);
    for (int c = 0; c < 3; ++c) {
      std::fill(data_.begin() + plane(c), data_.begin() + plane(c + 1),
                fill[static_cast<size_t>(c)]);
    }
  }

  int height() const { return h_; }
  int width() const { return w_; }
  size_t pixels() const { return static_cast<size_t>(h_) * w_; }

  float& at(int c, int y, int x) {
    return data_[plane(c) + static_cast<size_t>(y) * w_ + x];
  }
  const float& at(int c, int y, int x) const {
    return data_[plane(c) + static_cast<size_t>(y) * w_ + x];
  }

  Rgb pixel(int y, int x) const {
    return {at(0, y, x), at(1, y, x), at(2, y, x)};
  }
  void set_pixel(int y, int x, const Rgb& v) {
    at(0, y, x) = v[0];
    at(1, y, x) = v[1];
    at(2, y, x) = v[2];
  }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  bool same_shape(const Image& other) const {
    return h_ == other.h_ && w_ == other.w_;
  }
  bool same_shape(int height, int width) const {
    return h_ == height && w_ == width;
  }

  bool operator==(const Image& other) const {
    return h_ == other.h_ && w_ == other.w_ && data_ == other.data_;
  }

  /// Snaps every channel value to the nearest 1/255 step. Images that went
  /// through this are exactly representable as 8-bit PNG, so disk round-trips
  /// are lossless.
  void quantize_to_8bit() {
    for (float& v : data_) {
      float c = std::min(1.f, std::max(0.f, v));
      v = std::round(c * 255.f) / 255.f;
    }
  }

 private:
  size_t plane(int c) const { return static_cast<size_t>(c) * h_ * w_; }

  int h_ = 0;
  int w_ = 0;
  std::vector<float> data_;
};

}  // namespace msp

#endif  // MSP_CORE_IMAGE_HPP_
