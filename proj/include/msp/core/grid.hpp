#ifndef MSP_CORE_GRID_HPP_
#define MSP_CORE_GRID_HPP_

#include <cstdint>
#include <vector>

#include "msp/core/error.hpp"

namespace msp {

/// Dense H x W grid with row-major storage. The workhorse for label maps,
/// binary masks and soft (fractional) masks.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T{}) : h_(height), w_(width) {
    if (height <= 0 || width <= 0) {
      throw ArgumentError("Grid: dimensions must be positive");
    }
    data_.assign(static_cast<size_t>(height) * width, fill);
  }

  int height() const { return h_; }
  int width() const { return w_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& at(int y, int x) { return data_[static_cast<size_t>(y) * w_ + x]; }
  const T& at(int y, int x) const {
    return data_[static_cast<size_t>(y) * w_ + x];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  bool same_shape(const Grid& other) const {
    return h_ == other.h_ && w_ == other.w_;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Grid& other) const {
    return h_ == other.h_ && w_ == other.w_ && data_ == other.data_;
  }

 private:
  int h_ = 0;
  int w_ = 0;
  std::vector<T> data_;
};

using MaskGrid = Grid<uint8_t>;   // values in {0,1}
using LabelGrid = Grid<uint8_t>;  // semantic label ids
using SoftGrid = Grid<float>;     // values in [0,1]

}  // namespace msp

#endif  // MSP_CORE_GRID_HPP_
