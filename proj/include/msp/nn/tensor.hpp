#ifndef MSP_NN_TENSOR_HPP_
#define MSP_NN_TENSOR_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "msp/core/error.hpp"

namespace msp::nn {

/// Dense row-major tensor of doubles. Everything differentiable runs in
/// double precision so finite-difference gradient checks resolve cleanly.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0)
      : shape_(std::move(shape)) {
    int64_t n = 1;
    for (int d : shape_) {
      if (d <= 0) throw ArgumentError("Tensor: dimensions must be positive");
      n *= d;
    }
    v_.assign(static_cast<size_t>(n), fill);
  }

  static Tensor scalar(double v) {
    Tensor t(std::vector<int>{1});
    t.v_[0] = v;
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  int64_t numel() const { return static_cast<int64_t>(v_.size()); }
  bool is_scalar() const { return v_.size() == 1; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  double& operator[](int64_t i) { return v_[static_cast<size_t>(i)]; }
  const double& operator[](int64_t i) const {
    return v_[static_cast<size_t>(i)];
  }

  double& at2(int a, int b) { return v_[idx2(a, b)]; }
  const double& at2(int a, int b) const { return v_[idx2(a, b)]; }
  double& at4(int a, int b, int c, int d) { return v_[idx4(a, b, c, d)]; }
  const double& at4(int a, int b, int c, int d) const {
    return v_[idx4(a, b, c, d)];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

 private:
  size_t idx2(int a, int b) const {
    return static_cast<size_t>(a) * shape_[1] + b;
  }
  size_t idx4(int a, int b, int c, int d) const {
    return ((static_cast<size_t>(a) * shape_[1] + b) * shape_[2] + c) *
               shape_[3] +
           d;
  }

  std::vector<int> shape_;
  std::vector<double> v_;
};

}  // namespace msp::nn

#endif  // MSP_NN_TENSOR_HPP_
