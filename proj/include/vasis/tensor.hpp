#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vasis/common.hpp"

namespace vasis {

// All dense activations live in a (batch, channel, height, width) tensor of
// doubles. Double precision is deliberate: the gradient oracles compare
// backprop against central differences at 1e-3..1e-4 relative error, which
// single precision cannot sustain, and desk-scale shapes make the cost moot.
struct Shape {
  int64_t b = 1, c = 1, h = 1, w = 1;

  int64_t count() const { return b * c * h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);

  static Tensor zeros(Shape shape) { return Tensor(shape, 0.0); }
  static Tensor full(Shape shape, double value) { return Tensor(shape, value); }

  const Shape& shape() const { return shape_; }
  int64_t size() const { return static_cast<int64_t>(v_.size()); }
  bool empty() const { return v_.empty(); }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  int64_t index(int64_t b, int64_t c, int64_t h, int64_t w) const {
    return ((b * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  double& at(int64_t b, int64_t c, int64_t h, int64_t w) { return v_[index(b, c, h, w)]; }
  double at(int64_t b, int64_t c, int64_t h, int64_t w) const { return v_[index(b, c, h, w)]; }

  double& operator[](int64_t i) { return v_[i]; }
  double operator[](int64_t i) const { return v_[i]; }

  bool all_finite() const;
  void fill(double value);

 private:
  Shape shape_{};
  std::vector<double> v_;
};

// Mirrors i into [0, n) the way reflection padding does (no edge repeat).
// n == 1 collapses to 0.
inline int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  if (i < 0) i = -i;
  if (i >= n) i = 2 * n - 2 - i;
  if (i < 0) i = 0;
  if (i >= n) i = n - 1;
  return i;
}

}  // namespace vasis
