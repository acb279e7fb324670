#include "vasis/tensor.hpp"

#include <sstream>

namespace vasis {

std::string Shape::str() const {
  std::ostringstream oss;
  oss << "(" << b << "," << c << "," << h << "," << w << ")";
  return oss.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape) {
  VASIS_CHECK(shape.b >= 1 && shape.c >= 1 && shape.h >= 1 && shape.w >= 1, validation,
              "tensor dimensions must be >= 1, got " << shape.str());
  v_.assign(static_cast<size_t>(shape.count()), fill);
}

bool Tensor::all_finite() const {
  for (double x : v_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void Tensor::fill(double value) {
  for (double& x : v_) x = value;
}

}  // namespace vasis
