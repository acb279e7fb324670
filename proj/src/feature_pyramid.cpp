#include "vasis/feature_pyramid.hpp"

#include <cmath>

#include "vasis/rng.hpp"

namespace vasis {

ConvPyramid::ConvPyramid(int64_t in_channels, std::vector<int64_t> channels, uint64_t seed)
    : channels_(std::move(channels)), seed_(seed) {
  VASIS_CHECK(!channels_.empty(), validation, "pyramid needs at least one stage");
  RngStream rng(seed, 0xfeedu);
  int64_t cin = in_channels;
  for (size_t i = 0; i < channels_.size(); ++i) {
    int64_t cout = channels_[i];
    Tensor w(Shape{cout, cin, 3, 3});
    // He-style scale keeps activations in a sane range through the stack.
    rng.fill_normal(w, 0.0, std::sqrt(2.0 / static_cast<double>(cin * 9)));
    Tensor b(Shape{1, cout, 1, 1});
    ws_.push_back(Var::leaf(std::move(w)));
    bs_.push_back(Var::leaf(std::move(b)));
    cin = cout;
  }
}

std::vector<Var> ConvPyramid::stages(const Var& x) const {
  std::vector<Var> out;
  Var h = x;
  for (size_t i = 0; i < ws_.size(); ++i) {
    h = leaky_relu(conv2d(h, ws_[i], bs_[i], ConvOpts{2, 1, PaddingMode::zero}), 0.2);
    out.push_back(h);
  }
  return out;
}

std::vector<double> ConvPyramid::embed(const Tensor& image) const {
  std::vector<Var> feats = stages(Var::leaf(image));
  const Tensor& last = feats.back().value();
  const Shape s = last.shape();
  VASIS_CHECK(s.b == 1, validation, "embed expects a single image, got batch " << s.b);
  std::vector<double> v(static_cast<size_t>(s.c), 0.0);
  const double inv = 1.0 / static_cast<double>(s.h * s.w);
  for (int64_t c = 0; c < s.c; ++c) {
    double acc = 0.0;
    for (int64_t h = 0; h < s.h; ++h)
      for (int64_t w = 0; w < s.w; ++w) acc += last.at(0, c, h, w);
    v[static_cast<size_t>(c)] = acc * inv;
  }
  return v;
}

}  // namespace vasis
