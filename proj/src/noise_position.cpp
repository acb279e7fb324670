#include "vasis/noise_position.hpp"

#include <cmath>

namespace vasis {

SemanticNoiseParams::SemanticNoiseParams(ClassParamBank scale, ClassParamBank shift)
    : n1(std::move(scale)), n2(std::move(shift)) {
  VASIS_CHECK(n1.table.shape() == n2.table.shape(), validation,
              "noise banks must share shape, got " << n1.table.shape().str() << " vs "
                                                   << n2.table.shape().str());
}

SemanticNoiseParams::SemanticNoiseParams(ParamStore& store, const std::string& prefix,
                                         int64_t rows, int64_t cols, double n1_mean,
                                         double n1_stddev, double n2_mean, double n2_stddev)
    : n1(store, prefix + ".n1", rows, cols, n1_mean, n1_stddev),
      n2(store, prefix + ".n2", rows, cols, n2_mean, n2_stddev) {}

Var sample_semantic_noise_vars(const LabelMap& labels, const SemanticNoiseParams& params,
                               const Tensor& z) {
  Var scale = guided_sample_vars(labels, params.n1);
  Var shift = guided_sample_vars(labels, params.n2);
  VASIS_CHECK(z.shape() == scale.shape(), validation,
              "noise tensor shape " << z.shape().str() << " != sampled bank shape "
                                    << scale.shape().str());
  return add(mul(Var::leaf(z), scale), shift);
}

Tensor sample_semantic_noise(const SemanticLayout& layout, const SemanticNoiseParams& params,
                             RngStream& rng) {
  VASIS_CHECK(params.n1.rows() == layout.num_classes(), validation,
              "noise bank rows " << params.n1.rows() << " != layout classes "
                                 << layout.num_classes());
  Tensor z(Shape{layout.batch(), params.n1.cols(), layout.height(), layout.width()});
  rng.fill_normal(z);
  return sample_semantic_noise_vars(layout.argmax(), params, z).value();
}

PositionCode absolute_code(int64_t h, int64_t w) {
  VASIS_CHECK(h >= 1 && w >= 1, validation, "absolute_code needs h, w >= 1");
  Tensor data(Shape{1, 2, h, w});
  for (int64_t j = 0; j < h; ++j) {
    double rv = (h == 1) ? 0.0 : 2.0 * static_cast<double>(j) / static_cast<double>(h - 1) - 1.0;
    for (int64_t k = 0; k < w; ++k) data.at(0, 0, j, k) = rv;
  }
  for (int64_t k = 0; k < w; ++k) {
    double cv = (w == 1) ? 0.0 : 2.0 * static_cast<double>(k) / static_cast<double>(w - 1) - 1.0;
    for (int64_t j = 0; j < h; ++j) data.at(0, 1, j, k) = cv;
  }
  return PositionCode{PositionKind::absolute, Var::leaf(std::move(data))};
}

PositionCode relative_code(const SemanticLayout& layout) {
  const int64_t B = layout.batch(), N = layout.num_classes();
  const int64_t H = layout.height(), W = layout.width();
  Tensor data(Shape{B, 2, H, W});
  LabelMap labels = layout.argmax();
  std::vector<double> sum_r(N), sum_c(N), cnt(N), max_r(N), max_c(N);
  for (int64_t b = 0; b < B; ++b) {
    std::fill(sum_r.begin(), sum_r.end(), 0.0);
    std::fill(sum_c.begin(), sum_c.end(), 0.0);
    std::fill(cnt.begin(), cnt.end(), 0.0);
    for (int64_t h = 0; h < H; ++h)
      for (int64_t w = 0; w < W; ++w) {
        int32_t c = labels.at(b, h, w);
        sum_r[c] += static_cast<double>(h);
        sum_c[c] += static_cast<double>(w);
        cnt[c] += 1.0;
      }
    std::fill(max_r.begin(), max_r.end(), 0.0);
    std::fill(max_c.begin(), max_c.end(), 0.0);
    for (int64_t h = 0; h < H; ++h)
      for (int64_t w = 0; w < W; ++w) {
        int32_t c = labels.at(b, h, w);
        max_r[c] = std::max(max_r[c], std::abs(static_cast<double>(h) - sum_r[c] / cnt[c]));
        max_c[c] = std::max(max_c[c], std::abs(static_cast<double>(w) - sum_c[c] / cnt[c]));
      }
    for (int64_t h = 0; h < H; ++h)
      for (int64_t w = 0; w < W; ++w) {
        int32_t c = labels.at(b, h, w);
        double dr = static_cast<double>(h) - sum_r[c] / cnt[c];
        double dc = static_cast<double>(w) - sum_c[c] / cnt[c];
        data.at(b, 0, h, w) = (max_r[c] > 0.0) ? dr / max_r[c] : 0.0;
        data.at(b, 1, h, w) = (max_c[c] > 0.0) ? dc / max_c[c] : 0.0;
      }
  }
  return PositionCode{PositionKind::relative, Var::leaf(std::move(data))};
}

PositionCode learnable_code_init(int64_t h, int64_t w, RngStream& rng) {
  VASIS_CHECK(h >= 1 && w >= 1, validation, "learnable code needs h, w >= 1");
  Tensor data(Shape{1, 2, h, w});
  rng.fill_normal(data, 0.0, 0.02);
  return PositionCode{PositionKind::learnable, Var::leaf(std::move(data), /*requires_grad=*/true)};
}

PositionCode make_learnable_code(ParamStore& store, const std::string& name, int64_t h,
                                 int64_t w) {
  return PositionCode{PositionKind::learnable, store.create(name, Shape{1, 2, h, w}, 0.0, 0.02)};
}

PositionProjectionParams::PositionProjectionParams(ParamStore& store, const std::string& prefix,
                                                   int64_t out_channels, int64_t kernel_size,
                                                   PaddingMode padding, double bias_init)
    : out_channels(out_channels), kernel_size(kernel_size), padding(padding) {
  w = store.create(prefix + ".w", Shape{out_channels, 2, kernel_size, kernel_size}, 0.0, 0.02);
  b = store.create_constant(prefix + ".b", Shape{1, out_channels, 1, 1}, bias_init);
}

Var project_code_vars(const PositionCode& code, const PositionProjectionParams& params) {
  VASIS_CHECK(code.data.defined(), validation, "project_code on an empty position code");
  VASIS_CHECK(code.data.shape().c == 2, validation,
              "position code must have 2 channels, got " << code.data.shape().str());
  return conv2d(code.data, params.w, params.b, params.conv_opts());
}

Tensor project_code(const PositionCode& code, const PositionProjectionParams& params) {
  return project_code_vars(code, params).value();
}

bool monotonicity_check(const PositionCode& code, PositionAxis axis) {
  const Tensor& d = code.data.value();
  const Shape s = d.shape();
  const int64_t ch = (axis == PositionAxis::row) ? 0 : 1;
  bool nondecreasing = true, nonincreasing = true;
  for (int64_t b = 0; b < s.b; ++b) {
    if (axis == PositionAxis::row) {
      for (int64_t w = 0; w < s.w; ++w)
        for (int64_t h = 1; h < s.h; ++h) {
          double diff = d.at(b, ch, h, w) - d.at(b, ch, h - 1, w);
          if (diff > 0.0) nonincreasing = false;
          if (diff < 0.0) nondecreasing = false;
        }
    } else {
      for (int64_t h = 0; h < s.h; ++h)
        for (int64_t w = 1; w < s.w; ++w) {
          double diff = d.at(b, ch, h, w) - d.at(b, ch, h, w - 1);
          if (diff > 0.0) nonincreasing = false;
          if (diff < 0.0) nondecreasing = false;
        }
    }
  }
  return nondecreasing || nonincreasing;
}

}  // namespace vasis
