#pragma once

#include <string>

#include "vasis/modulation.hpp"

namespace vasis {

// Learnable per-class scale and shift for the noise path: gamma_n is a
// standard-normal draw scaled by a row of n1 and shifted by a row of n2,
// both selected per pixel by guided sampling.
struct SemanticNoiseParams {
  ClassParamBank n1;  // per-class scale
  ClassParamBank n2;  // per-class shift

  SemanticNoiseParams() = default;
  SemanticNoiseParams(ClassParamBank scale, ClassParamBank shift);
  SemanticNoiseParams(ParamStore& store, const std::string& prefix, int64_t rows, int64_t cols,
                      double n1_mean, double n1_stddev, double n2_mean, double n2_stddev);
};

// Differentiable path. z must be a standard-normal tensor of the output
// shape (or all zeros for the deterministic switch); it is treated as a
// constant, so gradients flow only into the banks.
Var sample_semantic_noise_vars(const LabelMap& labels, const SemanticNoiseParams& params,
                               const Tensor& z);
// Draws z from rng (per element, row-major order) and applies the banks.
Tensor sample_semantic_noise(const SemanticLayout& layout, const SemanticNoiseParams& params,
                             RngStream& rng);

enum class PositionKind { none, absolute, learnable, relative };
enum class PositionAxis { row, col };

// Two-channel spatial code: channel 0 indexes rows, channel 1 columns.
// absolute/relative are computed, learnable is a trainable parameter.
struct PositionCode {
  PositionKind kind = PositionKind::none;
  Var data;  // (1 or B, 2, H, W)
};

// Affine coordinate grid in [-1, 1]; a degenerate axis (extent 1) is zero.
PositionCode absolute_code(int64_t h, int64_t w);

// Offset from the per-class, per-sample centroid, normalized per axis by the
// largest offset magnitude within that class (so values lie in [-1, 1]).
// Classes spanning a single pixel (or a single line on an axis) code to 0.
PositionCode relative_code(const SemanticLayout& layout);

// Standalone trainable code, i.i.d. normal(0, 0.02).
PositionCode learnable_code_init(int64_t h, int64_t w, RngStream& rng);
// Registered variant used inside layers (same init distribution).
PositionCode make_learnable_code(ParamStore& store, const std::string& name, int64_t h,
                                 int64_t w);

// Convolution projecting the 2-channel code into modulation channels.
struct PositionProjectionParams {
  Var w, b;
  int64_t out_channels = 0;
  int64_t kernel_size = 3;
  PaddingMode padding = PaddingMode::zero;

  PositionProjectionParams() = default;
  // bias_init = 1 keeps the projected code near-identity under elementwise
  // multiplication at the start of training.
  PositionProjectionParams(ParamStore& store, const std::string& prefix, int64_t out_channels,
                           int64_t kernel_size, PaddingMode padding, double bias_init);

  ConvOpts conv_opts() const { return ConvOpts{1, kernel_size / 2, padding}; }
};

Var project_code_vars(const PositionCode& code, const PositionProjectionParams& params);
Tensor project_code(const PositionCode& code, const PositionProjectionParams& params);

// True iff the axis channel is non-decreasing along every line parallel to
// the axis, or non-increasing along every such line.
bool monotonicity_check(const PositionCode& code, PositionAxis axis);

}  // namespace vasis
