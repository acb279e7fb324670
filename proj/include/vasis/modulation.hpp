#pragma once

#include <utility>
#include <vector>

#include "vasis/autograd.hpp"
#include "vasis/layout.hpp"
#include "vasis/params.hpp"

namespace vasis {

// Per-channel statistics of the parameter-free normalization step.
struct BatchStats {
  std::vector<double> mu;
  std::vector<double> sigma;  // sqrt(var + eps), strictly positive
};

// Spatial (gamma, beta) maps applied in denormalization.
struct ModulationPair {
  Tensor gamma;
  Tensor beta;
};

inline constexpr double kDefaultNormEps = 1e-5;

// Per-channel mean and sqrt(var + eps) over (batch, height, width).
// Population variance, matching the normalization convention.
BatchStats batch_stats(const Tensor& x, double eps = kDefaultNormEps);

// out = gamma * (x - mu) / sigma + beta, elementwise.
Tensor denormalize(const Tensor& x, const BatchStats& stats, const ModulationPair& mods);

// The three convolutions computing gamma and beta from the layout: a shared
// trunk (classes -> hidden), then separate gamma and beta heads
// (hidden -> out). A ReLU sits between trunk and heads. All three share
// kernel size and padding mode.
struct SpadeModulationParams {
  Var f1_w, f1_b;  // shared trunk
  Var f2_w, f2_b;  // gamma head (bias initialized to 1)
  Var f3_w, f3_b;  // beta head
  int64_t num_classes = 0;
  int64_t hidden_channels = 0;
  int64_t out_channels = 0;
  int64_t kernel_size = 3;
  PaddingMode padding = PaddingMode::zero;

  SpadeModulationParams() = default;
  SpadeModulationParams(ParamStore& store, const std::string& prefix, int64_t num_classes,
                        int64_t hidden_channels, int64_t out_channels, int64_t kernel_size,
                        PaddingMode padding);

  ConvOpts conv_opts() const { return ConvOpts{1, kernel_size / 2, padding}; }
};

// Differentiable path; first = gamma, second = beta.
std::pair<Var, Var> spade_modulation_vars(const SemanticLayout& layout,
                                          const SpadeModulationParams& params);
ModulationPair spade_modulation(const SemanticLayout& layout,
                                const SpadeModulationParams& params);

// Per-class parameter rows, sampled per pixel by label (the CLADE path and
// the semantic-noise banks). Stored as (rows, cols, 1, 1).
struct ClassParamBank {
  Var table;

  ClassParamBank() = default;
  explicit ClassParamBank(Var t) : table(std::move(t)) {}
  ClassParamBank(ParamStore& store, const std::string& name, int64_t rows, int64_t cols,
                 double mean, double stddev);
  static ClassParamBank from_tensor(Tensor rows_by_cols);  // non-trainable, for tests

  int64_t rows() const { return table.shape().b; }
  int64_t cols() const { return table.shape().c; }
};

// out[b,:,h,w] = bank.table[label(b,h,w), :]. Exact lookup, no mixing.
Var guided_sample_vars(const LabelMap& labels, const ClassParamBank& bank);
Tensor guided_sample(const SemanticLayout& layout, const ClassParamBank& bank);

// Differentiable composition of normalization and denormalization.
// per_sample=true computes instance statistics (batch-size-1 desk runs).
Var normalize_denormalize_vars(const Var& x, const Var& gamma, const Var& beta, double eps,
                               bool per_sample);

// Plain-tensor SPADE layer: batch_stats + spade_modulation + denormalize.
// The degenerate variation-aware configuration must reproduce this exactly.
Tensor spade_layer_forward(const Tensor& x, const SemanticLayout& layout,
                           const SpadeModulationParams& params, double eps = kDefaultNormEps);

}  // namespace vasis
