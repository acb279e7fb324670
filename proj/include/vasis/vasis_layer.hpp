#pragma once

#include <optional>
#include <string>

#include "vasis/noise_position.hpp"

namespace vasis {

enum class CombineMode { concat, plus, one_channel, rand_noise };
enum class SemanticPath { spade_conv, clade_sample };
enum class StatsMode { batch, instance };

// Architecture variant of the conditional normalization layer. kernel_size
// and padding apply to every spatial convolution on the generator path
// (modulation heads, position projection, residual-block convolutions), so
// the k1/reflect ablations hold for the whole image pipeline.
struct VariantConfig {
  CombineMode combine_mode = CombineMode::concat;
  PositionKind position_kind = PositionKind::none;
  bool noise_enabled = false;
  int64_t kernel_size = 3;
  PaddingMode padding = PaddingMode::zero;
  SemanticPath semantic_path = SemanticPath::spade_conv;
  StatsMode stats_mode = StatsMode::batch;

  void validate(int64_t feature_channels) const;

  // Channel width of the semantic-layout (and position) path.
  int64_t semantic_width(int64_t feature_channels) const;
  // Column count of the noise banks (0 when noise is disabled).
  int64_t noise_bank_cols(int64_t feature_channels) const;
  // Row count of the noise banks (1 in rand mode: class-blind).
  int64_t noise_bank_rows(int64_t num_classes) const;

  std::string describe() const;
};

// Eq-style combination: noise channels concatenated with (or added to) the
// position-modulated semantic channels.
//   concat/one_channel/rand: out = [gamma_n ; gamma_s * gamma_p], C' channels
//   plus:                    out = gamma_n + gamma_s * gamma_p,   C' channels
//   noise disabled:          out = gamma_s * gamma_p,             C' channels
// An undefined gamma_p means "position disabled" and acts as all-ones.
Var combine_modulation(const Var& gamma_n, const Var& gamma_s, const Var& gamma_p,
                       const VariantConfig& cfg);

// One conditional normalization layer with all three modulation sources.
// Owns independent parameter sets for the gamma and beta sides.
class VasisNormLayer {
 public:
  VasisNormLayer() = default;
  VasisNormLayer(ParamStore& store, const std::string& prefix, const VariantConfig& cfg,
                 int64_t channels, int64_t num_classes, int64_t height, int64_t width,
                 int64_t hidden_channels, double eps = kDefaultNormEps);

  // rng supplies the per-element noise draws (gamma first, then beta);
  // zero_noise substitutes z = 0 for regression tests. labels must be the
  // argmax of layout at the layer's resolution.
  Var forward(const Var& x, const SemanticLayout& layout, const LabelMap& labels,
              RngStream* rng, bool zero_noise) const;

  const VariantConfig& cfg() const { return cfg_; }
  int64_t channels() const { return channels_; }

 private:
  std::pair<Var, Var> semantic_mods(const SemanticLayout& layout, const LabelMap& labels) const;
  Var noise_component(const LabelMap& labels, const SemanticNoiseParams& banks, RngStream* rng,
                      bool zero_noise, Shape spatial) const;
  Var position_component(const SemanticLayout& layout,
                         const PositionProjectionParams& proj) const;

  VariantConfig cfg_;
  int64_t channels_ = 0;
  int64_t num_classes_ = 0;
  int64_t height_ = 0, width_ = 0;
  double eps_ = kDefaultNormEps;

  SpadeModulationParams spade_;
  ClassParamBank clade_gamma_, clade_beta_;
  SemanticNoiseParams noise_gamma_, noise_beta_;
  PositionProjectionParams pos_gamma_, pos_beta_;
  PositionCode learnable_code_;  // owned per layer at the layer's resolution
};

// Residual generator block hosting two (three, with a learned skip)
// variation-aware norms. Spatial dims are preserved; channels move from
// in_channels to out_channels.
class VasisResBlock {
 public:
  VasisResBlock() = default;
  VasisResBlock(ParamStore& store, const std::string& prefix, const VariantConfig& cfg,
                int64_t in_channels, int64_t out_channels, int64_t num_classes, int64_t height,
                int64_t width, int64_t hidden_channels);

  Var forward(const Var& x, const SemanticLayout& layout, const LabelMap& labels,
              RngStream* rng, bool zero_noise) const;

  int64_t in_channels() const { return in_ch_; }
  int64_t out_channels() const { return out_ch_; }

 private:
  VariantConfig cfg_;
  int64_t in_ch_ = 0, out_ch_ = 0, mid_ch_ = 0;
  bool learned_skip_ = false;
  VasisNormLayer norm1_, norm2_, norm_s_;
  Var conv1_w, conv1_b, conv2_w, conv2_b, skip_w, skip_b;
};

}  // namespace vasis
