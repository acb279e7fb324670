#include "vasis/vasis_layer.hpp"

namespace vasis {

namespace {
constexpr double kLeakySlope = 0.2;
constexpr int64_t kPositionProjKernel = 3;  // F_p kernel is fixed at 3
}  // namespace

void VariantConfig::validate(int64_t feature_channels) const {
  VASIS_CHECK(kernel_size == 1 || kernel_size == 3, validation,
              "kernel_size must be 1 or 3, got " << kernel_size);
  if (noise_enabled && combine_mode != CombineMode::plus) {
    VASIS_CHECK(feature_channels % 2 == 0, validation,
                "feature channels must be even to split noise/semantic paths, got "
                    << feature_channels);
  }
}

int64_t VariantConfig::semantic_width(int64_t feature_channels) const {
  if (!noise_enabled || combine_mode == CombineMode::plus) return feature_channels;
  return feature_channels / 2;
}

int64_t VariantConfig::noise_bank_cols(int64_t feature_channels) const {
  if (!noise_enabled) return 0;
  switch (combine_mode) {
    case CombineMode::plus:
      return feature_channels;
    case CombineMode::one_channel:
      return 1;
    default:
      return feature_channels / 2;
  }
}

int64_t VariantConfig::noise_bank_rows(int64_t num_classes) const {
  return combine_mode == CombineMode::rand_noise ? 1 : num_classes;
}

std::string VariantConfig::describe() const {
  auto combine = [&] {
    switch (combine_mode) {
      case CombineMode::concat: return "concat";
      case CombineMode::plus: return "plus";
      case CombineMode::one_channel: return "one_channel";
      case CombineMode::rand_noise: return "rand";
    }
    return "?";
  }();
  auto pos = [&] {
    switch (position_kind) {
      case PositionKind::none: return "none";
      case PositionKind::absolute: return "absolute";
      case PositionKind::learnable: return "learnable";
      case PositionKind::relative: return "relative";
    }
    return "?";
  }();
  std::string out = semantic_path == SemanticPath::spade_conv ? "spade" : "clade";
  out += noise_enabled ? "+noise(" : "+nonoise(";
  out += combine;
  out += ")+pos(";
  out += pos;
  out += ")+k";
  out += std::to_string(kernel_size);
  out += padding == PaddingMode::zero ? "+zero" : "+reflect";
  out += stats_mode == StatsMode::batch ? "+bstats" : "+istats";
  return out;
}

Var combine_modulation(const Var& gamma_n, const Var& gamma_s, const Var& gamma_p,
                       const VariantConfig& cfg) {
  Var gsp = gamma_p.defined() ? mul(gamma_s, gamma_p) : gamma_s;
  if (!cfg.noise_enabled) return gsp;

  VASIS_CHECK(gamma_n.defined(), validation, "noise enabled but gamma_n missing");
  const int64_t sc = gsp.shape().c;
  const int64_t nc = gamma_n.shape().c;
  switch (cfg.combine_mode) {
    case CombineMode::plus:
      VASIS_CHECK(nc == sc, validation,
                  "plus mode needs equal widths, got noise " << nc << " vs semantic " << sc);
      return add(gamma_n, gsp);
    case CombineMode::one_channel: {
      VASIS_CHECK(nc == 1, validation, "one_channel mode needs a 1-channel noise map, got " << nc);
      return concat_channels(tile_channels(gamma_n, sc), gsp);
    }
    case CombineMode::concat:
    case CombineMode::rand_noise:
      VASIS_CHECK(nc == sc, validation,
                  "concat mode needs equal halves, got noise " << nc << " vs semantic " << sc);
      return concat_channels(gamma_n, gsp);
  }
  VASIS_CHECK(false, validation, "unreachable combine mode");
  return {};
}

VasisNormLayer::VasisNormLayer(ParamStore& store, const std::string& prefix,
                               const VariantConfig& cfg, int64_t channels, int64_t num_classes,
                               int64_t height, int64_t width, int64_t hidden_channels,
                               double eps)
    : cfg_(cfg),
      channels_(channels),
      num_classes_(num_classes),
      height_(height),
      width_(width),
      eps_(eps) {
  cfg.validate(channels);
  const int64_t ws = cfg.semantic_width(channels);
  if (cfg.semantic_path == SemanticPath::spade_conv) {
    spade_ = SpadeModulationParams(store, prefix + ".spade", num_classes, hidden_channels, ws,
                                   cfg.kernel_size, cfg.padding);
  } else {
    clade_gamma_ = ClassParamBank(store, prefix + ".clade.gamma", num_classes, ws, 1.0, 0.02);
    clade_beta_ = ClassParamBank(store, prefix + ".clade.beta", num_classes, ws, 0.0, 0.02);
  }
  if (cfg.noise_enabled) {
    const int64_t rows = cfg.noise_bank_rows(num_classes);
    const int64_t cols = cfg.noise_bank_cols(channels);
    noise_gamma_ = SemanticNoiseParams(store, prefix + ".noise.gamma", rows, cols, 0.0, 0.25,
                                       1.0, 0.02);
    noise_beta_ = SemanticNoiseParams(store, prefix + ".noise.beta", rows, cols, 0.0, 0.25,
                                      0.0, 0.02);
  }
  if (cfg.position_kind != PositionKind::none) {
    pos_gamma_ = PositionProjectionParams(store, prefix + ".pos.gamma", ws, kPositionProjKernel,
                                          cfg.padding, 1.0);
    pos_beta_ = PositionProjectionParams(store, prefix + ".pos.beta", ws, kPositionProjKernel,
                                         cfg.padding, 1.0);
    if (cfg.position_kind == PositionKind::learnable) {
      learnable_code_ = make_learnable_code(store, prefix + ".pos.code", height, width);
    }
  }
}

std::pair<Var, Var> VasisNormLayer::semantic_mods(const SemanticLayout& layout,
                                                  const LabelMap& labels) const {
  if (cfg_.semantic_path == SemanticPath::spade_conv) return spade_modulation_vars(layout, spade_);
  return {guided_sample_vars(labels, clade_gamma_), guided_sample_vars(labels, clade_beta_)};
}

Var VasisNormLayer::noise_component(const LabelMap& labels, const SemanticNoiseParams& banks,
                                    RngStream* rng, bool zero_noise, Shape spatial) const {
  Shape zs{spatial.b, banks.n1.cols(), spatial.h, spatial.w};
  Tensor z(zs);
  if (!zero_noise) {
    VASIS_CHECK(rng != nullptr, validation, "noise enabled but no rng stream supplied");
    rng->fill_normal(z);
  }
  if (cfg_.combine_mode == CombineMode::rand_noise) {
    // Class-blind: the single bank row applies everywhere.
    Shape full{spatial.b, banks.n1.cols(), spatial.h, spatial.w};
    Var scale = expand(banks.n1.table, full);
    Var shift = expand(banks.n2.table, full);
    return add(mul(Var::leaf(std::move(z)), scale), shift);
  }
  return sample_semantic_noise_vars(labels, banks, z);
}

Var VasisNormLayer::position_component(const SemanticLayout& layout,
                                       const PositionProjectionParams& proj) const {
  PositionCode code;
  switch (cfg_.position_kind) {
    case PositionKind::absolute:
      code = absolute_code(height_, width_);
      break;
    case PositionKind::relative:
      code = relative_code(layout);  // per-layout, recomputed on every change
      break;
    case PositionKind::learnable:
      code = learnable_code_;
      break;
    case PositionKind::none:
      return {};
  }
  return project_code_vars(code, proj);
}

Var VasisNormLayer::forward(const Var& x, const SemanticLayout& layout, const LabelMap& labels,
                            RngStream* rng, bool zero_noise) const {
  const Shape s = x.shape();
  VASIS_CHECK(s.c == channels_, validation,
              "feature channels " << s.c << " != layer channels " << channels_);
  VASIS_CHECK(layout.height() == s.h && layout.width() == s.w, validation,
              "layout (" << layout.height() << "," << layout.width()
                         << ") not resized to feature dims " << s.str());
  VASIS_CHECK(layout.height() == height_ && layout.width() == width_, validation,
              "layer built for " << height_ << "x" << width_ << ", called at " << s.h << "x"
                                 << s.w);

  auto [gamma_s, beta_s] = semantic_mods(layout, labels);
  Var gamma_p, beta_p;
  if (cfg_.position_kind != PositionKind::none) {
    gamma_p = position_component(layout, pos_gamma_);
    beta_p = position_component(layout, pos_beta_);
  }
  Var gamma_n, beta_n;
  if (cfg_.noise_enabled) {
    // Gamma draws first, then beta: the order is part of the rng contract.
    gamma_n = noise_component(labels, noise_gamma_, rng, zero_noise, s);
    beta_n = noise_component(labels, noise_beta_, rng, zero_noise, s);
  }
  Var gamma = combine_modulation(gamma_n, gamma_s, gamma_p, cfg_);
  Var beta = combine_modulation(beta_n, beta_s, beta_p, cfg_);
  return normalize_denormalize_vars(x, gamma, beta, eps_,
                                    cfg_.stats_mode == StatsMode::instance);
}

VasisResBlock::VasisResBlock(ParamStore& store, const std::string& prefix,
                             const VariantConfig& cfg, int64_t in_channels, int64_t out_channels,
                             int64_t num_classes, int64_t height, int64_t width,
                             int64_t hidden_channels)
    : cfg_(cfg), in_ch_(in_channels), out_ch_(out_channels) {
  mid_ch_ = std::min(in_channels, out_channels);
  learned_skip_ = (in_channels != out_channels);
  norm1_ = VasisNormLayer(store, prefix + ".norm1", cfg, in_channels, num_classes, height, width,
                          hidden_channels);
  norm2_ = VasisNormLayer(store, prefix + ".norm2", cfg, mid_ch_, num_classes, height, width,
                          hidden_channels);
  const int64_t k = cfg.kernel_size;
  conv1_w = store.create(prefix + ".conv1.w", Shape{mid_ch_, in_channels, k, k}, 0.0, 0.02);
  conv1_b = store.create_constant(prefix + ".conv1.b", Shape{1, mid_ch_, 1, 1}, 0.0);
  conv2_w = store.create(prefix + ".conv2.w", Shape{out_channels, mid_ch_, k, k}, 0.0, 0.02);
  conv2_b = store.create_constant(prefix + ".conv2.b", Shape{1, out_channels, 1, 1}, 0.0);
  if (learned_skip_) {
    norm_s_ = VasisNormLayer(store, prefix + ".norm_s", cfg, in_channels, num_classes, height,
                             width, hidden_channels);
    skip_w = store.create(prefix + ".skip.w", Shape{out_channels, in_channels, 1, 1}, 0.0, 0.02);
    skip_b = store.create_constant(prefix + ".skip.b", Shape{1, out_channels, 1, 1}, 0.0);
  }
}

Var VasisResBlock::forward(const Var& x, const SemanticLayout& layout, const LabelMap& labels,
                           RngStream* rng, bool zero_noise) const {
  const ConvOpts o{1, cfg_.kernel_size / 2, cfg_.padding};
  Var h = conv2d(leaky_relu(norm1_.forward(x, layout, labels, rng, zero_noise), kLeakySlope),
                 conv1_w, conv1_b, o);
  h = conv2d(leaky_relu(norm2_.forward(h, layout, labels, rng, zero_noise), kLeakySlope),
             conv2_w, conv2_b, o);
  Var skip = x;
  if (learned_skip_) {
    skip = conv2d(norm_s_.forward(x, layout, labels, rng, zero_noise), skip_w, skip_b,
                  ConvOpts{1, 0, cfg_.padding});
  }
  return add(skip, h);
}

}  // namespace vasis
