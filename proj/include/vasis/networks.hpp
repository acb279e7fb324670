#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vasis/feature_pyramid.hpp"
#include "vasis/vasis_layer.hpp"

namespace vasis {

// Decoder-only generator: a latent vector is mapped by a linear layer to the
// seed channels and broadcast over the initial grid; every spatial structure
// then comes from the layout-conditioned normalization layers. Each block
// upsamples by 2.
struct GeneratorSpec {
  int64_t base_channels = 32;
  int64_t num_blocks = 4;
  int64_t output_resolution = 64;
  int64_t latent_dim = 16;
  int64_t hidden_channels = 64;  // modulation trunk width
  int64_t num_classes = 0;       // bound from the dataset
  VariantConfig variant;

  int64_t initial_resolution() const { return output_resolution >> num_blocks; }
  // Channel counts at resolutions R0, 2*R0, ..., output (num_blocks+1 entries).
  std::vector<int64_t> channel_schedule() const;
  void validate() const;
};

struct BlockTrace {
  std::string name;
  Tensor activation;
};

class Generator {
 public:
  Generator(ParamStore& store, const GeneratorSpec& spec);

  // latent: (B, latent_dim, 1, 1); layout at full output resolution.
  // rng feeds the per-layer noise draws; zero_noise switches them off.
  Var forward(const Var& latent, const SemanticLayout& layout, RngStream* rng,
              bool zero_noise = false, std::vector<BlockTrace>* trace = nullptr) const;
  Tensor generate(const Tensor& latent, const SemanticLayout& layout, RngStream* rng,
                  bool zero_noise = false, std::vector<BlockTrace>* trace = nullptr) const;
  Tensor sample_latent(int64_t batch, RngStream& rng) const;

  const GeneratorSpec& spec() const { return spec_; }
  std::vector<std::string> block_names() const;

 private:
  GeneratorSpec spec_;
  Var fc_w, fc_b;
  std::vector<VasisResBlock> blocks_;  // blocks_[i] runs at R0 * 2^i; last is full-res
  Var rgb_w, rgb_b;
};

enum class DiscriminatorKind { patch_multiscale, segmentation };

struct DiscriminatorSpec {
  DiscriminatorKind kind = DiscriminatorKind::patch_multiscale;
  int64_t scales = 2;  // patch kind only
  std::vector<int64_t> channels = {32, 64, 128};
  int64_t num_classes = 0;  // bound from the dataset
};

struct ScaleOutput {
  Var logits;                 // patch logit map for one scale
  std::vector<Var> features;  // per-stage activations, for feature matching
};

// pix2pixHD-lineage multiscale patch discriminator over the channel
// concatenation of image and one-hot layout. Scale s sees the input average
// pooled s times.
class PatchDiscriminator {
 public:
  PatchDiscriminator(ParamStore& store, const DiscriminatorSpec& spec);
  std::vector<ScaleOutput> forward(const Var& image, const SemanticLayout& layout) const;
  const DiscriminatorSpec& spec() const { return spec_; }

 private:
  DiscriminatorSpec spec_;
  // per scale, per stage
  std::vector<std::vector<Var>> ws_, bs_;
  std::vector<Var> logit_w_, logit_b_;
};

// Encoder-decoder discriminator emitting per-pixel logits over N+1 classes;
// class N is the fake class.
class SegDiscriminator {
 public:
  SegDiscriminator(ParamStore& store, const DiscriminatorSpec& spec);
  Var forward(const Var& image) const;
  const DiscriminatorSpec& spec() const { return spec_; }

 private:
  DiscriminatorSpec spec_;
  std::vector<Var> enc_w_, enc_b_, dec_w_, dec_b_;
  Var head_w_, head_b_;
};

// ---- losses ----
// Hinge losses average over scales of the per-scale mean.
Var hinge_d_loss(const std::vector<Var>& real_logits, const std::vector<Var>& fake_logits);
Var hinge_g_loss(const std::vector<Var>& fake_logits);

// Mean absolute difference averaged over layers and scales.
Var feature_matching_loss(const std::vector<std::vector<Var>>& real_feats,
                          const std::vector<std::vector<Var>>& fake_feats);

// Weighted L1 over extractor stages (uniform stage weights).
Var perceptual_loss(const Var& real_image, const Var& fake_image, const ConvPyramid& extractor);

enum class CeTarget { real, fake };

// Inverse pixel-frequency weights over the classes present in the batch,
// normalized to mean 1; absent classes get 0 and the fake class gets 1.
std::vector<double> oasis_class_weights(const LabelMap& labels, int64_t num_classes);

// Per-pixel cross entropy against the layout (real) or the fake class (fake).
Var oasis_ce_loss(const Var& logits, const LabelMap& labels, CeTarget target,
                  const std::vector<double>& class_weights);

// ---- training ----
struct TrainRecipe {
  int64_t batch_size = 1;
  double lr_g = 1e-4, lr_d = 4e-4;    // two-timescale
  double beta1 = 0.0, beta2 = 0.999;  // Adam moments
  double weight_gan = 1.0, weight_fm = 10.0, weight_perceptual = 10.0;
  bool zero_noise = false;
};

struct StepReport {
  int64_t step = 0;
  double d_loss = 0.0;
  double g_loss = 0.0, g_gan = 0.0, g_fm = 0.0, g_perceptual = 0.0;
  double d_grad_norm = 0.0, g_grad_norm = 0.0;
  bool finite = true;
};

struct Batch {
  Tensor images;  // (B,3,H,W) in [-1,1]
  LabelMap labels;
  SemanticLayout layout;
};

struct Models {
  GeneratorSpec g_spec;
  DiscriminatorSpec d_spec;
  ParamStore g_params, d_params;
  std::unique_ptr<Generator> generator;
  std::unique_ptr<PatchDiscriminator> patch_d;
  std::unique_ptr<SegDiscriminator> seg_d;
  std::unique_ptr<ConvPyramid> perceptual;

  Models(const GeneratorSpec& gs, const DiscriminatorSpec& ds, uint64_t init_seed);
};

// One discriminator update followed by one generator update. rng_base
// derives the latent and noise streams for this step; calling twice with the
// same streams and states reproduces the report exactly. Non-finite losses
// raise a numeric error carrying the step and loss parts.
StepReport train_step(const Batch& batch, Models& models, AdamOptimizer& opt_g,
                      AdamOptimizer& opt_d, const TrainRecipe& recipe, int64_t step,
                      RngStream rng_latent, RngStream rng_noise);

}  // namespace vasis
