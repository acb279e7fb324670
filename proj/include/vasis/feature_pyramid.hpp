#pragma once

#include <vector>

#include "vasis/autograd.hpp"

namespace vasis {

// Fixed random-weight convolution pyramid: k3/stride-2 stages with leaky
// activations. Serves as the pluggable perceptual extractor and, with global
// average pooling on the last stage, as the image embedder. Weights are
// frozen and fully determined by (in_channels, channels, seed), so every
// score computed against a pyramid is reproducible from its seed.
class ConvPyramid {
 public:
  ConvPyramid(int64_t in_channels, std::vector<int64_t> channels, uint64_t seed);

  // Stage activations, coarsest last. Differentiable w.r.t. x.
  std::vector<Var> stages(const Var& x) const;

  // Global average pool of the last stage.
  std::vector<double> embed(const Tensor& image) const;
  int64_t embed_dim() const { return channels_.back(); }
  uint64_t seed() const { return seed_; }

 private:
  std::vector<int64_t> channels_;
  uint64_t seed_ = 0;
  std::vector<Var> ws_, bs_;
};

// Default seeds for the two frozen pyramids used across the project.
inline constexpr uint64_t kPerceptualPyramidSeed = 90210;
inline constexpr uint64_t kEmbedderPyramidSeed = 31337;

}  // namespace vasis
