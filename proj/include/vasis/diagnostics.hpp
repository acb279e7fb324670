#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vasis/networks.hpp"

namespace vasis {

// Pixels whose 3x3 neighborhood contains a different label; optionally the
// one-pixel image frame (the synthetic boundary created by zero padding).
// Returned as a 0/1 mask of shape (B,1,H,W).
Tensor class_boundary_map(const SemanticLayout& layout, bool include_padding_border);

struct ProbeReport {
  // Per block: population std over (H,W) per channel and sample, averaged
  // over channels and samples. Computed on post-block activations.
  std::vector<std::pair<std::string, double>> block_std;
  std::string config_fingerprint;
  std::string layout_descriptor;
};

struct ProbeOptions {
  uint64_t seed = 1;
  bool zero_noise = false;
};

ProbeReport per_block_std_probe(const Generator& generator, const SemanticLayout& layout,
                                const ProbeOptions& opts = {});

// Per class: std of pixel values over the class support, averaged over
// channels. Classes absent from the layout yield nullopt, distinct from 0.
std::vector<std::optional<double>> intra_class_std(const Tensor& image, const LabelMap& labels,
                                                   int64_t num_classes);
std::vector<std::optional<double>> intra_class_std(const Tensor& image,
                                                   const SemanticLayout& layout);

struct CollapseOptions {
  int64_t canvas_size = 64;
  int32_t background_class = 0;
  uint64_t seed = 1;
  bool zero_noise = false;
};

// Places the motif (a labeled patch with an internal class boundary) at each
// offset inside a constant background, generates one image per placement
// with a shared latent, and scores the mean pairwise Pearson correlation of
// the mean-removed patches. 1.0 means every placement rendered the same
// pattern. Needs >= 2 placements; out-of-bounds placements are rejected.
double collapse_score(const Generator& generator, const LabelMap& motif,
                      const std::vector<std::pair<int64_t, int64_t>>& placements,
                      const CollapseOptions& opts);

// Default 16x16 two-class square-in-field motif (field = background class,
// inner 8x8 square = square_class).
LabelMap default_motif(int32_t background_class = 0, int32_t square_class = 1);
std::vector<std::pair<int64_t, int64_t>> default_placements();

// Canvas-proportional variants: motif side = canvas/4, placements on the
// {canvas/4, canvas/2} grid (so they stay aligned with the coarsest layout
// rasterization).
LabelMap scaled_motif(int64_t canvas, int32_t background_class = 0, int32_t square_class = 1);
std::vector<std::pair<int64_t, int64_t>> scaled_placements(int64_t canvas);

struct AblationCell {
  PaddingMode padding;
  int64_t kernel_size;
  ProbeReport probe;      // on a single-class layout
  double max_block_std;   // max over blocks (excluding the tanh output)
  double collapse;        // on the motif placements
};

struct AblationOptions {
  uint64_t init_seed = 7;
  uint64_t probe_seed = 1;
  int32_t single_class = 0;
};

// Runs the probe and the collapse score for every cell of
// {zero, reflect} x {k1, k3} on fresh untrained models sharing the init seed.
std::vector<AblationCell> padding_kernel_ablation(const GeneratorSpec& base_spec,
                                                  const AblationOptions& opts = {});

std::string format_ablation_table(const std::vector<AblationCell>& cells);

}  // namespace vasis
