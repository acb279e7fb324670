#pragma once

#include <Eigen/Core>
#include <array>
#include <vector>

#include "vasis/feature_pyramid.hpp"
#include "vasis/layout.hpp"
#include "vasis/networks.hpp"

namespace vasis {

struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // unbiased sample covariance, symmetric PSD up to tolerance
};

// Sample mean and unbiased covariance of n >= 2 feature rows.
GaussianFit gaussian_fit(const Eigen::MatrixXd& features);

struct FrechetDetails {
  double clamp_magnitude = 0.0;  // largest negative eigenvalue clamped to 0
};

// ||mu_a - mu_b||^2 + tr(Sa + Sb - 2 (Sa Sb)^(1/2)); the matrix square root
// goes through the eigen-decomposition of the symmetrized product
// Sa^(1/2) Sb Sa^(1/2), with negative eigenvalues clamped at 0.
double frechet_distance(const GaussianFit& a, const GaussianFit& b,
                        FrechetDetails* details = nullptr);

// Embeds both sets and returns the Fréchet distance of their Gaussian fits.
// Reference images are resized to the generated resolution bicubically
// before embedding. Each image is (1,3,H,W).
double fid_pipeline(const std::vector<Tensor>& generated, const std::vector<Tensor>& reference,
                    const ConvPyramid& embedder);

// Catmull-Rom bicubic resampling with edge clamping, per channel.
Tensor resize_bicubic(const Tensor& image, int64_t target_h, int64_t target_w);

struct MiouResult {
  double miou = 0.0;
  double acc = 0.0;
  std::vector<double> per_class_iou;  // valid where present[c]
  std::vector<bool> present;          // class appears in gt
};

// Acc = matching-pixel fraction; IoU per class; mIoU over classes present in
// the ground truth (absent classes excluded from the mean).
MiouResult miou_acc(const LabelMap& pred, const LabelMap& gt, int64_t num_classes);

// Nearest-base-color classification, valid because the synthetic renders use
// distinct per-class base colors.
LabelMap palette_segment(const Tensor& images, const std::vector<std::array<double, 3>>& palette);

// Parameter and FLOP accounting. FLOPs = 2 * MACs; conv MACs are
// (in*out*k^2) * Hout * Wout; guided sampling and position codes cost 0 MACs.
struct CostReport {
  int64_t params = 0;
  int64_t flops = 0;
  int64_t modulation_params = 0;  // normalization-layer subtotal
};

// Per-layer counting conventions, exposed for direct verification.
int64_t conv_param_count(int64_t in, int64_t out, int64_t k);  // weights + bias
int64_t conv_macs(int64_t in, int64_t out, int64_t k, int64_t out_h, int64_t out_w);

CostReport count_params_flops(const GeneratorSpec& spec);
CostReport count_params_flops(const DiscriminatorSpec& spec, int64_t resolution);

// Oracle cross-check: exhaustive walk of the trainable arrays in a store.
// modulation params are the ones owned by norm layers (name contains ".norm").
int64_t enumerate_params(const ParamStore& store);
int64_t enumerate_modulation_params(const ParamStore& store);

}  // namespace vasis
