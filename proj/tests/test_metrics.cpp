#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "oracles.hpp"
#include "vasis/data_io.hpp"
#include "vasis/metrics.hpp"
#include "vasis/runner.hpp"

using namespace vasis;
using namespace vasis::testing;

TEST_SUITE_BEGIN("metrics");

TEST_CASE("gaussian_fit: unbiased covariance hand cases") {
  Eigen::MatrixXd pts(2, 2);
  pts << 0, 0, 2, 0;
  GaussianFit fit = gaussian_fit(pts);
  CHECK(fit.mean(0) == doctest::Approx(1.0));
  CHECK(fit.mean(1) == doctest::Approx(0.0));
  CHECK(fit.cov(0, 0) == doctest::Approx(2.0));  // divisor n-1
  CHECK(fit.cov(0, 1) == doctest::Approx(0.0));
  CHECK(fit.cov(1, 1) == doctest::Approx(0.0));

  Eigen::MatrixXd same(3, 2);
  same << 1, 2, 1, 2, 1, 2;
  CHECK(gaussian_fit(same).cov.norm() == doctest::Approx(0.0));

  Eigen::MatrixXd one_d(4, 1);
  one_d << 0, 2, 4, 6;
  GaussianFit f1 = gaussian_fit(one_d);
  CHECK(f1.mean(0) == doctest::Approx(3.0));
  CHECK(f1.cov(0, 0) == doctest::Approx(20.0 / 3.0));

  Eigen::MatrixXd single(1, 2);
  CHECK_THROWS_AS(gaussian_fit(single), Error);
}

TEST_CASE("frechet_distance closed forms") {
  GaussianFit a, b;
  a.mean = Eigen::VectorXd::Zero(1);
  a.cov = Eigen::MatrixXd::Identity(1, 1);
  b = a;
  CHECK(frechet_distance(a, b) == doctest::Approx(0.0).epsilon(1e-8));

  b.mean(0) = 1.0;  // means 0/1, vars 1/1 -> (0-1)^2 + (1+1-2) = 1
  CHECK(frechet_distance(a, b) == doctest::Approx(1.0).epsilon(1e-8));

  GaussianFit c, d;
  c.mean = Eigen::VectorXd::Zero(2);
  d.mean = Eigen::VectorXd::Zero(2);
  c.cov = Eigen::MatrixXd::Identity(2, 2) * 4.0;
  d.cov = Eigen::MatrixXd::Identity(2, 2) * 1.0;
  // Per dimension (2-1)^2 = 1, two dimensions -> 2.
  CHECK(frechet_distance(c, d) == doctest::Approx(2.0).epsilon(1e-8));

  GaussianFit e;
  e.mean = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(frechet_distance(a, e), Error);
}

TEST_CASE("frechet_distance: symmetry and nonnegativity on random PSD pairs") {
  RngStream rng(1, 0);
  for (int rep = 0; rep < 10; ++rep) {
    const int d = 5;
    auto random_fit = [&] {
      GaussianFit f;
      f.mean = Eigen::VectorXd::Zero(d);
      Eigen::MatrixXd m(d, d);
      for (int i = 0; i < d; ++i) {
        f.mean(i) = rng.normal();
        for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
      }
      f.cov = m * m.transpose() / d;
      return f;
    };
    GaussianFit a = random_fit(), b = random_fit();
    double ab = frechet_distance(a, b);
    double ba = frechet_distance(b, a);
    CHECK(ab >= 0.0);
    CHECK(std::abs(ab - ba) < 1e-8 * std::max(1.0, ab));
    CHECK(frechet_distance(a, a) < 1e-8);
  }
}

TEST_CASE("fid_pipeline: identical sets, disjoint constants, order invariance") {
  ConvPyramid embedder(3, {8, 16}, 77);
  RngStream rng(2, 0);
  std::vector<Tensor> set_a, set_b;
  for (int i = 0; i < 6; ++i) {
    set_a.push_back(random_tensor(Shape{1, 3, 16, 16}, rng, 0.4));
    set_b.push_back(Tensor::full(Shape{1, 3, 16, 16}, i % 2 == 0 ? 0.9 : 0.7));
  }
  CHECK(fid_pipeline(set_a, set_a, embedder) < 1e-6);
  CHECK(fid_pipeline(set_a, set_b, embedder) > 0.0);
  std::vector<Tensor> shuffled{set_a[3], set_a[0], set_a[5], set_a[1], set_a[4], set_a[2]};
  CHECK(fid_pipeline(set_a, set_b, embedder) ==
        doctest::Approx(fid_pipeline(shuffled, set_b, embedder)));
  CHECK_THROWS_AS(fid_pipeline({}, set_b, embedder), Error);
}

TEST_CASE("fid_pipeline estimates the analytic distance within 5% at n=1e4, d=8") {
  // Features drawn from two known diagonal Gaussians; the pipeline's
  // gaussian_fit + frechet_distance must land near the closed form.
  const int d = 8, n = 10000;
  Eigen::VectorXd mu_a(d), mu_b(d), var_a(d), var_b(d);
  RngStream setup(3, 0);
  for (int i = 0; i < d; ++i) {
    mu_a(i) = setup.uniform(-1.0, 1.0);
    mu_b(i) = setup.uniform(-1.0, 1.0);
    var_a(i) = setup.uniform(0.5, 2.0);
    var_b(i) = setup.uniform(0.5, 2.0);
  }
  double analytic = (mu_a - mu_b).squaredNorm();
  for (int i = 0; i < d; ++i) {
    double s = std::sqrt(var_a(i)) - std::sqrt(var_b(i));
    analytic += s * s;
  }
  RngStream rng(4, 0);
  Eigen::MatrixXd fa(n, d), fb(n, d);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c) {
      fa(r, c) = mu_a(c) + std::sqrt(var_a(c)) * rng.normal();
      fb(r, c) = mu_b(c) + std::sqrt(var_b(c)) * rng.normal();
    }
  double estimated = frechet_distance(gaussian_fit(fa), gaussian_fit(fb));
  CHECK(std::abs(estimated - analytic) < 0.05 * analytic);
}

TEST_CASE("resize_bicubic preserves constants and shapes") {
  Tensor img(Shape{1, 3, 7, 9}, 0.25);
  Tensor out = resize_bicubic(img, 16, 16);
  CHECK(out.shape() == Shape{1, 3, 16, 16});
  for (int64_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(0.25));
}

TEST_CASE("miou_acc hand cases") {
  LabelMap gt = label_map({{0, 0}, {1, 1}});
  CHECK(miou_acc(gt, gt, 2).miou == doctest::Approx(1.0));
  CHECK(miou_acc(gt, gt, 2).acc == doctest::Approx(1.0));

  LabelMap pred(1, 2, 2, 0);  // all class 0 vs half/half
  MiouResult r = miou_acc(pred, gt, 2);
  CHECK(r.acc == doctest::Approx(0.5));
  CHECK(r.per_class_iou[0] == doctest::Approx(0.5));
  CHECK(r.per_class_iou[1] == doctest::Approx(0.0));
  CHECK(r.miou == doctest::Approx(0.25));

  // Class 2 absent from gt: excluded from the mean.
  MiouResult r3 = miou_acc(pred, gt, 3);
  CHECK_FALSE(r3.present[2]);
  CHECK(r3.miou == doctest::Approx(0.25));

  LabelMap wrong(1, 3, 2, 0);
  CHECK_THROWS_AS(miou_acc(wrong, gt, 2), Error);
}

TEST_CASE("miou_acc is invariant under simultaneous label permutation") {
  RngStream rng(5, 0);
  LabelMap pred = random_labels(1, 8, 8, 3, rng);
  LabelMap gt = random_labels(1, 8, 8, 3, rng);
  MiouResult base = miou_acc(pred, gt, 3);
  const int32_t perm[3] = {1, 2, 0};
  LabelMap pred_p(1, 8, 8), gt_p(1, 8, 8);
  for (int64_t h = 0; h < 8; ++h)
    for (int64_t w = 0; w < 8; ++w) {
      pred_p.at(0, h, w) = perm[pred.at(0, h, w)];
      gt_p.at(0, h, w) = perm[gt.at(0, h, w)];
    }
  MiouResult permuted = miou_acc(pred_p, gt_p, 3);
  CHECK(base.miou == doctest::Approx(permuted.miou));
  CHECK(base.acc == doctest::Approx(permuted.acc));
}

TEST_CASE("conv counting conventions") {
  CHECK(conv_param_count(8, 16, 3) == 1168);  // 8*16*9 + 16
  CHECK(conv_macs(8, 16, 3, 4, 4) == 18432);  // 1152 * 16
  // FLOPs = 2 * MACs is applied by the report assembly.
}

TEST_CASE("analytic counts equal brute-force parameter enumeration") {
  for (bool noise : {false, true}) {
    for (SemanticPath path : {SemanticPath::spade_conv, SemanticPath::clade_sample}) {
      GeneratorSpec spec;
      spec.base_channels = 8;
      spec.num_blocks = 2;
      spec.output_resolution = 32;
      spec.latent_dim = 4;
      spec.hidden_channels = 8;
      spec.num_classes = 3;
      spec.variant.noise_enabled = noise;
      spec.variant.semantic_path = path;
      spec.variant.position_kind = noise ? PositionKind::learnable : PositionKind::none;
      ParamStore store(9);
      Generator gen(store, spec);
      CostReport analytic = count_params_flops(spec);
      CHECK(analytic.params == enumerate_params(store));
      CHECK(analytic.modulation_params == enumerate_modulation_params(store));
    }
  }
  DiscriminatorSpec patch;
  patch.kind = DiscriminatorKind::patch_multiscale;
  patch.scales = 2;
  patch.channels = {8, 16};
  patch.num_classes = 3;
  ParamStore dstore(10);
  PatchDiscriminator pd(dstore, patch);
  CHECK(count_params_flops(patch, 32).params == enumerate_params(dstore));

  DiscriminatorSpec seg;
  seg.kind = DiscriminatorKind::segmentation;
  seg.channels = {8, 16, 32};
  seg.num_classes = 3;
  ParamStore sstore(11);
  SegDiscriminator sd(sstore, seg);
  CHECK(count_params_flops(seg, 32).params == enumerate_params(sstore));
}

TEST_CASE("variant cost directions match the expected ordering") {
  GeneratorSpec base;
  base.base_channels = 16;
  base.num_blocks = 3;
  base.output_resolution = 32;
  base.latent_dim = 8;
  base.hidden_channels = 32;
  base.num_classes = 4;
  base.variant.semantic_path = SemanticPath::spade_conv;

  auto with_mode = [&](CombineMode mode) {
    GeneratorSpec s = base;
    s.variant.noise_enabled = true;
    s.variant.combine_mode = mode;
    s.variant.position_kind = PositionKind::learnable;
    return count_params_flops(s);
  };
  CostReport baseline = count_params_flops(base);
  CostReport concat = with_mode(CombineMode::concat);
  CostReport plus = with_mode(CombineMode::plus);
  CostReport one_channel = with_mode(CombineMode::one_channel);

  CHECK(concat.modulation_params < baseline.modulation_params);
  CHECK(plus.params > concat.params);
  CHECK(one_channel.params <= concat.params);
}

TEST_CASE("palette segmenter closes the metric loop on clean renders") {
  SyntheticSpec spec;
  spec.family = SceneFamily::stripes;
  spec.num_classes = 3;
  spec.resolution = 32;
  spec.count = 6;
  spec.seed = 21;
  spec.colors = {{{-0.8, -0.2, 0.9}}, {{0.3, 0.3, -0.5}}, {{0.9, -0.9, 0.0}}};
  spec.amplitudes = {0.0, 0.0, 0.0};
  auto samples = generate_dataset(spec);
  for (const Sample& s : samples) {
    LabelMap pred = palette_segment(s.image, spec.colors);
    MiouResult r = miou_acc(pred, s.labels, spec.num_classes);
    CHECK(r.acc == doctest::Approx(1.0));
    CHECK(r.miou == doctest::Approx(1.0));
  }
}

TEST_SUITE_END();
