#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "vasis/noise_position.hpp"

using namespace vasis;
using namespace vasis::testing;

TEST_SUITE_BEGIN("noise_position");

namespace {

SemanticNoiseParams banks_from(const Tensor& n1, const Tensor& n2) {
  return SemanticNoiseParams(ClassParamBank::from_tensor(n1), ClassParamBank::from_tensor(n2));
}

}  // namespace

TEST_CASE("zero scale kills the noise, shift passes through") {
  Tensor n1(Shape{2, 3, 1, 1}, 0.0);
  Tensor n2(Shape{2, 3, 1, 1}, 0.0);
  for (int64_t c = 0; c < 3; ++c) n2.at(1, c, 0, 0) = 5.0;
  SemanticNoiseParams params = banks_from(n1, n2);
  SemanticLayout layout = one_hot_encode(label_map({{0, 1}, {1, 1}}), 2);
  RngStream rng(1, 0);
  Tensor out = sample_semantic_noise(layout, params, rng);
  CHECK(out.at(0, 0, 0, 0) == 0.0);
  for (int64_t c = 0; c < 3; ++c) {
    CHECK(out.at(0, c, 0, 1) == 5.0);
    CHECK(out.at(0, c, 1, 0) == 5.0);
    CHECK(out.at(0, c, 1, 1) == 5.0);
  }
}

TEST_CASE("unit scale gives standard-normal statistics over 1e5 draws") {
  Tensor n1(Shape{1, 2, 1, 1}, 1.0);
  Tensor n2(Shape{1, 2, 1, 1}, 0.0);
  SemanticNoiseParams params = banks_from(n1, n2);
  SemanticLayout layout = one_hot_encode(LabelMap(1, 32, 32, 0), 1);
  RngStream rng(2, 0);
  double sum = 0.0, sumsq = 0.0;
  int64_t n = 0;
  for (int rep = 0; rep < 49; ++rep) {  // 49 * 2*32*32 ≈ 1e5 draws
    Tensor out = sample_semantic_noise(layout, params, rng);
    for (int64_t i = 0; i < out.size(); ++i) {
      sum += out[i];
      sumsq += out[i] * out[i];
      ++n;
    }
  }
  double mean = sum / static_cast<double>(n);
  double std = std::sqrt(sumsq / static_cast<double>(n) - mean * mean);
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(std - 1.0) < 0.02);
}

TEST_CASE("fixed seed reproduces the noise bitwise") {
  RngStream rng_a(3, 7), rng_b(3, 7);
  Tensor n1(Shape{2, 4, 1, 1}, 0.5);
  Tensor n2(Shape{2, 4, 1, 1}, -0.25);
  SemanticNoiseParams params = banks_from(n1, n2);
  RngStream lr(4, 0);
  SemanticLayout layout = one_hot_encode(random_labels(2, 6, 6, 2, lr), 2);
  Tensor a = sample_semantic_noise(layout, params, rng_a);
  Tensor b = sample_semantic_noise(layout, params, rng_b);
  CHECK(max_abs_diff(a, b) == 0.0);
}

TEST_CASE("noise rejects class/row mismatch") {
  Tensor n1(Shape{2, 4, 1, 1}, 1.0);
  SemanticNoiseParams params = banks_from(n1, n1);
  SemanticLayout layout = one_hot_encode(LabelMap(1, 4, 4, 0), 3);
  RngStream rng(5, 0);
  CHECK_THROWS_AS(sample_semantic_noise(layout, params, rng), Error);
}

TEST_CASE("per-class Monte-Carlo statistics stay in confidence bands") {
  // mean -> n2 row, std -> |n1 row|, within 5 standard errors.
  Tensor n1(Shape{2, 2, 1, 1});
  n1.at(0, 0, 0, 0) = 0.7;
  n1.at(0, 1, 0, 0) = -0.3;
  n1.at(1, 0, 0, 0) = 1.5;
  n1.at(1, 1, 0, 0) = 0.0;
  Tensor n2(Shape{2, 2, 1, 1});
  n2.at(0, 0, 0, 0) = 2.0;
  n2.at(0, 1, 0, 0) = -1.0;
  n2.at(1, 0, 0, 0) = 0.25;
  n2.at(1, 1, 0, 0) = 3.0;
  SemanticNoiseParams params = banks_from(n1, n2);
  LabelMap labels(1, 64, 64, 0);
  for (int64_t h = 32; h < 64; ++h)
    for (int64_t w = 0; w < 64; ++w) labels.at(0, h, w) = 1;
  SemanticLayout layout = one_hot_encode(labels, 2);
  RngStream rng(6, 0);
  const int reps = 25;  // 25 * 2048 pixels per class > 5e4 draws per entry
  for (int64_t cls = 0; cls < 2; ++cls) {
    for (int64_t c = 0; c < 2; ++c) {
      double sum = 0.0, sumsq = 0.0;
      int64_t n = 0;
      RngStream local = rng.child(static_cast<uint64_t>(cls * 2 + c));
      for (int rep = 0; rep < reps; ++rep) {
        Tensor out = sample_semantic_noise(layout, params, local);
        for (int64_t h = 0; h < 64; ++h)
          for (int64_t w = 0; w < 64; ++w) {
            if (labels.at(0, h, w) != cls) continue;
            double v = out.at(0, c, h, w);
            sum += v;
            sumsq += v * v;
            ++n;
          }
      }
      double mean = sum / static_cast<double>(n);
      double std = std::sqrt(std::max(0.0, sumsq / static_cast<double>(n) - mean * mean));
      double expect_mean = n2.at(cls, c, 0, 0);
      double expect_std = std::abs(n1.at(cls, c, 0, 0));
      double se_mean = expect_std / std::sqrt(static_cast<double>(n));
      // std estimator SE ~ sigma / sqrt(2n)
      double se_std = expect_std / std::sqrt(2.0 * static_cast<double>(n)) + 1e-9;
      CHECK(std::abs(mean - expect_mean) < 5.0 * se_mean + 1e-12);
      CHECK(std::abs(std - expect_std) < 5.0 * se_std + 1e-12);
    }
  }
}

TEST_CASE("distinct shifts with zero scale are an exact class recoloring") {
  Tensor n1(Shape{3, 2, 1, 1}, 0.0);
  Tensor n2(Shape{3, 2, 1, 1});
  for (int64_t r = 0; r < 3; ++r)
    for (int64_t c = 0; c < 2; ++c) n2.at(r, c, 0, 0) = static_cast<double>(r * 10 + c);
  SemanticNoiseParams params = banks_from(n1, n2);
  RngStream lr(7, 0);
  LabelMap labels = random_labels(1, 8, 8, 3, lr);
  SemanticLayout layout = one_hot_encode(labels, 3);
  RngStream rng(8, 0);
  Tensor out = sample_semantic_noise(layout, params, rng);
  for (int64_t h1 = 0; h1 < 8; ++h1)
    for (int64_t w1 = 0; w1 < 8; ++w1)
      for (int64_t h2 = 0; h2 < 8; ++h2)
        for (int64_t w2 = 0; w2 < 8; ++w2) {
          bool same = labels.at(0, h1, w1) == labels.at(0, h2, w2);
          bool equal = out.at(0, 0, h1, w1) == out.at(0, 0, h2, w2) &&
                       out.at(0, 1, h1, w1) == out.at(0, 1, h2, w2);
          CHECK(same == equal);
        }
}

TEST_CASE("absolute code is the affine grid") {
  PositionCode code = absolute_code(3, 3);
  const Tensor& d = code.data.value();
  for (int64_t w = 0; w < 3; ++w) {
    CHECK(d.at(0, 0, 0, w) == doctest::Approx(-1.0));
    CHECK(d.at(0, 0, 1, w) == doctest::Approx(0.0));
    CHECK(d.at(0, 0, 2, w) == doctest::Approx(1.0));
  }
  for (int64_t h = 0; h < 3; ++h) {
    CHECK(d.at(0, 1, h, 0) == doctest::Approx(-1.0));
    CHECK(d.at(0, 1, h, 2) == doctest::Approx(1.0));
  }
}

TEST_CASE("absolute code degenerate axis is zero") {
  PositionCode code = absolute_code(1, 3);
  const Tensor& d = code.data.value();
  for (int64_t w = 0; w < 3; ++w) CHECK(d.at(0, 0, 0, w) == 0.0);
  CHECK(d.at(0, 1, 0, 0) == doctest::Approx(-1.0));
  CHECK(d.at(0, 1, 0, 1) == doctest::Approx(0.0));
  CHECK(d.at(0, 1, 0, 2) == doctest::Approx(1.0));
}

TEST_CASE("absolute code has zero channel mean for any h,w") {
  for (auto [h, w] : {std::pair<int64_t, int64_t>{4, 4}, {5, 7}, {1, 9}, {8, 3}}) {
    PositionCode code = absolute_code(h, w);
    const Tensor& d = code.data.value();
    for (int64_t c = 0; c < 2; ++c) {
      double mean = 0.0;
      for (int64_t j = 0; j < h; ++j)
        for (int64_t k = 0; k < w; ++k) mean += d.at(0, c, j, k);
      CHECK(std::abs(mean / static_cast<double>(h * w)) < 1e-12);
    }
  }
}

TEST_CASE("relative code on a 3x3 single class") {
  SemanticLayout layout = one_hot_encode(LabelMap(1, 3, 3, 0), 1);
  PositionCode code = relative_code(layout);
  const Tensor& d = code.data.value();
  for (int64_t w = 0; w < 3; ++w) {
    CHECK(d.at(0, 0, 0, w) == doctest::Approx(-1.0));
    CHECK(d.at(0, 0, 1, w) == doctest::Approx(0.0));
    CHECK(d.at(0, 0, 2, w) == doctest::Approx(1.0));
  }
  for (int64_t h = 0; h < 3; ++h) {
    CHECK(d.at(0, 1, h, 0) == doctest::Approx(-1.0));
    CHECK(d.at(0, 1, h, 1) == doctest::Approx(0.0));
    CHECK(d.at(0, 1, h, 2) == doctest::Approx(1.0));
  }
}

TEST_CASE("relative code is zero on a single-pixel class") {
  LabelMap labels(1, 3, 3, 0);
  labels.at(0, 1, 2) = 1;
  PositionCode code = relative_code(one_hot_encode(labels, 2));
  CHECK(code.data.value().at(0, 0, 1, 2) == 0.0);
  CHECK(code.data.value().at(0, 1, 1, 2) == 0.0);
}

TEST_CASE("relative code computes per-class centroids independently") {
  // Left half class 0, right half class 1 on a 4x4 grid; brute-force oracle.
  LabelMap labels = label_map({{0, 0, 1, 1}, {0, 0, 1, 1}, {0, 0, 1, 1}, {0, 0, 1, 1}});
  PositionCode code = relative_code(one_hot_encode(labels, 2));
  const Tensor& d = code.data.value();
  // Each half: columns {0,1} or {2,3}, centroid col 0.5 / 2.5, max offset 0.5.
  for (int64_t h = 0; h < 4; ++h) {
    CHECK(d.at(0, 1, h, 0) == doctest::Approx(-1.0));
    CHECK(d.at(0, 1, h, 1) == doctest::Approx(1.0));
    CHECK(d.at(0, 1, h, 2) == doctest::Approx(-1.0));
    CHECK(d.at(0, 1, h, 3) == doctest::Approx(1.0));
  }
  // Row axis: centroid row 1.5, offsets {-1.5,-0.5,0.5,1.5}/1.5.
  for (int64_t w = 0; w < 4; ++w) {
    CHECK(d.at(0, 0, 0, w) == doctest::Approx(-1.0));
    CHECK(d.at(0, 0, 1, w) == doctest::Approx(-1.0 / 3.0));
  }
}

TEST_CASE("relative code is translation-covariant away from borders") {
  LabelMap a(1, 8, 8, 0);
  for (int64_t h = 1; h < 4; ++h)
    for (int64_t w = 1; w < 4; ++w) a.at(0, h, w) = 1;
  LabelMap b(1, 8, 8, 0);
  for (int64_t h = 3; h < 6; ++h)
    for (int64_t w = 4; w < 7; ++w) b.at(0, h, w) = 1;
  Tensor ca = relative_code(one_hot_encode(a, 2)).data.value();
  Tensor cb = relative_code(one_hot_encode(b, 2)).data.value();
  for (int64_t c = 0; c < 2; ++c)
    for (int64_t h = 0; h < 3; ++h)
      for (int64_t w = 0; w < 3; ++w)
        CHECK(ca.at(0, c, 1 + h, 1 + w) == doctest::Approx(cb.at(0, c, 3 + h, 4 + w)));
}

TEST_CASE("learnable code init is deterministic with matching std") {
  RngStream a(21, 1), b(21, 1);
  PositionCode ca = learnable_code_init(64, 64, a);
  PositionCode cb = learnable_code_init(64, 64, b);
  CHECK(max_abs_diff(ca.data.value(), cb.data.value()) == 0.0);
  CHECK(ca.data.requires_grad());
  double sum = 0.0, sumsq = 0.0;
  const Tensor& d = ca.data.value();
  for (int64_t i = 0; i < d.size(); ++i) {
    sum += d[i];
    sumsq += d[i] * d[i];
  }
  double mean = sum / static_cast<double>(d.size());
  double std = std::sqrt(sumsq / static_cast<double>(d.size()) - mean * mean);
  CHECK(std > 0.015);
  CHECK(std < 0.025);
}

TEST_CASE("learnable code receives gradient and changes after one step") {
  RngStream rng(22, 1);
  PositionCode code = learnable_code_init(4, 4, rng);
  Tensor before = code.data.value();
  Var loss = mean_all(mul(code.data, code.data));
  code.data.zero_grad();
  backward(loss);
  Tensor& v = code.data.node()->value;
  const Tensor& g = code.data.grad();
  for (int64_t i = 0; i < v.size(); ++i) v[i] -= 0.1 * g[i];
  CHECK(max_abs_diff(before, code.data.value()) > 0.0);
}

TEST_CASE("project_code with zero weights yields the bias") {
  ParamStore store(31);
  PositionProjectionParams proj(store, "p", 4, 3, PaddingMode::zero, 0.75);
  proj.w.node()->value.fill(0.0);
  Tensor out = project_code(absolute_code(5, 5), proj);
  for (int64_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(0.75));
}

TEST_CASE("project_code 1x1 identity kernel picks the row channel") {
  ParamStore store(32);
  PositionProjectionParams proj(store, "p", 1, 1, PaddingMode::zero, 0.0);
  proj.w.node()->value.fill(0.0);
  proj.w.node()->value.at(0, 0, 0, 0) = 1.0;  // channel 0 = row code
  proj.b.node()->value.fill(0.0);
  PositionCode code = absolute_code(3, 3);
  Tensor out = project_code(code, proj);
  for (int64_t h = 0; h < 3; ++h)
    for (int64_t w = 0; w < 3; ++w)
      CHECK(out.at(0, 0, h, w) == code.data.value().at(0, 0, h, w));
}

TEST_CASE("project_code rejects non-2-channel codes") {
  ParamStore store(33);
  PositionProjectionParams proj(store, "p", 2, 3, PaddingMode::zero, 1.0);
  PositionCode bad{PositionKind::absolute, Var::leaf(Tensor(Shape{1, 3, 4, 4}))};
  CHECK_THROWS_AS(project_code(bad, proj), Error);
}

TEST_CASE("monotonicity_check classifies the three codes") {
  CHECK(monotonicity_check(absolute_code(8, 8), PositionAxis::row));
  CHECK(monotonicity_check(absolute_code(8, 8), PositionAxis::col));
  // Random learnable codes are non-monotone with overwhelming probability.
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    RngStream rng(seed, 0);
    PositionCode code = learnable_code_init(8, 8, rng);
    CHECK_FALSE(monotonicity_check(code, PositionAxis::row));
  }
  PositionCode constant{PositionKind::learnable, Var::leaf(Tensor(Shape{1, 2, 4, 4}, 0.3))};
  CHECK(monotonicity_check(constant, PositionAxis::row));
  // Relative code is monotone on a single-class layout.
  PositionCode rel = relative_code(one_hot_encode(LabelMap(1, 6, 6, 0), 1));
  CHECK(monotonicity_check(rel, PositionAxis::row));
  CHECK(monotonicity_check(rel, PositionAxis::col));
}

TEST_CASE("relative code is recomputed per layout; absolute/learnable are layout-free") {
  // relative_code is a function of the layout: a changed layout changes it.
  LabelMap a(1, 4, 4, 0);
  LabelMap b(1, 4, 4, 0);
  b.at(0, 0, 0) = 1;
  Tensor ra = relative_code(one_hot_encode(a, 2)).data.value();
  Tensor rb = relative_code(one_hot_encode(b, 2)).data.value();
  CHECK(max_abs_diff(ra, rb) > 0.0);
  // absolute_code's signature admits no layout; equal dims, equal code.
  Tensor a1 = absolute_code(4, 4).data.value();
  Tensor a2 = absolute_code(4, 4).data.value();
  CHECK(max_abs_diff(a1, a2) == 0.0);
}

TEST_SUITE_END();
