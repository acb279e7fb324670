#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "vasis/networks.hpp"

using namespace vasis;
using namespace vasis::testing;

TEST_SUITE_BEGIN("networks");

namespace {

GeneratorSpec tiny_gen(int64_t res, int64_t blocks, int64_t base, int64_t classes) {
  GeneratorSpec spec;
  spec.base_channels = base;
  spec.num_blocks = blocks;
  spec.output_resolution = res;
  spec.latent_dim = 4;
  spec.hidden_channels = 8;
  spec.num_classes = classes;
  return spec;
}

}  // namespace

TEST_CASE("generator shape: 4 blocks map 4x4 to 64x64") {
  GeneratorSpec spec = tiny_gen(64, 4, 4, 2);
  CHECK(spec.initial_resolution() == 4);
  ParamStore store(1);
  Generator gen(store, spec);
  SemanticLayout layout = one_hot_encode(LabelMap(1, 64, 64, 0), 2);
  RngStream lr(2, 0);
  Tensor latent = gen.sample_latent(1, lr);
  Tensor img = gen.generate(latent, layout, nullptr, true);
  CHECK(img.shape() == Shape{1, 3, 64, 64});
}

TEST_CASE("generator is deterministic given latent and seed") {
  GeneratorSpec spec = tiny_gen(16, 2, 4, 2);
  spec.variant.noise_enabled = true;
  spec.variant.semantic_path = SemanticPath::clade_sample;
  ParamStore store(3);
  Generator gen(store, spec);
  RngStream lr(4, 0);
  SemanticLayout layout = one_hot_encode(random_labels(1, 16, 16, 2, lr), 2);
  Tensor latent = gen.sample_latent(1, lr);
  RngStream na(5, 1), nb(5, 1);
  Tensor a = gen.generate(latent, layout, &na);
  Tensor b = gen.generate(latent, layout, &nb);
  CHECK(max_abs_diff(a, b) == 0.0);
}

TEST_CASE("generator output is tanh-bounded in [-1,1]") {
  GeneratorSpec spec = tiny_gen(16, 2, 4, 2);
  ParamStore store(6);
  Generator gen(store, spec);
  // Inflate weights to drive pre-activations far out of range.
  for (const auto& [name, v] : store.items())
    for (int64_t i = 0; i < v.value().size(); ++i) v.node()->value[i] *= 50.0;
  RngStream lr(7, 0);
  SemanticLayout layout = one_hot_encode(random_labels(1, 16, 16, 2, lr), 2);
  Tensor latent = gen.sample_latent(1, lr);
  RngStream noise(8, 0);
  Tensor img = gen.generate(latent, layout, &noise);
  for (int64_t i = 0; i < img.size(); ++i) {
    CHECK(img[i] <= 1.0);
    CHECK(img[i] >= -1.0);
  }
}

TEST_CASE("within-class constancy propagates through the deterministic stack") {
  // clade path, noise off, reflect padding: a constant-class layout renders
  // a bitwise-constant image.
  GeneratorSpec spec = tiny_gen(16, 2, 4, 2);
  spec.variant.semantic_path = SemanticPath::clade_sample;
  spec.variant.padding = PaddingMode::reflect;
  ParamStore store(9);
  Generator gen(store, spec);
  SemanticLayout layout = one_hot_encode(LabelMap(1, 16, 16, 1), 2);
  RngStream lr(10, 0);
  Tensor latent = gen.sample_latent(1, lr);
  Tensor img = gen.generate(latent, layout, nullptr, true);
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t h = 0; h < 16; ++h)
      for (int64_t w = 0; w < 16; ++w) CHECK(img.at(0, c, h, w) == img.at(0, c, 0, 0));
}

TEST_CASE("patch discriminator: shapes, features, batch equivariance") {
  DiscriminatorSpec spec;
  spec.kind = DiscriminatorKind::patch_multiscale;
  spec.scales = 2;
  spec.channels = {8, 16, 32};
  spec.num_classes = 2;
  ParamStore store(11);
  PatchDiscriminator d(store, spec);
  RngStream rng(12, 0);
  LabelMap labels = random_labels(2, 64, 64, 2, rng);
  SemanticLayout layout = one_hot_encode(labels, 2);
  Tensor img = random_tensor(Shape{2, 3, 64, 64}, rng, 0.5);
  auto outs = d.forward(Var::leaf(img), layout);
  REQUIRE(outs.size() == 2);
  // Three stride-2 stages: 64 -> 8 at scale 0, 32 -> 4 at scale 1.
  CHECK(outs[0].logits.shape() == Shape{2, 1, 8, 8});
  CHECK(outs[1].logits.shape() == Shape{2, 1, 4, 4});
  CHECK(outs[0].features.size() == 3);

  // Swapping the batch order permutes outputs identically.
  Tensor img_swapped(img.shape());
  LabelMap labels_swapped(2, 64, 64);
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t h = 0; h < 64; ++h)
      for (int64_t w = 0; w < 64; ++w) {
        img_swapped.at(0, c, h, w) = img.at(1, c, h, w);
        img_swapped.at(1, c, h, w) = img.at(0, c, h, w);
      }
  for (int64_t h = 0; h < 64; ++h)
    for (int64_t w = 0; w < 64; ++w) {
      labels_swapped.at(0, h, w) = labels.at(1, h, w);
      labels_swapped.at(1, h, w) = labels.at(0, h, w);
    }
  auto outs_swapped = d.forward(Var::leaf(img_swapped), one_hot_encode(labels_swapped, 2));
  const Tensor& l0 = outs[0].logits.value();
  const Tensor& l0s = outs_swapped[0].logits.value();
  for (int64_t h = 0; h < 8; ++h)
    for (int64_t w = 0; w < 8; ++w) {
      CHECK(l0.at(0, 0, h, w) == l0s.at(1, 0, h, w));
      CHECK(l0.at(1, 0, h, w) == l0s.at(0, 0, h, w));
    }
}

TEST_CASE("segmentation discriminator emits N+1 channels that softmax to 1") {
  DiscriminatorSpec spec;
  spec.kind = DiscriminatorKind::segmentation;
  spec.channels = {8, 16, 32};
  spec.num_classes = 5;
  ParamStore store(13);
  SegDiscriminator d(store, spec);
  RngStream rng(14, 0);
  Tensor img = random_tensor(Shape{2, 3, 64, 64}, rng, 0.5);
  Var logits = d.forward(Var::leaf(img));
  CHECK(logits.shape() == Shape{2, 6, 64, 64});
  const Tensor& lv = logits.value();
  for (int64_t b = 0; b < 2; ++b) {
    double mx = lv.at(b, 0, 7, 9);
    for (int64_t c = 1; c < 6; ++c) mx = std::max(mx, lv.at(b, c, 7, 9));
    double denom = 0.0;
    for (int64_t c = 0; c < 6; ++c) denom += std::exp(lv.at(b, c, 7, 9) - mx);
    double total = 0.0;
    for (int64_t c = 0; c < 6; ++c) total += std::exp(lv.at(b, c, 7, 9) - mx) / denom;
    CHECK(total == doctest::Approx(1.0));
  }
}

TEST_CASE("segmentation discriminator gradient check") {
  DiscriminatorSpec spec;
  spec.kind = DiscriminatorKind::segmentation;
  spec.channels = {4, 8};
  spec.num_classes = 2;
  ParamStore store(15);
  SegDiscriminator d(store, spec);
  RngStream rng(16, 0);
  Tensor img = random_tensor(Shape{1, 3, 8, 8}, rng, 0.5);
  LabelMap labels = random_labels(1, 8, 8, 2, rng);
  std::vector<double> weights = oasis_class_weights(labels, 2);
  auto loss = [&] {
    return oasis_ce_loss(d.forward(Var::leaf(img)), labels, CeTarget::real, weights);
  };
  RngStream pick(17, 0);
  auto samples = pick_param_samples(store.items(), 50, pick);
  CHECK(gradient_check(loss, store.items(), samples) < 1e-4);
}

TEST_CASE("hinge losses match their closed forms") {
  auto mk = [](std::initializer_list<double> vals) {
    Tensor t(Shape{1, 1, 1, static_cast<int64_t>(vals.size())});
    int64_t i = 0;
    for (double v : vals) t[i++] = v;
    return Var::leaf(t);
  };
  // Margins satisfied -> 0.
  CHECK(hinge_d_loss({mk({1.0, 2.0})}, {mk({-1.0, -3.0})}).value()[0] == doctest::Approx(0.0));
  // Zero logits -> 1 + 1 = 2.
  CHECK(hinge_d_loss({mk({0.0, 0.0})}, {mk({0.0, 0.0})}).value()[0] == doctest::Approx(2.0));
  // Nonnegative for random inputs.
  RngStream rng(18, 0);
  for (int rep = 0; rep < 10; ++rep) {
    Var r = Var::leaf(random_tensor(Shape{1, 1, 3, 3}, rng, 2.0));
    Var f = Var::leaf(random_tensor(Shape{1, 1, 3, 3}, rng, 2.0));
    CHECK(hinge_d_loss({r}, {f}).value()[0] >= 0.0);
  }
  CHECK(hinge_g_loss({mk({2.0, 2.0})}).value()[0] == doctest::Approx(-2.0));
  CHECK(hinge_g_loss({mk({0.0, 0.0})}).value()[0] == doctest::Approx(0.0));
  // Linearity: scaling logits scales the loss.
  Var f = Var::leaf(random_tensor(Shape{1, 1, 2, 2}, rng));
  double base = hinge_g_loss({f}).value()[0];
  CHECK(hinge_g_loss({mul_scalar(f, 3.0)}).value()[0] == doctest::Approx(3.0 * base));
}

TEST_CASE("feature matching loss: zero, offset, structure errors") {
  RngStream rng(19, 0);
  std::vector<std::vector<Var>> feats(2);
  for (int s = 0; s < 2; ++s)
    for (int l = 0; l < 3; ++l)
      feats[static_cast<size_t>(s)].push_back(Var::leaf(random_tensor(Shape{1, 2, 3, 3}, rng)));
  CHECK(feature_matching_loss(feats, feats).value()[0] == 0.0);

  std::vector<std::vector<Var>> shifted(2);
  for (int s = 0; s < 2; ++s)
    for (int l = 0; l < 3; ++l)
      shifted[static_cast<size_t>(s)].push_back(add_scalar(feats[static_cast<size_t>(s)][static_cast<size_t>(l)], 0.25));
  CHECK(feature_matching_loss(feats, shifted).value()[0] == doctest::Approx(0.25));

  std::vector<std::vector<Var>> truncated{feats[0]};
  CHECK_THROWS_AS(feature_matching_loss(feats, truncated), Error);
}

TEST_CASE("perceptual loss: identity, symmetry, interpolation monotonicity") {
  ConvPyramid extractor(3, {4, 8}, 123);
  RngStream rng(20, 0);
  Tensor a = random_tensor(Shape{1, 3, 16, 16}, rng, 0.5);
  Tensor b = random_tensor(Shape{1, 3, 16, 16}, rng, 0.5);
  CHECK(perceptual_loss(Var::leaf(a), Var::leaf(a), extractor).value()[0] == 0.0);
  double ab = perceptual_loss(Var::leaf(a), Var::leaf(b), extractor).value()[0];
  double ba = perceptual_loss(Var::leaf(b), Var::leaf(a), extractor).value()[0];
  CHECK(ab == doctest::Approx(ba));
  // Interpolating toward the target decreases the loss at 3 sampled points.
  double prev = ab;
  for (double t : {0.5, 0.25, 0.0}) {
    Tensor mix(a.shape());
    for (int64_t i = 0; i < mix.size(); ++i) mix[i] = a[i] + t * (b[i] - a[i]);
    double v = perceptual_loss(Var::leaf(a), Var::leaf(mix), extractor).value()[0];
    CHECK(v <= prev + 1e-12);
    prev = v;
  }
}

TEST_CASE("oasis cross entropy: perfect logits, uniform logits, weighting") {
  LabelMap labels = label_map({{0, 1}, {2, 0}});
  std::vector<double> unit(4, 1.0);

  Tensor sharp(Shape{1, 4, 2, 2}, 0.0);
  for (int64_t h = 0; h < 2; ++h)
    for (int64_t w = 0; w < 2; ++w) sharp.at(0, labels.at(0, h, w), h, w) = 50.0;
  CHECK(oasis_ce_loss(Var::leaf(sharp), labels, CeTarget::real, unit).value()[0] ==
        doctest::Approx(0.0).epsilon(1e-6));

  Tensor uniform(Shape{1, 4, 2, 2}, 0.3);
  CHECK(oasis_ce_loss(Var::leaf(uniform), labels, CeTarget::real, unit).value()[0] ==
        doctest::Approx(std::log(4.0)));
  CHECK(oasis_ce_loss(Var::leaf(uniform), labels, CeTarget::fake, unit).value()[0] ==
        doctest::Approx(std::log(4.0)));

  // Inverse-frequency weights: the rare class outweighs the dominant one.
  LabelMap skewed(1, 4, 4, 0);
  skewed.at(0, 0, 0) = 1;
  std::vector<double> w = oasis_class_weights(skewed, 3);
  CHECK(w[1] > w[0]);
  CHECK(w[2] == 0.0);  // absent
  CHECK(w[3] == 1.0);  // fake class
  CHECK((w[0] + w[1]) / 2.0 == doctest::Approx(1.0));
}

namespace {

Batch make_test_batch(int64_t res, int64_t classes, uint64_t seed) {
  RngStream rng(seed, 0);
  Batch batch;
  batch.labels = random_labels(2, res, res, classes, rng);
  batch.layout = one_hot_encode(batch.labels, classes);
  batch.images = random_tensor(Shape{2, 3, res, res}, rng, 0.3);
  for (int64_t i = 0; i < batch.images.size(); ++i)
    batch.images[i] = std::tanh(batch.images[i]);
  return batch;
}

Models make_test_models(DiscriminatorKind kind, uint64_t seed) {
  GeneratorSpec gs = tiny_gen(16, 2, 4, 2);
  gs.variant.noise_enabled = true;
  gs.variant.semantic_path = SemanticPath::clade_sample;
  DiscriminatorSpec ds;
  ds.kind = kind;
  ds.scales = 2;
  ds.channels = {4, 8};
  ds.num_classes = 2;
  return Models(gs, ds, seed);
}

}  // namespace

TEST_CASE("train_step is deterministic and respects lr=0") {
  Batch batch = make_test_batch(16, 2, 21);
  TrainRecipe recipe;
  recipe.weight_perceptual = 1.0;

  SUBCASE("two runs from one seed give identical reports and weights") {
    StepReport ra, rb;
    Tensor wa, wb;
    for (int run = 0; run < 2; ++run) {
      Models models = make_test_models(DiscriminatorKind::patch_multiscale, 22);
      AdamOptimizer og(recipe.lr_g, recipe.beta1, recipe.beta2);
      AdamOptimizer od(recipe.lr_d, recipe.beta1, recipe.beta2);
      StepReport r = train_step(batch, models, og, od, recipe, 1, RngStream(23, 1),
                                RngStream(23, 2));
      if (run == 0) {
        ra = r;
        wa = models.g_params.items()[0].second.value();
      } else {
        rb = r;
        wb = models.g_params.items()[0].second.value();
      }
    }
    CHECK(ra.d_loss == rb.d_loss);
    CHECK(ra.g_loss == rb.g_loss);
    CHECK(ra.g_grad_norm == rb.g_grad_norm);
    CHECK(max_abs_diff(wa, wb) == 0.0);
  }

  SUBCASE("lr=0 leaves every parameter unchanged") {
    Models models = make_test_models(DiscriminatorKind::patch_multiscale, 24);
    std::vector<Tensor> before;
    for (const auto& [name, v] : models.g_params.items()) before.push_back(v.value());
    AdamOptimizer og(0.0, recipe.beta1, recipe.beta2);
    AdamOptimizer od(0.0, recipe.beta1, recipe.beta2);
    train_step(batch, models, og, od, recipe, 1, RngStream(25, 1), RngStream(25, 2));
    size_t i = 0;
    for (const auto& [name, v] : models.g_params.items())
      CHECK(max_abs_diff(before[i++], v.value()) == 0.0);
  }

  SUBCASE("parameters move under a positive learning rate") {
    Models models = make_test_models(DiscriminatorKind::segmentation, 26);
    Tensor before = models.g_params.find("g.fc.w").value();
    AdamOptimizer og(1e-3, recipe.beta1, recipe.beta2);
    AdamOptimizer od(1e-3, recipe.beta1, recipe.beta2);
    train_step(batch, models, og, od, recipe, 1, RngStream(27, 1), RngStream(27, 2));
    CHECK(max_abs_diff(before, models.g_params.find("g.fc.w").value()) > 0.0);
  }
}

TEST_CASE("loss signs: everything nonnegative except the generator hinge") {
  RngStream rng(33, 0);
  ConvPyramid extractor(3, {4}, 5);
  for (int rep = 0; rep < 8; ++rep) {
    Var a = Var::leaf(random_tensor(Shape{1, 3, 8, 8}, rng));
    Var b = Var::leaf(random_tensor(Shape{1, 3, 8, 8}, rng));
    CHECK(perceptual_loss(a, b, extractor).value()[0] >= 0.0);
    std::vector<std::vector<Var>> fa{{a}}, fb{{b}};
    CHECK(feature_matching_loss(fa, fb).value()[0] >= 0.0);
    Var logits = Var::leaf(random_tensor(Shape{1, 3, 4, 4}, rng, 2.0));
    LabelMap labels = random_labels(1, 4, 4, 2, rng);
    CHECK(oasis_ce_loss(logits, labels, CeTarget::real, oasis_class_weights(labels, 2))
              .value()[0] >= 0.0);
  }
}

TEST_CASE("200 training steps on a tiny model keep losses finite") {
  Batch batch = make_test_batch(16, 2, 30);
  Models models = make_test_models(DiscriminatorKind::patch_multiscale, 31);
  TrainRecipe recipe;
  recipe.weight_perceptual = 1.0;
  AdamOptimizer og(recipe.lr_g, recipe.beta1, recipe.beta2);
  AdamOptimizer od(recipe.lr_d, recipe.beta1, recipe.beta2);
  for (int64_t step = 1; step <= 200; ++step) {
    StepReport r = train_step(batch, models, og, od, recipe, step,
                              RngStream(32, 1).child(static_cast<uint64_t>(step)),
                              RngStream(32, 2).child(static_cast<uint64_t>(step)));
    REQUIRE(r.finite);
  }
}

TEST_SUITE_END();
