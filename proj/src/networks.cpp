#include "vasis/networks.hpp"

#include <algorithm>
#include <cmath>

namespace vasis {

namespace {
constexpr double kLeakySlope = 0.2;
}

std::vector<int64_t> GeneratorSpec::channel_schedule() const {
  std::vector<int64_t> out;
  for (int64_t i = 0; i <= num_blocks; ++i) {
    int64_t mult = std::min<int64_t>(int64_t{1} << (num_blocks - i), 8);
    out.push_back(base_channels * mult);
  }
  return out;
}

void GeneratorSpec::validate() const {
  VASIS_CHECK(base_channels >= 1 && num_blocks >= 1 && latent_dim >= 1, validation,
              "generator spec fields must be >= 1");
  VASIS_CHECK(num_classes >= 1, validation, "generator spec has no bound class count");
  VASIS_CHECK(output_resolution == (initial_resolution() << num_blocks) &&
                  initial_resolution() >= 1,
              validation, "output resolution " << output_resolution << " is not initial * 2^"
                                               << num_blocks);
  variant.validate(base_channels);
}

Generator::Generator(ParamStore& store, const GeneratorSpec& spec) : spec_(spec) {
  spec_.validate();
  const auto ch = spec_.channel_schedule();
  const int64_t r0 = spec_.initial_resolution();
  fc_w = store.create("g.fc.w", Shape{ch[0], spec_.latent_dim, 1, 1}, 0.0, 0.02);
  fc_b = store.create_constant("g.fc.b", Shape{1, ch[0], 1, 1}, 0.0);
  for (int64_t i = 1; i <= spec_.num_blocks; ++i) {
    int64_t res = r0 << (i - 1);
    blocks_.emplace_back(store, "g.b" + std::to_string(i), spec_.variant, ch[i - 1], ch[i],
                         spec_.num_classes, res, res, spec_.hidden_channels);
  }
  blocks_.emplace_back(store, "g.final", spec_.variant, ch[spec_.num_blocks],
                       ch[spec_.num_blocks], spec_.num_classes, spec_.output_resolution,
                       spec_.output_resolution, spec_.hidden_channels);
  const int64_t k = spec_.variant.kernel_size;
  rgb_w = store.create("g.rgb.w", Shape{3, ch[spec_.num_blocks], k, k}, 0.0, 0.02);
  rgb_b = store.create_constant("g.rgb.b", Shape{1, 3, 1, 1}, 0.0);
}

std::vector<std::string> Generator::block_names() const {
  std::vector<std::string> names{"seed"};
  for (int64_t i = 1; i <= spec_.num_blocks; ++i) names.push_back("b" + std::to_string(i));
  names.push_back("final");
  names.push_back("rgb");
  return names;
}

Var Generator::forward(const Var& latent, const SemanticLayout& layout, RngStream* rng,
                       bool zero_noise, std::vector<BlockTrace>* trace) const {
  const int64_t r0 = spec_.initial_resolution();
  VASIS_CHECK(layout.height() == spec_.output_resolution &&
                  layout.width() == spec_.output_resolution,
              validation, "layout is " << layout.height() << "x" << layout.width()
                                       << ", generator expects " << spec_.output_resolution
                                       << "x" << spec_.output_resolution);
  VASIS_CHECK(latent.shape().c == spec_.latent_dim && latent.shape().h == 1 &&
                  latent.shape().w == 1,
              validation, "latent shape " << latent.shape().str() << " != (B,"
                                          << spec_.latent_dim << ",1,1)");
  VASIS_CHECK(latent.shape().b == layout.batch(), validation,
              "latent batch " << latent.shape().b << " != layout batch " << layout.batch());

  // Layout pyramid, one entry per distinct block resolution.
  std::vector<SemanticLayout> layouts;
  std::vector<LabelMap> labels;
  for (int64_t i = 0; i <= spec_.num_blocks; ++i) {
    int64_t res = r0 << i;
    layouts.push_back(res == spec_.output_resolution ? layout
                                                     : downsample_layout(layout, res, res));
    labels.push_back(layouts.back().argmax());
  }

  auto record = [&](const char* name, const Var& v) {
    if (trace) trace->push_back(BlockTrace{name, v.value()});
  };

  const int64_t batch = latent.shape().b;
  Var x = conv2d(latent, fc_w, fc_b, ConvOpts{1, 0, PaddingMode::zero});
  x = expand(x, Shape{batch, x.shape().c, r0, r0});
  record("seed", x);

  for (int64_t i = 1; i <= spec_.num_blocks; ++i) {
    x = blocks_[static_cast<size_t>(i - 1)].forward(x, layouts[i - 1], labels[i - 1], rng,
                                                    zero_noise);
    record(("b" + std::to_string(i)).c_str(), x);
    x = upsample_nearest2(x);
  }
  x = blocks_.back().forward(x, layouts[spec_.num_blocks], labels[spec_.num_blocks], rng,
                             zero_noise);
  record("final", x);

  const ConvOpts rgb_opts{1, spec_.variant.kernel_size / 2, spec_.variant.padding};
  Var img = tanh_op(conv2d(leaky_relu(x, kLeakySlope), rgb_w, rgb_b, rgb_opts));
  record("rgb", img);
  return img;
}

Tensor Generator::generate(const Tensor& latent, const SemanticLayout& layout, RngStream* rng,
                           bool zero_noise, std::vector<BlockTrace>* trace) const {
  return forward(Var::leaf(latent), layout, rng, zero_noise, trace).value();
}

Tensor Generator::sample_latent(int64_t batch, RngStream& rng) const {
  Tensor z(Shape{batch, spec_.latent_dim, 1, 1});
  rng.fill_normal(z);
  return z;
}

PatchDiscriminator::PatchDiscriminator(ParamStore& store, const DiscriminatorSpec& spec)
    : spec_(spec) {
  VASIS_CHECK(spec.kind == DiscriminatorKind::patch_multiscale, validation,
              "wrong spec kind for PatchDiscriminator");
  VASIS_CHECK(spec.scales >= 1 && !spec.channels.empty(), validation,
              "patch discriminator needs >= 1 scale and a channel schedule");
  const int64_t in_ch = 3 + spec.num_classes;
  for (int64_t s = 0; s < spec.scales; ++s) {
    std::string p = "d.s" + std::to_string(s);
    std::vector<Var> ws, bs;
    int64_t cin = in_ch;
    for (size_t j = 0; j < spec.channels.size(); ++j) {
      int64_t cout = spec.channels[j];
      ws.push_back(store.create(p + ".c" + std::to_string(j) + ".w", Shape{cout, cin, 4, 4},
                                0.0, 0.02));
      bs.push_back(store.create_constant(p + ".c" + std::to_string(j) + ".b",
                                         Shape{1, cout, 1, 1}, 0.0));
      cin = cout;
    }
    ws_.push_back(std::move(ws));
    bs_.push_back(std::move(bs));
    logit_w_.push_back(store.create(p + ".logit.w", Shape{1, cin, 3, 3}, 0.0, 0.02));
    logit_b_.push_back(store.create_constant(p + ".logit.b", Shape{1, 1, 1, 1}, 0.0));
  }
}

std::vector<ScaleOutput> PatchDiscriminator::forward(const Var& image,
                                                     const SemanticLayout& layout) const {
  VASIS_CHECK(image.shape().h == layout.height() && image.shape().w == layout.width() &&
                  image.shape().b == layout.batch(),
              validation, "image " << image.shape().str() << " not aligned with layout ("
                                   << layout.batch() << "," << layout.height() << ","
                                   << layout.width() << ")");
  Var input = concat_channels(image, Var::leaf(layout.data()));
  std::vector<ScaleOutput> out;
  for (int64_t s = 0; s < spec_.scales; ++s) {
    Var x = input;
    for (int64_t p = 0; p < s; ++p) x = avg_pool2(x);
    ScaleOutput so;
    for (size_t j = 0; j < ws_[static_cast<size_t>(s)].size(); ++j) {
      x = leaky_relu(conv2d(x, ws_[static_cast<size_t>(s)][j], bs_[static_cast<size_t>(s)][j],
                            ConvOpts{2, 1, PaddingMode::zero}),
                     kLeakySlope);
      so.features.push_back(x);
    }
    so.logits = conv2d(x, logit_w_[static_cast<size_t>(s)], logit_b_[static_cast<size_t>(s)],
                       ConvOpts{1, 1, PaddingMode::zero});
    out.push_back(std::move(so));
  }
  return out;
}

SegDiscriminator::SegDiscriminator(ParamStore& store, const DiscriminatorSpec& spec)
    : spec_(spec) {
  VASIS_CHECK(spec.kind == DiscriminatorKind::segmentation, validation,
              "wrong spec kind for SegDiscriminator");
  VASIS_CHECK(spec.channels.size() >= 2, validation,
              "segmentation discriminator needs >= 2 encoder stages");
  int64_t cin = 3;
  for (size_t j = 0; j < spec.channels.size(); ++j) {
    int64_t cout = spec.channels[j];
    enc_w_.push_back(store.create("d.enc" + std::to_string(j) + ".w", Shape{cout, cin, 3, 3},
                                  0.0, 0.02));
    enc_b_.push_back(store.create_constant("d.enc" + std::to_string(j) + ".b",
                                           Shape{1, cout, 1, 1}, 0.0));
    cin = cout;
  }
  // Decoder mirrors the encoder; each level consumes the upsampled state
  // concatenated with the matching encoder activation.
  const auto& ch = spec.channels;
  for (size_t j = ch.size() - 1; j-- > 0;) {
    dec_w_.push_back(store.create("d.dec" + std::to_string(j) + ".w",
                                  Shape{ch[j], cin, 3, 3}, 0.0, 0.02));
    dec_b_.push_back(store.create_constant("d.dec" + std::to_string(j) + ".b",
                                           Shape{1, ch[j], 1, 1}, 0.0));
    cin = 2 * ch[j];  // after skip concat
  }
  dec_w_.push_back(store.create("d.dec_out.w", Shape{ch[0], cin, 3, 3}, 0.0, 0.02));
  dec_b_.push_back(store.create_constant("d.dec_out.b", Shape{1, ch[0], 1, 1}, 0.0));
  head_w_ = store.create("d.head.w", Shape{spec.num_classes + 1, ch[0], 1, 1}, 0.0, 0.02);
  head_b_ = store.create_constant("d.head.b", Shape{1, spec.num_classes + 1, 1, 1}, 0.0);
}

Var SegDiscriminator::forward(const Var& image) const {
  VASIS_CHECK(image.value().all_finite(), numeric, "discriminator input not finite");
  std::vector<Var> enc;
  Var x = image;
  for (size_t j = 0; j < enc_w_.size(); ++j) {
    x = leaky_relu(conv2d(x, enc_w_[j], enc_b_[j], ConvOpts{2, 1, PaddingMode::zero}),
                   kLeakySlope);
    enc.push_back(x);
  }
  size_t d = 0;
  for (size_t j = enc.size() - 1; j-- > 0; ++d) {
    x = leaky_relu(conv2d(upsample_nearest2(x), dec_w_[d], dec_b_[d],
                          ConvOpts{1, 1, PaddingMode::zero}),
                   kLeakySlope);
    x = concat_channels(x, enc[j]);
  }
  x = leaky_relu(conv2d(upsample_nearest2(x), dec_w_[d], dec_b_[d],
                        ConvOpts{1, 1, PaddingMode::zero}),
                 kLeakySlope);
  return conv2d(x, head_w_, head_b_, ConvOpts{1, 0, PaddingMode::zero});
}

Var hinge_d_loss(const std::vector<Var>& real_logits, const std::vector<Var>& fake_logits) {
  VASIS_CHECK(!real_logits.empty() && real_logits.size() == fake_logits.size(), validation,
              "hinge_d_loss needs matching non-empty logit lists");
  Var acc;
  for (size_t s = 0; s < real_logits.size(); ++s) {
    VASIS_CHECK(real_logits[s].value().all_finite() && fake_logits[s].value().all_finite(),
                numeric, "hinge_d_loss got non-finite logits");
    Var term = add(mean_all(relu(add_scalar(neg(real_logits[s]), 1.0))),
                   mean_all(relu(add_scalar(fake_logits[s], 1.0))));
    acc = acc.defined() ? add(acc, term) : term;
  }
  return mul_scalar(acc, 1.0 / static_cast<double>(real_logits.size()));
}

Var hinge_g_loss(const std::vector<Var>& fake_logits) {
  VASIS_CHECK(!fake_logits.empty(), validation, "hinge_g_loss needs >= 1 scale");
  Var acc;
  for (const Var& f : fake_logits) {
    Var term = neg(mean_all(f));
    acc = acc.defined() ? add(acc, term) : term;
  }
  return mul_scalar(acc, 1.0 / static_cast<double>(fake_logits.size()));
}

Var feature_matching_loss(const std::vector<std::vector<Var>>& real_feats,
                          const std::vector<std::vector<Var>>& fake_feats) {
  VASIS_CHECK(!real_feats.empty() && real_feats.size() == fake_feats.size(), validation,
              "feature_matching_loss scale count mismatch: " << real_feats.size() << " vs "
                                                             << fake_feats.size());
  Var acc;
  int64_t terms = 0;
  for (size_t s = 0; s < real_feats.size(); ++s) {
    VASIS_CHECK(real_feats[s].size() == fake_feats[s].size() && !real_feats[s].empty(),
                validation, "feature_matching_loss layer count mismatch at scale " << s);
    for (size_t l = 0; l < real_feats[s].size(); ++l) {
      Var term = mean_all(abs_op(sub(real_feats[s][l], fake_feats[s][l])));
      acc = acc.defined() ? add(acc, term) : term;
      ++terms;
    }
  }
  return mul_scalar(acc, 1.0 / static_cast<double>(terms));
}

Var perceptual_loss(const Var& real_image, const Var& fake_image, const ConvPyramid& extractor) {
  std::vector<Var> rs = extractor.stages(detach(real_image));
  std::vector<Var> fs = extractor.stages(fake_image);
  Var acc;
  for (size_t l = 0; l < rs.size(); ++l) {
    Var term = mean_all(abs_op(sub(rs[l], fs[l])));
    acc = acc.defined() ? add(acc, term) : term;
  }
  return mul_scalar(acc, 1.0 / static_cast<double>(rs.size()));
}

std::vector<double> oasis_class_weights(const LabelMap& labels, int64_t num_classes) {
  std::vector<double> counts(static_cast<size_t>(num_classes), 0.0);
  double total = 0.0;
  for (int32_t v : labels.raw()) {
    VASIS_CHECK(v >= 0 && v < num_classes, validation, "label " << v << " out of range");
    counts[static_cast<size_t>(v)] += 1.0;
    total += 1.0;
  }
  std::vector<double> w(static_cast<size_t>(num_classes) + 1, 0.0);
  double present_sum = 0.0;
  int64_t present = 0;
  for (int64_t c = 0; c < num_classes; ++c) {
    if (counts[static_cast<size_t>(c)] > 0.0) {
      w[static_cast<size_t>(c)] = total / counts[static_cast<size_t>(c)];
      present_sum += w[static_cast<size_t>(c)];
      ++present;
    }
  }
  for (int64_t c = 0; c < num_classes; ++c) {
    if (w[static_cast<size_t>(c)] > 0.0)
      w[static_cast<size_t>(c)] *= static_cast<double>(present) / present_sum;
  }
  w.back() = 1.0;  // fake class
  return w;
}

Var oasis_ce_loss(const Var& logits, const LabelMap& labels, CeTarget target,
                  const std::vector<double>& class_weights) {
  const int64_t k = logits.shape().c;
  VASIS_CHECK(static_cast<int64_t>(class_weights.size()) == k, validation,
              "weights size " << class_weights.size() << " != logit channels " << k);
  if (target == CeTarget::fake)
    return softmax_ce_channel(logits, labels, class_weights, /*target_class=*/k - 1);
  return softmax_ce_channel(logits, labels, class_weights);
}

Models::Models(const GeneratorSpec& gs, const DiscriminatorSpec& ds, uint64_t init_seed)
    : g_spec(gs), d_spec(ds), g_params(init_seed), d_params(init_seed ^ 0x5a5a5a5aull) {
  generator = std::make_unique<Generator>(g_params, g_spec);
  if (d_spec.kind == DiscriminatorKind::patch_multiscale)
    patch_d = std::make_unique<PatchDiscriminator>(d_params, d_spec);
  else
    seg_d = std::make_unique<SegDiscriminator>(d_params, d_spec);
  perceptual = std::make_unique<ConvPyramid>(3, std::vector<int64_t>{16, 32, 64},
                                             kPerceptualPyramidSeed);
}

namespace {

double scalar(const Var& v) { return v.value()[0]; }

void check_finite_loss(double v, const char* which, int64_t step) {
  VASIS_CHECK(std::isfinite(v), numeric,
              "non-finite " << which << " loss at step " << step << ": " << v);
}

}  // namespace

StepReport train_step(const Batch& batch, Models& models, AdamOptimizer& opt_g,
                      AdamOptimizer& opt_d, const TrainRecipe& recipe, int64_t step,
                      RngStream rng_latent, RngStream rng_noise) {
  VASIS_CHECK(batch.images.shape().b == batch.layout.batch(), validation,
              "batch image/layout batch mismatch");
  StepReport report;
  report.step = step;
  const bool patch = models.d_spec.kind == DiscriminatorKind::patch_multiscale;
  std::vector<double> seg_weights;
  if (!patch) seg_weights = oasis_class_weights(batch.labels, models.d_spec.num_classes);

  Var real = Var::leaf(batch.images);

  // --- discriminator update ---
  {
    RngStream noise_d = rng_noise.child("d");
    Tensor latent = models.generator->sample_latent(batch.images.shape().b, rng_latent);
    Var fake = detach(models.generator->forward(Var::leaf(latent), batch.layout, &noise_d,
                                                recipe.zero_noise));
    Var d_loss;
    if (patch) {
      auto outs_real = models.patch_d->forward(real, batch.layout);
      auto outs_fake = models.patch_d->forward(fake, batch.layout);
      std::vector<Var> rl, fl;
      for (auto& o : outs_real) rl.push_back(o.logits);
      for (auto& o : outs_fake) fl.push_back(o.logits);
      d_loss = hinge_d_loss(rl, fl);
    } else {
      Var lr = models.seg_d->forward(real);
      Var lf = models.seg_d->forward(fake);
      d_loss = add(oasis_ce_loss(lr, batch.labels, CeTarget::real, seg_weights),
                   oasis_ce_loss(lf, batch.labels, CeTarget::fake, seg_weights));
    }
    report.d_loss = scalar(d_loss);
    check_finite_loss(report.d_loss, "discriminator", step);
    models.d_params.zero_grads();
    backward(d_loss);
    report.d_grad_norm = opt_d.grad_norm(models.d_params.items());
    opt_d.step(models.d_params.items());
  }

  // --- generator update ---
  {
    RngStream noise_g = rng_noise.child("g");
    Tensor latent = models.generator->sample_latent(batch.images.shape().b, rng_latent);
    Var fake = models.generator->forward(Var::leaf(latent), batch.layout, &noise_g,
                                         recipe.zero_noise);
    Var g_loss;
    if (patch) {
      auto outs_real = models.patch_d->forward(real, batch.layout);
      auto outs_fake = models.patch_d->forward(fake, batch.layout);
      std::vector<Var> fl;
      std::vector<std::vector<Var>> rfeat, ffeat;
      for (auto& o : outs_fake) {
        fl.push_back(o.logits);
        ffeat.push_back(o.features);
      }
      for (auto& o : outs_real) {
        std::vector<Var> det;
        for (auto& f : o.features) det.push_back(detach(f));
        rfeat.push_back(std::move(det));
      }
      Var gan = hinge_g_loss(fl);
      report.g_gan = scalar(gan);
      g_loss = mul_scalar(gan, recipe.weight_gan);
      if (recipe.weight_fm > 0.0) {
        Var fm = feature_matching_loss(rfeat, ffeat);
        report.g_fm = scalar(fm);
        g_loss = add(g_loss, mul_scalar(fm, recipe.weight_fm));
      }
      if (recipe.weight_perceptual > 0.0) {
        Var perc = perceptual_loss(real, fake, *models.perceptual);
        report.g_perceptual = scalar(perc);
        g_loss = add(g_loss, mul_scalar(perc, recipe.weight_perceptual));
      }
    } else {
      Var lf = models.seg_d->forward(fake);
      Var gan = oasis_ce_loss(lf, batch.labels, CeTarget::real, seg_weights);
      report.g_gan = scalar(gan);
      g_loss = mul_scalar(gan, recipe.weight_gan);
    }
    report.g_loss = scalar(g_loss);
    check_finite_loss(report.g_loss, "generator", step);
    models.g_params.zero_grads();
    backward(g_loss);
    report.g_grad_norm = opt_g.grad_norm(models.g_params.items());
    opt_g.step(models.g_params.items());
  }

  report.finite = std::isfinite(report.d_loss) && std::isfinite(report.g_loss) &&
                  std::isfinite(report.d_grad_norm) && std::isfinite(report.g_grad_norm);
  return report;
}

}  // namespace vasis
