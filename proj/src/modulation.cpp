#include "vasis/modulation.hpp"

#include <cmath>

namespace vasis {

BatchStats batch_stats(const Tensor& x, double eps) {
  VASIS_CHECK(eps > 0.0, validation, "batch_stats needs eps > 0, got " << eps);
  VASIS_CHECK(x.all_finite(), numeric, "batch_stats input contains non-finite values");
  const Shape s = x.shape();
  Tensor mu(Shape{1, s.c, 1, 1});
  kernels::channel_mean_kernel(x, /*per_sample=*/false, mu);
  Tensor sq(s);
  for (int64_t b = 0; b < s.b; ++b)
    for (int64_t c = 0; c < s.c; ++c)
      for (int64_t h = 0; h < s.h; ++h)
        for (int64_t w = 0; w < s.w; ++w) {
          double d = x.at(b, c, h, w) - mu.at(0, c, 0, 0);
          sq.at(b, c, h, w) = d * d;
        }
  Tensor var(Shape{1, s.c, 1, 1});
  kernels::channel_mean_kernel(sq, /*per_sample=*/false, var);
  BatchStats out;
  out.mu.resize(static_cast<size_t>(s.c));
  out.sigma.resize(static_cast<size_t>(s.c));
  for (int64_t c = 0; c < s.c; ++c) {
    out.mu[static_cast<size_t>(c)] = mu.at(0, c, 0, 0);
    out.sigma[static_cast<size_t>(c)] = std::sqrt(var.at(0, c, 0, 0) + eps);
  }
  return out;
}

Tensor denormalize(const Tensor& x, const BatchStats& stats, const ModulationPair& mods) {
  const Shape s = x.shape();
  VASIS_CHECK(mods.gamma.shape() == mods.beta.shape(), validation,
              "gamma shape " << mods.gamma.shape().str() << " != beta shape "
                             << mods.beta.shape().str());
  VASIS_CHECK(mods.gamma.shape() == s, validation,
              "modulation shape " << mods.gamma.shape().str() << " != feature shape "
                                  << s.str());
  VASIS_CHECK(static_cast<int64_t>(stats.mu.size()) == s.c, validation,
              "stats channel count " << stats.mu.size() << " != feature channels " << s.c);
  for (double sg : stats.sigma)
    VASIS_CHECK(sg > 0.0, validation, "sigma must be > 0, got " << sg);

  Tensor out(s);
  for (int64_t b = 0; b < s.b; ++b)
    for (int64_t c = 0; c < s.c; ++c) {
      const double mu = stats.mu[static_cast<size_t>(c)];
      const double sigma = stats.sigma[static_cast<size_t>(c)];
      for (int64_t h = 0; h < s.h; ++h)
        for (int64_t w = 0; w < s.w; ++w) {
          double t = (x.at(b, c, h, w) - mu) / sigma;
          out.at(b, c, h, w) = mods.gamma.at(b, c, h, w) * t + mods.beta.at(b, c, h, w);
        }
    }
  return out;
}

SpadeModulationParams::SpadeModulationParams(ParamStore& store, const std::string& prefix,
                                             int64_t num_classes, int64_t hidden_channels,
                                             int64_t out_channels, int64_t kernel_size,
                                             PaddingMode padding)
    : num_classes(num_classes),
      hidden_channels(hidden_channels),
      out_channels(out_channels),
      kernel_size(kernel_size),
      padding(padding) {
  VASIS_CHECK(kernel_size == 1 || kernel_size == 3, validation,
              "modulation kernel_size must be 1 or 3, got " << kernel_size);
  f1_w = store.create(prefix + ".f1.w", Shape{hidden_channels, num_classes, kernel_size, kernel_size},
                      0.0, 0.02);
  f1_b = store.create_constant(prefix + ".f1.b", Shape{1, hidden_channels, 1, 1}, 0.0);
  f2_w = store.create(prefix + ".f2.w", Shape{out_channels, hidden_channels, kernel_size, kernel_size},
                      0.0, 0.02);
  // Gamma head bias starts at 1 so the layer is near-identity at init.
  f2_b = store.create_constant(prefix + ".f2.b", Shape{1, out_channels, 1, 1}, 1.0);
  f3_w = store.create(prefix + ".f3.w", Shape{out_channels, hidden_channels, kernel_size, kernel_size},
                      0.0, 0.02);
  f3_b = store.create_constant(prefix + ".f3.b", Shape{1, out_channels, 1, 1}, 0.0);
}

std::pair<Var, Var> spade_modulation_vars(const SemanticLayout& layout,
                                          const SpadeModulationParams& params) {
  VASIS_CHECK(layout.num_classes() == params.num_classes, validation,
              "layout classes " << layout.num_classes() << " != trunk in-channels "
                                << params.num_classes);
  Var s = Var::leaf(layout.data());
  ConvOpts o = params.conv_opts();
  Var hidden = relu(conv2d(s, params.f1_w, params.f1_b, o));
  Var gamma = conv2d(hidden, params.f2_w, params.f2_b, o);
  Var beta = conv2d(hidden, params.f3_w, params.f3_b, o);
  return {gamma, beta};
}

ModulationPair spade_modulation(const SemanticLayout& layout,
                                const SpadeModulationParams& params) {
  auto [gamma, beta] = spade_modulation_vars(layout, params);
  return ModulationPair{gamma.value(), beta.value()};
}

ClassParamBank::ClassParamBank(ParamStore& store, const std::string& name, int64_t rows,
                               int64_t cols, double mean, double stddev) {
  table = store.create(name, Shape{rows, cols, 1, 1}, mean, stddev);
}

ClassParamBank ClassParamBank::from_tensor(Tensor rows_by_cols) {
  return ClassParamBank(Var::leaf(std::move(rows_by_cols)));
}

Var guided_sample_vars(const LabelMap& labels, const ClassParamBank& bank) {
  return rows_lookup(bank.table, labels);
}

Tensor guided_sample(const SemanticLayout& layout, const ClassParamBank& bank) {
  VASIS_CHECK(bank.rows() == layout.num_classes(), validation,
              "bank rows " << bank.rows() << " != layout classes " << layout.num_classes());
  return guided_sample_vars(layout.argmax(), bank).value();
}

Var normalize_denormalize_vars(const Var& x, const Var& gamma, const Var& beta, double eps,
                               bool per_sample) {
  VASIS_CHECK(eps > 0.0, validation, "normalization eps must be > 0");
  Var mu = channel_mean(x, per_sample);
  Var xm = sub(x, expand(mu, x.shape()));
  Var var = channel_mean(mul(xm, xm), per_sample);
  Var sigma = sqrt_op(add_scalar(var, eps));
  Var normalized = div(xm, expand(sigma, x.shape()));
  return add(mul(gamma, normalized), beta);
}

Tensor spade_layer_forward(const Tensor& x, const SemanticLayout& layout,
                           const SpadeModulationParams& params, double eps) {
  VASIS_CHECK(layout.height() == x.shape().h && layout.width() == x.shape().w, validation,
              "layout spatial dims (" << layout.height() << "," << layout.width()
                                      << ") != feature dims " << x.shape().str());
  ModulationPair mods = spade_modulation(layout, params);
  return denormalize(x, batch_stats(x, eps), mods);
}

}  // namespace vasis
