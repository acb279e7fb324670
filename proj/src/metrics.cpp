#include "vasis/metrics.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>

namespace vasis {

GaussianFit gaussian_fit(const Eigen::MatrixXd& features) {
  const int64_t n = features.rows();
  VASIS_CHECK(n >= 2, validation, "gaussian_fit needs n >= 2 samples, got " << n);
  GaussianFit fit;
  fit.mean = features.colwise().mean();
  Eigen::MatrixXd centered = features.rowwise() - fit.mean.transpose();
  fit.cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  return fit;
}

namespace {

// Symmetric PSD square root with negative eigenvalues clamped to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, double* clamp_magnitude) {
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  Eigen::VectorXd ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] < 0.0) {
      if (clamp_magnitude) *clamp_magnitude = std::max(*clamp_magnitude, -ev[i]);
      ev[i] = 0.0;
    }
  }
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const GaussianFit& a, const GaussianFit& b, FrechetDetails* details) {
  VASIS_CHECK(a.mean.size() == b.mean.size(), validation,
              "frechet_distance dimension mismatch: " << a.mean.size() << " vs "
                                                      << b.mean.size());
  double clamp = 0.0;
  Eigen::MatrixXd sa_half = psd_sqrt(a.cov, &clamp);
  Eigen::MatrixXd prod = sa_half * b.cov * sa_half;
  Eigen::MatrixXd sym = 0.5 * (prod + prod.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  double tr_sqrt = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    double ev = es.eigenvalues()[i];
    if (ev < 0.0) {
      clamp = std::max(clamp, -ev);
      ev = 0.0;
    }
    tr_sqrt += std::sqrt(ev);
  }
  if (details) details->clamp_magnitude = clamp;
  double d2 = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * tr_sqrt;
  return std::max(0.0, d2);
}

namespace {

double cubic_weight(double t) {
  // Catmull-Rom kernel (Keys, a = -0.5).
  t = std::abs(t);
  if (t <= 1.0) return 1.5 * t * t * t - 2.5 * t * t + 1.0;
  if (t < 2.0) return -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0;
  return 0.0;
}

}  // namespace

Tensor resize_bicubic(const Tensor& image, int64_t target_h, int64_t target_w) {
  const Shape s = image.shape();
  VASIS_CHECK(target_h >= 1 && target_w >= 1, validation, "resize target must be >= 1");
  if (s.h == target_h && s.w == target_w) return image;
  Tensor out(Shape{s.b, s.c, target_h, target_w});
  const double sh = static_cast<double>(s.h) / static_cast<double>(target_h);
  const double sw = static_cast<double>(s.w) / static_cast<double>(target_w);
  auto clamp = [](int64_t v, int64_t n) { return std::min(std::max(v, int64_t{0}), n - 1); };
  for (int64_t b = 0; b < s.b; ++b) {
    for (int64_t c = 0; c < s.c; ++c) {
      for (int64_t oh = 0; oh < target_h; ++oh) {
        double src_h = (static_cast<double>(oh) + 0.5) * sh - 0.5;
        int64_t h0 = static_cast<int64_t>(std::floor(src_h));
        for (int64_t ow = 0; ow < target_w; ++ow) {
          double src_w = (static_cast<double>(ow) + 0.5) * sw - 0.5;
          int64_t w0 = static_cast<int64_t>(std::floor(src_w));
          double acc = 0.0, norm = 0.0;
          for (int64_t dh = -1; dh <= 2; ++dh) {
            double wy = cubic_weight(src_h - static_cast<double>(h0 + dh));
            if (wy == 0.0) continue;
            for (int64_t dw = -1; dw <= 2; ++dw) {
              double wx = cubic_weight(src_w - static_cast<double>(w0 + dw));
              if (wx == 0.0) continue;
              acc += wy * wx * image.at(b, c, clamp(h0 + dh, s.h), clamp(w0 + dw, s.w));
              norm += wy * wx;
            }
          }
          out.at(b, c, oh, ow) = acc / norm;
        }
      }
    }
  }
  return out;
}

double fid_pipeline(const std::vector<Tensor>& generated, const std::vector<Tensor>& reference,
                    const ConvPyramid& embedder) {
  VASIS_CHECK(!generated.empty() && !reference.empty(), validation,
              "fid_pipeline rejects empty image sets");
  const int64_t gh = generated.front().shape().h;
  const int64_t gw = generated.front().shape().w;
  const int64_t d = embedder.embed_dim();
  auto embed_set = [&](const std::vector<Tensor>& images, bool resize) {
    Eigen::MatrixXd feats(static_cast<int64_t>(images.size()), d);
    for (size_t i = 0; i < images.size(); ++i) {
      const Tensor& img = images[i];
      std::vector<double> e =
          (resize && (img.shape().h != gh || img.shape().w != gw))
              ? embedder.embed(resize_bicubic(img, gh, gw))
              : embedder.embed(img);
      for (int64_t j = 0; j < d; ++j) feats(static_cast<int64_t>(i), j) = e[static_cast<size_t>(j)];
    }
    return feats;
  };
  GaussianFit fa = gaussian_fit(embed_set(generated, false));
  GaussianFit fb = gaussian_fit(embed_set(reference, true));
  return frechet_distance(fa, fb);
}

MiouResult miou_acc(const LabelMap& pred, const LabelMap& gt, int64_t num_classes) {
  VASIS_CHECK(pred.batch() == gt.batch() && pred.height() == gt.height() &&
                  pred.width() == gt.width(),
              validation, "miou_acc shape mismatch: pred (" << pred.batch() << ","
                          << pred.height() << "," << pred.width() << ") vs gt (" << gt.batch()
                          << "," << gt.height() << "," << gt.width() << ")");
  std::vector<int64_t> inter(static_cast<size_t>(num_classes), 0);
  std::vector<int64_t> pred_n(static_cast<size_t>(num_classes), 0);
  std::vector<int64_t> gt_n(static_cast<size_t>(num_classes), 0);
  int64_t match = 0;
  const auto& pv = pred.raw();
  const auto& gv = gt.raw();
  for (size_t i = 0; i < pv.size(); ++i) {
    VASIS_CHECK(pv[i] >= 0 && pv[i] < num_classes && gv[i] >= 0 && gv[i] < num_classes,
                validation, "label out of range in miou_acc");
    pred_n[static_cast<size_t>(pv[i])]++;
    gt_n[static_cast<size_t>(gv[i])]++;
    if (pv[i] == gv[i]) {
      inter[static_cast<size_t>(pv[i])]++;
      ++match;
    }
  }
  MiouResult r;
  r.acc = static_cast<double>(match) / static_cast<double>(pv.size());
  r.per_class_iou.assign(static_cast<size_t>(num_classes), 0.0);
  r.present.assign(static_cast<size_t>(num_classes), false);
  double acc_iou = 0.0;
  int64_t present = 0;
  for (int64_t c = 0; c < num_classes; ++c) {
    const auto ci = static_cast<size_t>(c);
    int64_t uni = pred_n[ci] + gt_n[ci] - inter[ci];
    if (uni > 0) r.per_class_iou[ci] = static_cast<double>(inter[ci]) / static_cast<double>(uni);
    if (gt_n[ci] > 0) {
      r.present[ci] = true;
      acc_iou += r.per_class_iou[ci];
      ++present;
    }
  }
  r.miou = present > 0 ? acc_iou / static_cast<double>(present) : 0.0;
  return r;
}

LabelMap palette_segment(const Tensor& images, const std::vector<std::array<double, 3>>& palette) {
  const Shape s = images.shape();
  VASIS_CHECK(s.c == 3, validation, "palette_segment expects 3-channel images");
  VASIS_CHECK(!palette.empty(), validation, "palette is empty");
  LabelMap out(s.b, s.h, s.w);
  for (int64_t b = 0; b < s.b; ++b)
    for (int64_t h = 0; h < s.h; ++h)
      for (int64_t w = 0; w < s.w; ++w) {
        double best = 0.0;
        int32_t best_c = 0;
        for (size_t c = 0; c < palette.size(); ++c) {
          double d2 = 0.0;
          for (int64_t ch = 0; ch < 3; ++ch) {
            double d = images.at(b, ch, h, w) - palette[c][static_cast<size_t>(ch)];
            d2 += d * d;
          }
          if (c == 0 || d2 < best) {
            best = d2;
            best_c = static_cast<int32_t>(c);
          }
        }
        out.at(b, h, w) = best_c;
      }
  return out;
}

int64_t conv_param_count(int64_t in, int64_t out, int64_t k) { return in * out * k * k + out; }

int64_t conv_macs(int64_t in, int64_t out, int64_t k, int64_t out_h, int64_t out_w) {
  return in * out * k * k * out_h * out_w;
}

namespace {

struct CostTally {
  int64_t params = 0;
  int64_t macs = 0;
  int64_t mod_params = 0;

  void conv(int64_t in, int64_t out, int64_t k, int64_t ho, int64_t wo, bool modulation) {
    int64_t p = conv_param_count(in, out, k);
    params += p;
    macs += conv_macs(in, out, k, ho, wo);
    if (modulation) mod_params += p;
  }
  void bank(int64_t rows, int64_t cols) {
    params += rows * cols;
    mod_params += rows * cols;
  }
  void code(int64_t h, int64_t w) {
    params += 2 * h * w;
    mod_params += 2 * h * w;
  }
};

void tally_norm_layer(CostTally& t, const VariantConfig& v, int64_t channels,
                      int64_t num_classes, int64_t hidden, int64_t res) {
  const int64_t ws = v.semantic_width(channels);
  if (v.semantic_path == SemanticPath::spade_conv) {
    t.conv(num_classes, hidden, v.kernel_size, res, res, true);
    t.conv(hidden, ws, v.kernel_size, res, res, true);
    t.conv(hidden, ws, v.kernel_size, res, res, true);
  } else {
    t.bank(num_classes, ws);
    t.bank(num_classes, ws);
  }
  if (v.noise_enabled) {
    const int64_t rows = v.noise_bank_rows(num_classes);
    const int64_t cols = v.noise_bank_cols(channels);
    for (int i = 0; i < 4; ++i) t.bank(rows, cols);  // n1,n2 for gamma and beta
  }
  if (v.position_kind != PositionKind::none) {
    t.conv(2, ws, 3, res, res, true);
    t.conv(2, ws, 3, res, res, true);
    if (v.position_kind == PositionKind::learnable) t.code(res, res);
  }
}

void tally_resblock(CostTally& t, const VariantConfig& v, int64_t in, int64_t out,
                    int64_t num_classes, int64_t hidden, int64_t res) {
  const int64_t mid = std::min(in, out);
  tally_norm_layer(t, v, in, num_classes, hidden, res);
  t.conv(in, mid, v.kernel_size, res, res, false);
  tally_norm_layer(t, v, mid, num_classes, hidden, res);
  t.conv(mid, out, v.kernel_size, res, res, false);
  if (in != out) {
    tally_norm_layer(t, v, in, num_classes, hidden, res);
    t.conv(in, out, 1, res, res, false);
  }
}

}  // namespace

CostReport count_params_flops(const GeneratorSpec& spec) {
  spec.validate();
  CostTally t;
  const auto ch = spec.channel_schedule();
  const int64_t r0 = spec.initial_resolution();
  t.conv(spec.latent_dim, ch[0], 1, 1, 1, false);  // latent -> seed channels
  for (int64_t i = 1; i <= spec.num_blocks; ++i)
    tally_resblock(t, spec.variant, ch[i - 1], ch[i], spec.num_classes, spec.hidden_channels,
                   r0 << (i - 1));
  tally_resblock(t, spec.variant, ch[spec.num_blocks], ch[spec.num_blocks], spec.num_classes,
                 spec.hidden_channels, spec.output_resolution);
  t.conv(ch[spec.num_blocks], 3, spec.variant.kernel_size, spec.output_resolution,
         spec.output_resolution, false);
  return CostReport{t.params, 2 * t.macs, t.mod_params};
}

CostReport count_params_flops(const DiscriminatorSpec& spec, int64_t resolution) {
  CostTally t;
  if (spec.kind == DiscriminatorKind::patch_multiscale) {
    for (int64_t s = 0; s < spec.scales; ++s) {
      int64_t res = resolution >> s;
      int64_t cin = 3 + spec.num_classes;
      for (int64_t cout : spec.channels) {
        res /= 2;
        t.conv(cin, cout, 4, res, res, false);
        cin = cout;
      }
      t.conv(cin, 1, 3, res, res, false);
    }
  } else {
    int64_t res = resolution;
    int64_t cin = 3;
    std::vector<int64_t> enc_res;
    for (int64_t cout : spec.channels) {
      res /= 2;
      enc_res.push_back(res);
      t.conv(cin, cout, 3, res, res, false);
      cin = cout;
    }
    const auto& chs = spec.channels;
    for (size_t j = chs.size() - 1; j-- > 0;) {
      res *= 2;
      t.conv(cin, chs[j], 3, res, res, false);
      cin = 2 * chs[j];
    }
    res *= 2;
    t.conv(cin, chs[0], 3, res, res, false);
    t.conv(chs[0], spec.num_classes + 1, 1, res, res, false);
  }
  return CostReport{t.params, 2 * t.macs, t.mod_params};
}

int64_t enumerate_params(const ParamStore& store) { return store.total_values(); }

int64_t enumerate_modulation_params(const ParamStore& store) {
  int64_t n = 0;
  for (const auto& [name, v] : store.items())
    if (name.find(".norm") != std::string::npos) n += v.value().size();
  return n;
}

}  // namespace vasis
