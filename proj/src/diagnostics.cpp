#include "vasis/diagnostics.hpp"

#include <cmath>
#include <sstream>

namespace vasis {

Tensor class_boundary_map(const SemanticLayout& layout, bool include_padding_border) {
  const int64_t B = layout.batch(), H = layout.height(), W = layout.width();
  LabelMap labels = layout.argmax();
  Tensor mask(Shape{B, 1, H, W});
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t h = 0; h < H; ++h) {
      for (int64_t w = 0; w < W; ++w) {
        bool boundary = false;
        if (include_padding_border && (h == 0 || w == 0 || h == H - 1 || w == W - 1))
          boundary = true;
        int32_t center = labels.at(b, h, w);
        for (int64_t dh = -1; dh <= 1 && !boundary; ++dh) {
          for (int64_t dw = -1; dw <= 1 && !boundary; ++dw) {
            int64_t nh = h + dh, nw = w + dw;
            if (nh < 0 || nh >= H || nw < 0 || nw >= W) continue;
            if (labels.at(b, nh, nw) != center) boundary = true;
          }
        }
        mask.at(b, 0, h, w) = boundary ? 1.0 : 0.0;
      }
    }
  }
  return mask;
}

namespace {

// Population std over (H,W) per (sample, channel), averaged over both.
double spatial_std(const Tensor& t) {
  const Shape s = t.shape();
  const double inv = 1.0 / static_cast<double>(s.h * s.w);
  double acc = 0.0;
  for (int64_t b = 0; b < s.b; ++b) {
    for (int64_t c = 0; c < s.c; ++c) {
      double mean = 0.0;
      for (int64_t h = 0; h < s.h; ++h)
        for (int64_t w = 0; w < s.w; ++w) mean += t.at(b, c, h, w);
      mean *= inv;
      double var = 0.0;
      for (int64_t h = 0; h < s.h; ++h)
        for (int64_t w = 0; w < s.w; ++w) {
          double d = t.at(b, c, h, w) - mean;
          var += d * d;
        }
      acc += std::sqrt(var * inv);
    }
  }
  return acc / static_cast<double>(s.b * s.c);
}

std::string describe_layout(const SemanticLayout& layout) {
  LabelMap labels = layout.argmax();
  std::vector<int64_t> counts(static_cast<size_t>(layout.num_classes()), 0);
  for (int32_t v : labels.raw()) counts[static_cast<size_t>(v)]++;
  int64_t present = 0;
  for (int64_t c : counts) present += (c > 0);
  std::ostringstream oss;
  oss << layout.batch() << "x" << layout.height() << "x" << layout.width() << ", " << present
      << "/" << layout.num_classes() << " classes present";
  return oss.str();
}

}  // namespace

ProbeReport per_block_std_probe(const Generator& generator, const SemanticLayout& layout,
                                const ProbeOptions& opts) {
  RngStream latent_rng(opts.seed, streams::kLatent);
  RngStream noise_rng(opts.seed, streams::kLayerNoise);
  Tensor latent = generator.sample_latent(layout.batch(), latent_rng);
  std::vector<BlockTrace> trace;
  generator.generate(latent, layout, &noise_rng, opts.zero_noise, &trace);
  ProbeReport report;
  for (const BlockTrace& bt : trace)
    report.block_std.emplace_back(bt.name, spatial_std(bt.activation));
  report.config_fingerprint = generator.spec().variant.describe();
  report.layout_descriptor = describe_layout(layout);
  return report;
}

std::vector<std::optional<double>> intra_class_std(const Tensor& image, const LabelMap& labels,
                                                   int64_t num_classes) {
  const Shape s = image.shape();
  VASIS_CHECK(labels.batch() == s.b && labels.height() == s.h && labels.width() == s.w,
              validation, "intra_class_std image/label shape mismatch");
  std::vector<std::optional<double>> out(static_cast<size_t>(num_classes));
  for (int64_t cls = 0; cls < num_classes; ++cls) {
    double acc = 0.0;
    int64_t channels_counted = 0;
    bool any = false;
    for (int64_t c = 0; c < s.c; ++c) {
      double sum = 0.0, sumsq = 0.0;
      int64_t n = 0;
      for (int64_t b = 0; b < s.b; ++b)
        for (int64_t h = 0; h < s.h; ++h)
          for (int64_t w = 0; w < s.w; ++w) {
            if (labels.at(b, h, w) != cls) continue;
            double v = image.at(b, c, h, w);
            sum += v;
            sumsq += v * v;
            ++n;
          }
      if (n == 0) break;
      any = true;
      double mean = sum / static_cast<double>(n);
      double var = std::max(0.0, sumsq / static_cast<double>(n) - mean * mean);
      acc += std::sqrt(var);
      ++channels_counted;
    }
    if (any) out[static_cast<size_t>(cls)] = acc / static_cast<double>(channels_counted);
  }
  return out;
}

std::vector<std::optional<double>> intra_class_std(const Tensor& image,
                                                   const SemanticLayout& layout) {
  return intra_class_std(image, layout.argmax(), layout.num_classes());
}

LabelMap default_motif(int32_t background_class, int32_t square_class) {
  LabelMap motif(1, 16, 16, background_class);
  for (int64_t h = 4; h < 12; ++h)
    for (int64_t w = 4; w < 12; ++w) motif.at(0, h, w) = square_class;
  return motif;
}

std::vector<std::pair<int64_t, int64_t>> default_placements() {
  return {{16, 16}, {16, 32}, {32, 16}, {32, 32}};
}

LabelMap scaled_motif(int64_t canvas, int32_t background_class, int32_t square_class) {
  const int64_t side = std::max<int64_t>(4, canvas / 4);
  LabelMap motif(1, side, side, background_class);
  for (int64_t h = side / 4; h < (3 * side) / 4; ++h)
    for (int64_t w = side / 4; w < (3 * side) / 4; ++w) motif.at(0, h, w) = square_class;
  return motif;
}

std::vector<std::pair<int64_t, int64_t>> scaled_placements(int64_t canvas) {
  const int64_t q = canvas / 4;
  return {{q, q}, {q, 2 * q}, {2 * q, q}, {2 * q, 2 * q}};
}

double collapse_score(const Generator& generator, const LabelMap& motif,
                      const std::vector<std::pair<int64_t, int64_t>>& placements,
                      const CollapseOptions& opts) {
  VASIS_CHECK(placements.size() >= 2, validation,
              "collapse_score needs >= 2 placements, got " << placements.size());
  const int64_t S = opts.canvas_size;
  const int64_t mh = motif.height(), mw = motif.width();
  VASIS_CHECK(motif.batch() == 1, validation, "motif must be a single patch");
  const int64_t num_classes = generator.spec().num_classes;

  // Verify the motif carries an internal class boundary.
  bool has_boundary = false;
  for (int64_t h = 0; h < mh && !has_boundary; ++h)
    for (int64_t w = 1; w < mw && !has_boundary; ++w)
      if (motif.at(0, h, w) != motif.at(0, h, w - 1)) has_boundary = true;
  VASIS_CHECK(has_boundary, validation, "motif has no internal class boundary");

  RngStream latent_rng(opts.seed, streams::kLatent);
  Tensor latent = generator.sample_latent(1, latent_rng);  // shared across placements

  std::vector<Tensor> patches;
  for (size_t i = 0; i < placements.size(); ++i) {
    auto [ph, pw] = placements[i];
    VASIS_CHECK(ph >= 0 && pw >= 0 && ph + mh <= S && pw + mw <= S, validation,
                "placement (" << ph << "," << pw << ") puts the motif outside the " << S << "x"
                              << S << " canvas");
    LabelMap canvas(1, S, S, opts.background_class);
    for (int64_t h = 0; h < mh; ++h)
      for (int64_t w = 0; w < mw; ++w) canvas.at(0, ph + h, pw + w) = motif.at(0, h, w);
    SemanticLayout layout = one_hot_encode(canvas, num_classes);
    RngStream noise_rng = RngStream(opts.seed, streams::kLayerNoise).child(i);
    Tensor image = generator.generate(latent, layout, &noise_rng, opts.zero_noise);
    Tensor patch(Shape{1, 3, mh, mw});
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t h = 0; h < mh; ++h)
        for (int64_t w = 0; w < mw; ++w)
          patch.at(0, c, h, w) = image.at(0, c, ph + h, pw + w);
    patches.push_back(std::move(patch));
  }

  // Mean pairwise Pearson correlation of mean-removed patches.
  auto centered = [](const Tensor& p) {
    std::vector<double> v(static_cast<size_t>(p.size()));
    double mean = 0.0;
    for (int64_t i = 0; i < p.size(); ++i) mean += p[i];
    mean /= static_cast<double>(p.size());
    for (int64_t i = 0; i < p.size(); ++i) v[static_cast<size_t>(i)] = p[i] - mean;
    return v;
  };
  double acc = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < patches.size(); ++i) {
    auto a = centered(patches[i]);
    for (size_t j = i + 1; j < patches.size(); ++j) {
      auto b = centered(patches[j]);
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (size_t k = 0; k < a.size(); ++k) {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
      }
      double corr;
      if (na < 1e-24 && nb < 1e-24) {
        corr = 1.0;  // two constant patches agree
      } else if (na < 1e-24 || nb < 1e-24) {
        corr = 0.0;
      } else {
        corr = dot / std::sqrt(na * nb);
      }
      acc += corr;
      ++pairs;
    }
  }
  return acc / static_cast<double>(pairs);
}

std::vector<AblationCell> padding_kernel_ablation(const GeneratorSpec& base_spec,
                                                  const AblationOptions& opts) {
  std::vector<AblationCell> cells;
  LabelMap single(1, base_spec.output_resolution, base_spec.output_resolution,
                  opts.single_class);
  SemanticLayout single_layout = one_hot_encode(single, base_spec.num_classes);
  for (PaddingMode padding : {PaddingMode::zero, PaddingMode::reflect}) {
    for (int64_t k : {int64_t{1}, int64_t{3}}) {
      GeneratorSpec spec = base_spec;
      spec.variant.padding = padding;
      spec.variant.kernel_size = k;
      // The table probes the plain conditional normalization (the ablation's
      // subject); the variation mechanisms are reported separately.
      spec.variant.noise_enabled = false;
      spec.variant.position_kind = PositionKind::none;
      ParamStore store(opts.init_seed);
      Generator generator(store, spec);
      AblationCell cell;
      cell.padding = padding;
      cell.kernel_size = k;
      cell.probe = per_block_std_probe(generator, single_layout,
                                       ProbeOptions{opts.probe_seed, false});
      cell.max_block_std = 0.0;
      for (const auto& [name, sd] : cell.probe.block_std)
        if (name != "rgb") cell.max_block_std = std::max(cell.max_block_std, sd);
      CollapseOptions copts;
      copts.canvas_size = base_spec.output_resolution;
      copts.seed = opts.probe_seed;
      cell.collapse = collapse_score(generator, scaled_motif(copts.canvas_size),
                                     scaled_placements(copts.canvas_size), copts);
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

std::string format_ablation_table(const std::vector<AblationCell>& cells) {
  std::ostringstream oss;
  oss << "padding  kernel  max_block_std  collapse_score\n";
  for (const auto& c : cells) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-7s  k%-5d  %.9f    %.6f\n",
                  c.padding == PaddingMode::zero ? "zero" : "reflect",
                  static_cast<int>(c.kernel_size), c.max_block_std, c.collapse);
    oss << line;
  }
  return oss.str();
}

}  // namespace vasis
