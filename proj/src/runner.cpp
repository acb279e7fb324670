#include "vasis/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;

namespace vasis {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void append_log(const std::string& out_dir, const std::string& hash, uint64_t seed,
                int64_t step, const std::string& metric, double value) {
  std::ofstream f(fs::path(out_dir) / "log", std::ios::app);
  f << "hash=" << hash << " seed=" << seed << " step=" << step << " metric=" << metric
    << " value=" << fmt_double(value) << "\n";
}

void ensure_run_dirs(const ExperimentConfig& config) {
  fs::create_directories(fs::path(config.out_dir) / "checkpoints");
  fs::create_directories(fs::path(config.out_dir) / "reports");
  fs::create_directories(fs::path(config.out_dir) / "grids");
  std::ofstream cfg(fs::path(config.out_dir) / "config.json");
  cfg << config.to_json().dump(2) << "\n";
}

ConvPyramid make_embedder() {
  return ConvPyramid(3, std::vector<int64_t>{16, 32, 64}, kEmbedderPyramidSeed);
}

Checkpoint snapshot(const ExperimentConfig& config, Models& models, AdamOptimizer& opt_g,
                    AdamOptimizer& opt_d, int64_t step, double best_fid) {
  Checkpoint ckpt;
  ckpt.step = step;
  ckpt.config_json = config.to_json().dump();
  pack_params(ckpt, models.g_params);
  pack_params(ckpt, models.d_params);
  pack_optimizer(ckpt, opt_g, "adam_g");
  pack_optimizer(ckpt, opt_d, "adam_d");
  Tensor best(Shape{1, 1, 1, 1});
  best[0] = best_fid;
  ckpt.arrays["meta.best_fid"] = best;
  return ckpt;
}

}  // namespace

KvReport::KvReport(const std::string& config_hash, uint64_t seed) {
  add("config_hash", config_hash);
  add("seed", static_cast<int64_t>(seed));
}

void KvReport::add(const std::string& key, const std::string& value) {
  items_.emplace_back(key, value);
}
void KvReport::add(const std::string& key, double value) { add(key, fmt_double(value)); }
void KvReport::add(const std::string& key, int64_t value) {
  add(key, std::to_string(value));
}

std::string KvReport::render() const {
  std::vector<std::pair<std::string, std::string>> sorted = items_;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::string out;
  for (const auto& [k, v] : sorted) out += k + "=" + v + "\n";
  return out;
}

void KvReport::write(const std::string& path) const {
  std::ofstream f(path);
  VASIS_CHECK(f.good(), io, "cannot write report: " << path);
  f << render();
}

Models build_models(const ExperimentConfig& config) {
  GeneratorSpec gs = config.generator;
  DiscriminatorSpec ds = config.discriminator;
  gs.num_classes = config.dataset.num_classes;
  ds.num_classes = config.dataset.num_classes;
  return Models(gs, ds, config.seed);
}

SplitDataset load_split_dataset(const ExperimentConfig& config) {
  SplitDataset split;
  split.all = load_dataset(config.dataset_path);
  VASIS_CHECK(split.all.spec.resolution == config.dataset.resolution &&
                  split.all.spec.num_classes == config.dataset.num_classes,
              config, "dataset on disk does not match the config (resolution/classes)");
  const auto n = split.all.samples.size();
  VASIS_CHECK(n >= 2, validation, "need >= 2 samples to hold out a reference split, got " << n);
  auto val_n = static_cast<size_t>(
      std::max<int64_t>(1, std::llround(config.train.val_fraction * static_cast<double>(n))));
  val_n = std::min(val_n, n - 1);
  for (size_t i = 0; i < n - val_n; ++i) split.train_indices.push_back(i);
  for (size_t i = n - val_n; i < n; ++i) split.val_indices.push_back(i);
  return split;
}

Batch make_batch(const Dataset& ds, const std::vector<size_t>& indices) {
  VASIS_CHECK(!indices.empty(), validation, "empty batch");
  const Shape s0 = ds.samples.front().image.shape();
  const auto b = static_cast<int64_t>(indices.size());
  Batch batch;
  batch.images = Tensor(Shape{b, 3, s0.h, s0.w});
  batch.labels = LabelMap(b, s0.h, s0.w);
  for (int64_t i = 0; i < b; ++i) {
    const Sample& s = ds.samples[indices[static_cast<size_t>(i)]];
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t h = 0; h < s0.h; ++h)
        for (int64_t w = 0; w < s0.w; ++w)
          batch.images.at(i, c, h, w) = s.image.at(0, c, h, w);
    for (int64_t h = 0; h < s0.h; ++h)
      for (int64_t w = 0; w < s0.w; ++w) batch.labels.at(i, h, w) = s.labels.at(0, h, w);
  }
  batch.layout = one_hot_encode(batch.labels, ds.spec.num_classes);
  return batch;
}

EvalResult evaluate(const Models& models, const SplitDataset& split,
                    const ExperimentConfig& config, uint64_t eval_salt) {
  EvalResult result;
  const int64_t n_eval = std::max<int64_t>(2, config.train.eval_samples);
  ConvPyramid embedder = make_embedder();

  RngStream latent_rng = RngStream(config.seed, streams::kEval).child(eval_salt);
  RngStream noise_rng = RngStream(config.seed, streams::kEval).child(eval_salt ^ 0x9e37ull);

  std::vector<Tensor> generated;
  std::vector<size_t> cond_indices;
  for (int64_t i = 0; i < n_eval; ++i) {
    size_t idx = split.val_indices[static_cast<size_t>(i) % split.val_indices.size()];
    cond_indices.push_back(idx);
    const Sample& s = split.all.samples[idx];
    SemanticLayout layout = one_hot_encode(s.labels, split.all.spec.num_classes);
    Tensor latent = models.generator->sample_latent(1, latent_rng);
    RngStream noise = noise_rng.child(static_cast<uint64_t>(i));
    generated.push_back(models.generator->generate(latent, layout, &noise,
                                                   config.train.zero_noise));
  }

  std::vector<Tensor> train_refs, val_refs;
  for (size_t i : split.train_indices) train_refs.push_back(split.all.samples[i].image);
  for (size_t i : split.val_indices) val_refs.push_back(split.all.samples[i].image);
  result.fid_train = fid_pipeline(generated, train_refs, embedder);
  result.fid_val = fid_pipeline(generated, val_refs, embedder);

  // Segment generated images with the palette classifier and score against
  // the conditioning labels.
  const Shape is = generated.front().shape();
  Tensor stacked(Shape{n_eval, 3, is.h, is.w});
  LabelMap gt(n_eval, is.h, is.w);
  for (int64_t i = 0; i < n_eval; ++i) {
    const Tensor& img = generated[static_cast<size_t>(i)];
    const Sample& s = split.all.samples[cond_indices[static_cast<size_t>(i)]];
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t h = 0; h < is.h; ++h)
        for (int64_t w = 0; w < is.w; ++w) stacked.at(i, c, h, w) = img.at(0, c, h, w);
    for (int64_t h = 0; h < is.h; ++h)
      for (int64_t w = 0; w < is.w; ++w) gt.at(i, h, w) = s.labels.at(0, h, w);
  }
  LabelMap pred = palette_segment(stacked, split.all.spec.colors);
  MiouResult miou = miou_acc(pred, gt, split.all.spec.num_classes);
  result.miou = miou.miou;
  result.acc = miou.acc;
  result.intra_std = intra_class_std(stacked, gt, split.all.spec.num_classes);

  GeneratorSpec gs = models.g_spec;
  result.generator_cost = count_params_flops(gs);
  result.discriminator_cost =
      count_params_flops(models.d_spec, config.generator.output_resolution);
  return result;
}

int cmd_make_dataset(const ExperimentConfig& config, bool force) {
  write_dataset(config.dataset, config.dataset_path, force);
  std::cout << "dataset written to " << config.dataset_path << " (" << config.dataset.count
            << " samples)\n";
  return 0;
}

int cmd_train(const ExperimentConfig& config, const std::string& resume_path) {
  ensure_run_dirs(config);
  SplitDataset split = load_split_dataset(config);
  Models models = build_models(config);
  AdamOptimizer opt_g(config.train.lr_g, config.train.beta1, config.train.beta2);
  AdamOptimizer opt_d(config.train.lr_d, config.train.beta1, config.train.beta2);
  const std::string hash = config.hash();
  const fs::path ckpt_dir = fs::path(config.out_dir) / "checkpoints";

  int64_t start_step = 0;
  double best_fid = -1.0;
  if (!resume_path.empty()) {
    Checkpoint ckpt = load_checkpoint(resume_path);
    unpack_params(ckpt, models.g_params);
    unpack_params(ckpt, models.d_params);
    unpack_optimizer(ckpt, opt_g, "adam_g");
    unpack_optimizer(ckpt, opt_d, "adam_d");
    start_step = ckpt.step;
    auto it = ckpt.arrays.find("meta.best_fid");
    if (it != ckpt.arrays.end()) best_fid = it->second[0];
    std::cout << "resumed from " << resume_path << " at step " << start_step << "\n";
  }

  TrainRecipe recipe = config.train.recipe();
  for (int64_t step = start_step + 1; step <= config.train.steps; ++step) {
    RngStream data_rng = RngStream(config.seed, streams::kData).child(static_cast<uint64_t>(step));
    std::vector<size_t> indices;
    for (int64_t i = 0; i < config.train.batch_size; ++i)
      indices.push_back(split.train_indices[static_cast<size_t>(
          data_rng.uniform_int(static_cast<int64_t>(split.train_indices.size())))]);
    Batch batch = make_batch(split.all, indices);

    StepReport report;
    try {
      report = train_step(batch, models, opt_g, opt_d, recipe, step,
                          RngStream(config.seed, streams::kLatent).child(static_cast<uint64_t>(step)),
                          RngStream(config.seed, streams::kLayerNoise).child(static_cast<uint64_t>(step)));
    } catch (const Error& e) {
      // Diagnostic bundle for the non-finite abort path.
      std::ofstream diag(fs::path(config.out_dir) / "diagnostic.txt");
      diag << "seed=" << config.seed << "\nstep=" << step << "\nerror=" << e.what() << "\n";
      throw;
    }
    append_log(config.out_dir, hash, config.seed, step, "d_loss", report.d_loss);
    append_log(config.out_dir, hash, config.seed, step, "g_loss", report.g_loss);

    if (step % 50 == 0 || step == config.train.steps)
      std::cout << "step " << step << "/" << config.train.steps << " d=" << report.d_loss
                << " g=" << report.g_loss << "\n";

    if (step % config.train.eval_every == 0 || step == config.train.steps) {
      EvalResult ev = evaluate(models, split, config, static_cast<uint64_t>(step));
      append_log(config.out_dir, hash, config.seed, step, "fid_t", ev.fid_train);
      append_log(config.out_dir, hash, config.seed, step, "fid_v", ev.fid_val);
      append_log(config.out_dir, hash, config.seed, step, "miou", ev.miou);
      append_log(config.out_dir, hash, config.seed, step, "acc", ev.acc);
      if (best_fid < 0.0 || ev.fid_val < best_fid) {
        best_fid = ev.fid_val;
        save_checkpoint(snapshot(config, models, opt_g, opt_d, step, best_fid),
                        (ckpt_dir / "best.ckpt").string());
      }
    }
    if (step % config.train.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "step_%06lld.ckpt", static_cast<long long>(step));
      save_checkpoint(snapshot(config, models, opt_g, opt_d, step, best_fid),
                      (ckpt_dir / name).string());
    }
  }
  save_checkpoint(snapshot(config, models, opt_g, opt_d, config.train.steps, best_fid),
                  (ckpt_dir / "final.ckpt").string());
  std::cout << "training done; final checkpoint at "
            << (ckpt_dir / "final.ckpt").string() << "\n";
  return 0;
}

namespace {

void load_generator_state(const std::string& checkpoint_path, Models& models) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  unpack_params(ckpt, models.g_params);
  unpack_params(ckpt, models.d_params);
}

}  // namespace

int cmd_probe(const ExperimentConfig& config, const std::string& checkpoint_path) {
  ensure_run_dirs(config);
  const std::string hash = config.hash();

  GeneratorSpec base = config.generator;
  base.num_classes = config.dataset.num_classes;

  // Table-style ablation over {zero, reflect} x {k1, k3} on untrained models.
  AblationOptions aopts;
  aopts.init_seed = config.seed;
  std::vector<AblationCell> cells = padding_kernel_ablation(base, aopts);
  std::string table = format_ablation_table(cells);
  {
    std::ofstream f(fs::path(config.out_dir) / "reports" / "probe_ablation.txt");
    f << "config_hash=" << hash << " seed=" << config.seed << "\n" << table;
  }
  std::cout << table;

  // Per-block probe and collapse scores for the configured variant vs the
  // deterministic reference (clade path, no noise, no position, reflect).
  Models models = build_models(config);
  if (!checkpoint_path.empty()) load_generator_state(checkpoint_path, models);

  LabelMap single(1, base.output_resolution, base.output_resolution, 0);
  SemanticLayout single_layout = one_hot_encode(single, base.num_classes);
  ProbeReport probe = per_block_std_probe(*models.generator, single_layout,
                                          ProbeOptions{config.seed, false});

  GeneratorSpec base_det = base;
  base_det.variant = VariantConfig{};
  base_det.variant.semantic_path = SemanticPath::clade_sample;
  base_det.variant.noise_enabled = false;
  base_det.variant.position_kind = PositionKind::none;
  base_det.variant.padding = PaddingMode::reflect;
  base_det.variant.kernel_size = 1;
  ParamStore det_store(config.seed);
  Generator det_gen(det_store, base_det);

  CollapseOptions copts;
  copts.canvas_size = base.output_resolution;
  copts.seed = config.seed;
  double collapse_baseline =
      collapse_score(det_gen, scaled_motif(copts.canvas_size),
                     scaled_placements(copts.canvas_size), copts);
  double collapse_variant =
      collapse_score(*models.generator, scaled_motif(copts.canvas_size),
                     scaled_placements(copts.canvas_size), copts);

  KvReport report(hash, config.seed);
  for (const auto& [name, sd] : probe.block_std) report.add("block_std." + name, sd);
  report.add("probe.fingerprint", probe.config_fingerprint);
  report.add("probe.layout", probe.layout_descriptor);
  report.add("collapse.baseline", collapse_baseline);
  report.add("collapse.variant", collapse_variant);

  // Position-code characters: monotone along an axis / layout-dependent.
  {
    const int64_t r = base.output_resolution;
    PositionCode abs_code = absolute_code(r, r);
    RngStream code_rng(config.seed, 0x90deull);
    PositionCode learn_code = learnable_code_init(r, r, code_rng);
    LabelMap two_band(1, r, r, 0);
    for (int64_t h = r / 2; h < r; ++h)
      for (int64_t w = 0; w < r; ++w) two_band.at(0, h, w) = 1 % base.num_classes;
    PositionCode rel_code = relative_code(one_hot_encode(LabelMap(1, r, r, 0),
                                                         base.num_classes));
    PositionCode rel_code2 = relative_code(one_hot_encode(two_band, base.num_classes));
    auto mono = [](const PositionCode& c) {
      return monotonicity_check(c, PositionAxis::row) &&
             monotonicity_check(c, PositionAxis::col);
    };
    report.add("position.absolute.monotonic", mono(abs_code) ? "yes" : "no");
    report.add("position.learnable.monotonic", mono(learn_code) ? "yes" : "no");
    report.add("position.relative.monotonic", mono(rel_code) ? "yes" : "no");
    // Layout-dependent = recomputed per layout (the "needs computation" row).
    double rel_diff = 0.0;
    const Tensor& ra = rel_code.data.value();
    const Tensor& rb = rel_code2.data.value();
    for (int64_t i = 0; i < ra.size(); ++i)
      rel_diff = std::max(rel_diff, std::abs(ra[i] - rb[i]));
    report.add("position.relative.layout_dependent", rel_diff > 0.0 ? "yes" : "no");
    report.add("position.absolute.layout_dependent", "no");
    report.add("position.learnable.layout_dependent", "no");
  }
  for (const auto& c : cells) {
    std::string key = std::string("ablation.") +
                      (c.padding == PaddingMode::zero ? "zero" : "reflect") + ".k" +
                      std::to_string(c.kernel_size);
    report.add(key + ".max_block_std", c.max_block_std);
    report.add(key + ".collapse", c.collapse);
  }
  report.write((fs::path(config.out_dir) / "reports" / "probe.kv").string());

  // Visual panel: one generated sample per ablation cell.
  std::vector<Tensor> panel;
  RngStream latent_rng(config.seed, streams::kLatent);
  Tensor latent = models.generator->sample_latent(1, latent_rng);
  for (const PaddingMode pm : {PaddingMode::zero, PaddingMode::reflect}) {
    for (int64_t k : {int64_t{1}, int64_t{3}}) {
      GeneratorSpec spec = base;
      spec.variant.padding = pm;
      spec.variant.kernel_size = k;
      ParamStore store(config.seed);
      Generator gen(store, spec);
      RngStream noise(config.seed, streams::kLayerNoise);
      panel.push_back(gen.generate(latent, single_layout, &noise));
    }
  }
  save_image_grid(panel, (fs::path(config.out_dir) / "grids" / "probe_ablation.ppm").string(),
                  2);
  std::cout << "collapse baseline=" << collapse_baseline << " variant=" << collapse_variant
            << "\n";
  return 0;
}

int cmd_eval(const ExperimentConfig& config, const std::string& checkpoint_path) {
  VASIS_CHECK(fs::exists(checkpoint_path), io, "missing checkpoint: " << checkpoint_path);
  ensure_run_dirs(config);
  SplitDataset split = load_split_dataset(config);
  Models models = build_models(config);
  load_generator_state(checkpoint_path, models);
  EvalResult ev = evaluate(models, split, config, /*eval_salt=*/0);

  const std::string hash = config.hash();
  KvReport report(hash, config.seed);
  report.add("fid.train_refs", ev.fid_train);
  report.add("fid.val_refs", ev.fid_val);
  report.add("miou", ev.miou);
  report.add("acc", ev.acc);
  for (size_t c = 0; c < ev.intra_std.size(); ++c) {
    report.add("intra_class_std." + std::to_string(c),
               ev.intra_std[c] ? fmt_double(*ev.intra_std[c]) : std::string("absent"));
  }
  report.add("generator.params", ev.generator_cost.params);
  report.add("generator.flops", ev.generator_cost.flops);
  report.add("generator.modulation_params", ev.generator_cost.modulation_params);
  report.add("generator.params_enumerated", enumerate_params(models.g_params));
  report.add("discriminator.params", ev.discriminator_cost.params);
  report.add("discriminator.flops", ev.discriminator_cost.flops);
  report.add("flops_convention", std::string("2*MACs"));
  report.write((fs::path(config.out_dir) / "reports" / "eval.kv").string());
  std::cout << report.render();

  for (const char* metric : {"fid_t", "fid_v", "miou", "acc"}) {
    double v = metric == std::string("fid_t")   ? ev.fid_train
               : metric == std::string("fid_v") ? ev.fid_val
               : metric == std::string("miou")  ? ev.miou
                                                : ev.acc;
    append_log(config.out_dir, hash, config.seed, 0, metric, v);
  }
  return 0;
}

int cmd_count(const ExperimentConfig& config) {
  ensure_run_dirs(config);
  GeneratorSpec base = config.generator;
  base.num_classes = config.dataset.num_classes;

  struct Row {
    std::string name;
    GeneratorSpec spec;
  };
  std::vector<Row> rows;
  auto with = [&](const char* name, SemanticPath path, bool noise, CombineMode combine,
                  PositionKind pos) {
    GeneratorSpec s = base;
    s.variant.semantic_path = path;
    s.variant.noise_enabled = noise;
    s.variant.combine_mode = combine;
    s.variant.position_kind = pos;
    rows.push_back({name, s});
  };
  with("spade_baseline", SemanticPath::spade_conv, false, CombineMode::concat,
       PositionKind::none);
  with("clade_baseline", SemanticPath::clade_sample, false, CombineMode::concat,
       PositionKind::none);
  with("va_spade_concat", SemanticPath::spade_conv, true, CombineMode::concat,
       PositionKind::learnable);
  with("va_spade_plus", SemanticPath::spade_conv, true, CombineMode::plus,
       PositionKind::learnable);
  with("va_spade_one_channel", SemanticPath::spade_conv, true, CombineMode::one_channel,
       PositionKind::learnable);
  with("va_spade_rand", SemanticPath::spade_conv, true, CombineMode::rand_noise,
       PositionKind::learnable);
  with("va_spade_absolute", SemanticPath::spade_conv, true, CombineMode::concat,
       PositionKind::absolute);
  with("va_spade_relative", SemanticPath::spade_conv, true, CombineMode::concat,
       PositionKind::relative);
  with("va_clade_concat", SemanticPath::clade_sample, true, CombineMode::concat,
       PositionKind::learnable);

  KvReport report(config.hash(), config.seed);
  std::cout << "variant                 params      flops          modulation_params\n";
  for (const Row& row : rows) {
    CostReport cost = count_params_flops(row.spec);
    char line[160];
    std::snprintf(line, sizeof(line), "%-22s  %-10lld  %-13lld  %lld\n", row.name.c_str(),
                  static_cast<long long>(cost.params), static_cast<long long>(cost.flops),
                  static_cast<long long>(cost.modulation_params));
    std::cout << line;
    report.add("count." + row.name + ".params", cost.params);
    report.add("count." + row.name + ".flops", cost.flops);
    report.add("count." + row.name + ".modulation_params", cost.modulation_params);
  }
  report.write((fs::path(config.out_dir) / "reports" / "count.kv").string());
  return 0;
}

int cmd_generate(const ExperimentConfig& config, const std::string& checkpoint_path,
                 int64_t count) {
  VASIS_CHECK(count >= 1, validation, "generate count must be >= 1");
  ensure_run_dirs(config);
  SplitDataset split = load_split_dataset(config);
  Models models = build_models(config);
  if (!checkpoint_path.empty()) {
    VASIS_CHECK(fs::exists(checkpoint_path), io, "missing checkpoint: " << checkpoint_path);
    load_generator_state(checkpoint_path, models);
  }
  RngStream latent_rng(config.seed, streams::kEval);
  std::vector<Tensor> images;
  for (int64_t i = 0; i < count; ++i) {
    size_t idx = split.val_indices[static_cast<size_t>(i) % split.val_indices.size()];
    SemanticLayout layout =
        one_hot_encode(split.all.samples[idx].labels, split.all.spec.num_classes);
    Tensor latent = models.generator->sample_latent(1, latent_rng);
    RngStream noise = RngStream(config.seed, streams::kEval).child(0xabcdu + static_cast<uint64_t>(i));
    images.push_back(models.generator->generate(latent, layout, &noise));
  }
  std::string path = (fs::path(config.out_dir) / "grids" / "generate.ppm").string();
  save_image_grid(images, path, std::min<int64_t>(count, 4));
  std::cout << "wrote " << path << "\n";
  return 0;
}

}  // namespace vasis
