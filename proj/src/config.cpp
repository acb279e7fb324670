#include "vasis/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace vasis {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  VASIS_CHECK(j.is_object(), config, where << " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    VASIS_CHECK(allowed.count(it.key()), config,
                "unknown key '" << where << "." << it.key() << "' in config");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCategory::config, std::string("bad value for '") + key + "': " + e.what());
  }
}

SceneFamily parse_family(const std::string& s) {
  if (s == "stripes") return SceneFamily::stripes;
  if (s == "blobs") return SceneFamily::blobs;
  if (s == "sky_road") return SceneFamily::sky_road;
  if (s == "motif_grid") return SceneFamily::motif_grid;
  fail(ErrorCategory::config, "unknown dataset family: " + s);
}

std::string family_str(SceneFamily f) {
  switch (f) {
    case SceneFamily::stripes: return "stripes";
    case SceneFamily::blobs: return "blobs";
    case SceneFamily::sky_road: return "sky_road";
    case SceneFamily::motif_grid: return "motif_grid";
  }
  return "?";
}

SemanticPath parse_path(const std::string& s) {
  if (s == "spade" || s == "spade_conv") return SemanticPath::spade_conv;
  if (s == "clade" || s == "clade_sample") return SemanticPath::clade_sample;
  fail(ErrorCategory::config, "unknown semantic_path: " + s);
}

CombineMode parse_combine(const std::string& s) {
  if (s == "concat") return CombineMode::concat;
  if (s == "plus") return CombineMode::plus;
  if (s == "one_channel") return CombineMode::one_channel;
  if (s == "rand") return CombineMode::rand_noise;
  fail(ErrorCategory::config, "unknown combine_mode: " + s);
}

PositionKind parse_position(const std::string& s) {
  if (s == "none") return PositionKind::none;
  if (s == "absolute") return PositionKind::absolute;
  if (s == "learnable") return PositionKind::learnable;
  if (s == "relative") return PositionKind::relative;
  fail(ErrorCategory::config, "unknown position kind: " + s);
}

PaddingMode parse_padding(const std::string& s) {
  if (s == "zero") return PaddingMode::zero;
  if (s == "reflect") return PaddingMode::reflect;
  fail(ErrorCategory::config, "unknown padding mode: " + s);
}

StatsMode parse_stats(const std::string& s) {
  if (s == "batch") return StatsMode::batch;
  if (s == "instance") return StatsMode::instance;
  fail(ErrorCategory::config, "unknown stats mode: " + s);
}

DiscriminatorKind parse_d_kind(const std::string& s) {
  if (s == "patch" || s == "patch_multiscale") return DiscriminatorKind::patch_multiscale;
  if (s == "seg" || s == "segmentation") return DiscriminatorKind::segmentation;
  fail(ErrorCategory::config, "unknown discriminator kind: " + s);
}

VariantConfig variant_from_json(const json& j) {
  check_keys(j, "model.variant",
             {"semantic_path", "combine_mode", "position", "noise", "kernel_size", "padding",
              "stats"});
  VariantConfig v;
  v.semantic_path = parse_path(get_or<std::string>(j, "semantic_path", "spade"));
  v.combine_mode = parse_combine(get_or<std::string>(j, "combine_mode", "concat"));
  v.position_kind = parse_position(get_or<std::string>(j, "position", "none"));
  v.noise_enabled = get_or<bool>(j, "noise", false);
  v.kernel_size = get_or<int64_t>(j, "kernel_size", 3);
  v.padding = parse_padding(get_or<std::string>(j, "padding", "zero"));
  v.stats_mode = parse_stats(get_or<std::string>(j, "stats", "batch"));
  return v;
}

json variant_to_json(const VariantConfig& v) {
  json j;
  j["semantic_path"] = v.semantic_path == SemanticPath::spade_conv ? "spade" : "clade";
  switch (v.combine_mode) {
    case CombineMode::concat: j["combine_mode"] = "concat"; break;
    case CombineMode::plus: j["combine_mode"] = "plus"; break;
    case CombineMode::one_channel: j["combine_mode"] = "one_channel"; break;
    case CombineMode::rand_noise: j["combine_mode"] = "rand"; break;
  }
  switch (v.position_kind) {
    case PositionKind::none: j["position"] = "none"; break;
    case PositionKind::absolute: j["position"] = "absolute"; break;
    case PositionKind::learnable: j["position"] = "learnable"; break;
    case PositionKind::relative: j["position"] = "relative"; break;
  }
  j["noise"] = v.noise_enabled;
  j["kernel_size"] = v.kernel_size;
  j["padding"] = v.padding == PaddingMode::zero ? "zero" : "reflect";
  j["stats"] = v.stats_mode == StatsMode::batch ? "batch" : "instance";
  return j;
}

}  // namespace

std::vector<std::array<double, 3>> default_palette(int64_t n) {
  std::vector<std::array<double, 3>> colors;
  for (int64_t c = 0; c < n; ++c) {
    // Hue wheel, full saturation, alternating value; distinct for n < 256.
    double hue = 6.0 * static_cast<double>(c) / static_cast<double>(std::max<int64_t>(n, 1));
    double v = (c % 2 == 0) ? 1.0 : 0.6;
    auto f = [&](double k) {
      double t = std::fmod(hue + k, 6.0);
      double x = std::max(0.0, std::min({t, 4.0 - t, 1.0}));
      return (v * x) * 2.0 - 1.0;
    };
    colors.push_back({f(0.0), f(4.0), f(2.0)});
  }
  return colors;
}

TrainRecipe TrainConfig::recipe() const {
  TrainRecipe r;
  r.batch_size = batch_size;
  r.lr_g = lr_g;
  r.lr_d = lr_d;
  r.beta1 = beta1;
  r.beta2 = beta2;
  r.weight_gan = weight_gan;
  r.weight_fm = weight_fm;
  r.weight_perceptual = weight_perceptual;
  r.zero_noise = zero_noise;
  return r;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  check_keys(j, "", {"seed", "out_dir", "dataset", "model", "train"});
  ExperimentConfig c;
  c.seed = get_or<uint64_t>(j, "seed", 1);
  c.out_dir = get_or<std::string>(j, "out_dir", "runs/run");

  const json& d = j.at("dataset");
  check_keys(d, "dataset",
             {"path", "family", "num_classes", "resolution", "count", "colors", "amplitudes",
              "dataset_seed"});
  c.dataset_path = get_or<std::string>(d, "path", "");
  VASIS_CHECK(!c.dataset_path.empty(), config, "dataset.path is required");
  c.dataset.family = parse_family(get_or<std::string>(d, "family", "sky_road"));
  c.dataset.num_classes = get_or<int64_t>(d, "num_classes", 2);
  c.dataset.resolution = get_or<int64_t>(d, "resolution", 64);
  c.dataset.count = get_or<int64_t>(d, "count", 64);
  c.dataset.seed = get_or<uint64_t>(d, "dataset_seed", 11);
  if (d.contains("colors"))
    c.dataset.colors = d.at("colors").get<std::vector<std::array<double, 3>>>();
  else
    c.dataset.colors = default_palette(c.dataset.num_classes);
  if (d.contains("amplitudes"))
    c.dataset.amplitudes = d.at("amplitudes").get<std::vector<double>>();
  else
    c.dataset.amplitudes.assign(static_cast<size_t>(c.dataset.num_classes), 0.1);

  const json& m = j.contains("model") ? j.at("model") : json::object();
  check_keys(m, "model", {"generator", "discriminator", "variant"});
  const json& g = m.contains("generator") ? m.at("generator") : json::object();
  check_keys(g, "model.generator",
             {"base_channels", "num_blocks", "output_resolution", "latent_dim",
              "hidden_channels"});
  c.generator.base_channels = get_or<int64_t>(g, "base_channels", 32);
  c.generator.num_blocks = get_or<int64_t>(g, "num_blocks", 4);
  c.generator.output_resolution = get_or<int64_t>(g, "output_resolution", 64);
  c.generator.latent_dim = get_or<int64_t>(g, "latent_dim", 16);
  c.generator.hidden_channels = get_or<int64_t>(g, "hidden_channels", 64);
  c.generator.num_classes = c.dataset.num_classes;
  if (m.contains("variant")) c.generator.variant = variant_from_json(m.at("variant"));

  const json& dd = m.contains("discriminator") ? m.at("discriminator") : json::object();
  check_keys(dd, "model.discriminator", {"kind", "scales", "channels"});
  c.discriminator.kind = parse_d_kind(get_or<std::string>(dd, "kind", "patch"));
  c.discriminator.scales = get_or<int64_t>(dd, "scales", 2);
  c.discriminator.channels =
      get_or<std::vector<int64_t>>(dd, "channels", std::vector<int64_t>{32, 64, 128});
  c.discriminator.num_classes = c.dataset.num_classes;

  const json& t = j.contains("train") ? j.at("train") : json::object();
  check_keys(t, "train",
             {"steps", "batch_size", "lr_g", "lr_d", "beta1", "beta2", "weight_gan",
              "weight_fm", "weight_perceptual", "eval_every", "eval_samples", "val_fraction",
              "checkpoint_every", "zero_noise"});
  c.train.steps = get_or<int64_t>(t, "steps", 2000);
  c.train.batch_size = get_or<int64_t>(t, "batch_size", 1);
  c.train.lr_g = get_or<double>(t, "lr_g", 1e-4);
  c.train.lr_d = get_or<double>(t, "lr_d", 4e-4);
  c.train.beta1 = get_or<double>(t, "beta1", 0.0);
  c.train.beta2 = get_or<double>(t, "beta2", 0.999);
  c.train.weight_gan = get_or<double>(t, "weight_gan", 1.0);
  c.train.weight_fm = get_or<double>(t, "weight_fm", 10.0);
  c.train.weight_perceptual = get_or<double>(t, "weight_perceptual", 10.0);
  c.train.eval_every = get_or<int64_t>(t, "eval_every", 50);
  c.train.eval_samples = get_or<int64_t>(t, "eval_samples", 32);
  c.train.val_fraction = get_or<double>(t, "val_fraction", 0.2);
  c.train.checkpoint_every = get_or<int64_t>(t, "checkpoint_every", 500);
  c.train.zero_noise = get_or<bool>(t, "zero_noise", false);

  c.dataset.validate();
  return c;
}

nlohmann::json ExperimentConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["out_dir"] = out_dir;
  json d;
  d["path"] = dataset_path;
  d["family"] = family_str(dataset.family);
  d["num_classes"] = dataset.num_classes;
  d["resolution"] = dataset.resolution;
  d["count"] = dataset.count;
  d["dataset_seed"] = dataset.seed;
  d["colors"] = dataset.colors;
  d["amplitudes"] = dataset.amplitudes;
  j["dataset"] = d;
  json g;
  g["base_channels"] = generator.base_channels;
  g["num_blocks"] = generator.num_blocks;
  g["output_resolution"] = generator.output_resolution;
  g["latent_dim"] = generator.latent_dim;
  g["hidden_channels"] = generator.hidden_channels;
  json dd;
  dd["kind"] =
      discriminator.kind == DiscriminatorKind::patch_multiscale ? "patch" : "seg";
  dd["scales"] = discriminator.scales;
  dd["channels"] = discriminator.channels;
  j["model"] = {{"generator", g}, {"discriminator", dd},
                {"variant", variant_to_json(generator.variant)}};
  json t;
  t["steps"] = train.steps;
  t["batch_size"] = train.batch_size;
  t["lr_g"] = train.lr_g;
  t["lr_d"] = train.lr_d;
  t["beta1"] = train.beta1;
  t["beta2"] = train.beta2;
  t["weight_gan"] = train.weight_gan;
  t["weight_fm"] = train.weight_fm;
  t["weight_perceptual"] = train.weight_perceptual;
  t["eval_every"] = train.eval_every;
  t["eval_samples"] = train.eval_samples;
  t["val_fraction"] = train.val_fraction;
  t["checkpoint_every"] = train.checkpoint_every;
  t["zero_noise"] = train.zero_noise;
  j["train"] = t;
  return j;
}

std::string ExperimentConfig::hash() const {
  uint64_t h = fnv1a(to_json().dump());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  VASIS_CHECK(f.good(), io, "cannot open config: " << path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::config, std::string("malformed config JSON: ") + e.what());
  }
  return ExperimentConfig::from_json(j);
}

}  // namespace vasis
