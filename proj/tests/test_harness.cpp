#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "vasis/runner.hpp"

using namespace vasis;
using namespace vasis::testing;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("harness");

namespace {

fs::path work_dir(const char* name) {
  fs::path p = fs::temp_directory_path() / "vasis_test" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Small config exercising the full train/eval path quickly.
ExperimentConfig tiny_config(const fs::path& root, int64_t steps) {
  nlohmann::json j;
  j["seed"] = 5;
  j["out_dir"] = (root / "run").string();
  j["dataset"] = {{"path", (root / "data").string()}, {"family", "sky_road"},
                  {"num_classes", 2},  {"resolution", 16},
                  {"count", 10},       {"dataset_seed", 3},
                  {"amplitudes", {0.0, 0.2}}};
  j["model"] = {
      {"generator",
       {{"base_channels", 4}, {"num_blocks", 2}, {"output_resolution", 16}, {"latent_dim", 4},
        {"hidden_channels", 8}}},
      {"discriminator", {{"kind", "patch"}, {"scales", 1}, {"channels", {4, 8}}}},
      {"variant",
       {{"semantic_path", "clade"}, {"noise", true}, {"position", "learnable"},
        {"kernel_size", 3}, {"padding", "zero"}}}};
  j["train"] = {{"steps", steps},       {"batch_size", 2},      {"lr_g", 1e-4},
                {"lr_d", 4e-4},         {"weight_perceptual", 1.0}, {"eval_every", 3},
                {"eval_samples", 4},    {"val_fraction", 0.3},  {"checkpoint_every", 3}};
  return ExperimentConfig::from_json(j);
}

}  // namespace

TEST_CASE("config parsing is strict about unknown keys") {
  fs::path root = work_dir("cfg");
  nlohmann::json j = tiny_config(root, 1).to_json();
  j["train"]["weight_gann"] = 2.0;  // typo must be caught by name
  try {
    ExperimentConfig::from_json(j);
    FAIL("expected rejection");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("weight_gann") != std::string::npos);
    CHECK(e.category() == ErrorCategory::config);
  }
}

TEST_CASE("config hash is stable under round-trips and sensitive to content") {
  fs::path root = work_dir("cfg_hash");
  ExperimentConfig a = tiny_config(root, 4);
  ExperimentConfig b = ExperimentConfig::from_json(a.to_json());
  CHECK(a.hash() == b.hash());
  b.train.lr_g = 2e-4;
  CHECK(a.hash() != b.hash());
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  fs::path root = work_dir("ckpt");
  Checkpoint ckpt;
  ckpt.step = 1234;
  ckpt.config_json = "{\"x\":1}";
  RngStream rng(1, 0);
  ckpt.arrays["param.alpha"] = random_tensor(Shape{3, 4, 2, 2}, rng);
  ckpt.arrays["adam_g.m.alpha"] = random_tensor(Shape{3, 4, 2, 2}, rng);
  std::string path = (root / "test.ckpt").string();
  save_checkpoint(ckpt, path);
  Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.step == 1234);
  CHECK(loaded.config_json == ckpt.config_json);
  REQUIRE(loaded.arrays.size() == 2);
  CHECK(max_abs_diff(loaded.arrays["param.alpha"], ckpt.arrays["param.alpha"]) == 0.0);
  CHECK_THROWS_AS(load_checkpoint((root / "missing.ckpt").string()), Error);
}

TEST_CASE("make-dataset writes once and refuses to clobber without force") {
  fs::path root = work_dir("mkds");
  ExperimentConfig config = tiny_config(root, 1);
  CHECK(cmd_make_dataset(config, false) == 0);
  CHECK(fs::exists(root / "data" / "manifest.json"));
  CHECK_THROWS_AS(cmd_make_dataset(config, false), Error);
  CHECK(cmd_make_dataset(config, true) == 0);
}

TEST_CASE("train smoke run produces checkpoints, log, and finite losses") {
  fs::path root = work_dir("train");
  ExperimentConfig config = tiny_config(root, 6);
  cmd_make_dataset(config, false);
  CHECK(cmd_train(config, "") == 0);
  CHECK(fs::exists(root / "run" / "checkpoints" / "final.ckpt"));
  CHECK(fs::exists(root / "run" / "checkpoints" / "best.ckpt"));
  CHECK(fs::exists(root / "run" / "log"));
  // Best pointer refers to the minimal recorded validation FID.
  std::ifstream log((root / "run" / "log").string());
  std::string line;
  double best = 1e300;
  int64_t best_step = -1;
  while (std::getline(log, line)) {
    auto pos = line.find("metric=fid_v value=");
    if (pos == std::string::npos) continue;
    double v = std::stod(line.substr(pos + 19));
    auto spos = line.find("step=");
    int64_t step = std::stoll(line.substr(spos + 5));
    if (v < best) {
      best = v;
      best_step = step;
    }
  }
  Checkpoint best_ckpt = load_checkpoint((root / "run" / "checkpoints" / "best.ckpt").string());
  CHECK(best_ckpt.step == best_step);
  CHECK(best_ckpt.arrays.at("meta.best_fid")[0] == doctest::Approx(best));
}

TEST_CASE("resume reproduces the uninterrupted run bit-for-bit") {
  fs::path root_a = work_dir("resume_a");
  ExperimentConfig full = tiny_config(root_a, 6);
  cmd_make_dataset(full, false);
  cmd_train(full, "");
  Checkpoint final_full = load_checkpoint((root_a / "run" / "checkpoints" / "final.ckpt").string());

  fs::path root_b = work_dir("resume_b");
  ExperimentConfig half = tiny_config(root_b, 3);
  cmd_make_dataset(half, false);
  cmd_train(half, "");
  ExperimentConfig rest = tiny_config(root_b, 6);
  // Keep the same out_dir/dataset; continue from step 3.
  rest.out_dir = half.out_dir;
  cmd_train(rest, (fs::path(half.out_dir) / "checkpoints" / "final.ckpt").string());
  Checkpoint final_resumed =
      load_checkpoint((fs::path(rest.out_dir) / "checkpoints" / "final.ckpt").string());

  REQUIRE(final_full.arrays.size() == final_resumed.arrays.size());
  for (const auto& [name, t] : final_full.arrays) {
    if (name.rfind("meta.", 0) == 0) continue;  // best-FID bookkeeping differs midway
    CAPTURE(name);
    CHECK(max_abs_diff(t, final_resumed.arrays.at(name)) == 0.0);
  }
}

TEST_CASE("evaluate is deterministic for equal salts") {
  fs::path root = work_dir("eval");
  ExperimentConfig config = tiny_config(root, 3);
  cmd_make_dataset(config, false);
  SplitDataset split = load_split_dataset(config);
  Models models = build_models(config);
  EvalResult a = evaluate(models, split, config, 0);
  EvalResult b = evaluate(models, split, config, 0);
  CHECK(a.fid_train == b.fid_train);
  CHECK(a.fid_val == b.fid_val);
  CHECK(a.miou == b.miou);
  EvalResult c = evaluate(models, split, config, 1);
  CHECK(a.fid_val != c.fid_val);  // different draws, different numbers
}

TEST_CASE("reports embed the config hash and are byte-identical across runs") {
  fs::path root = work_dir("report");
  ExperimentConfig config = tiny_config(root, 3);
  KvReport a(config.hash(), config.seed);
  a.add("metric.x", 1.25);
  KvReport b(config.hash(), config.seed);
  b.add("metric.x", 1.25);
  CHECK(a.render() == b.render());
  CHECK(a.render().find("config_hash=" + config.hash()) != std::string::npos);
  CHECK(a.render().find("seed=5") != std::string::npos);
}

TEST_CASE("eval and count commands write reports against a checkpoint") {
  fs::path root = work_dir("cmds");
  ExperimentConfig config = tiny_config(root, 3);
  cmd_make_dataset(config, false);
  cmd_train(config, "");
  std::string ckpt = (root / "run" / "checkpoints" / "final.ckpt").string();
  CHECK(cmd_eval(config, ckpt) == 0);
  CHECK(fs::exists(root / "run" / "reports" / "eval.kv"));
  CHECK_THROWS_AS(cmd_eval(config, (root / "nope.ckpt").string()), Error);
  CHECK(cmd_count(config) == 0);
  CHECK(fs::exists(root / "run" / "reports" / "count.kv"));
  CHECK(cmd_generate(config, ckpt, 4) == 0);
  CHECK(fs::exists(root / "run" / "grids" / "generate.ppm"));

  // eval reports are reproducible byte-for-byte.
  std::ifstream f1((root / "run" / "reports" / "eval.kv").string());
  std::string first((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  cmd_eval(config, ckpt);
  std::ifstream f2((root / "run" / "reports" / "eval.kv").string());
  std::string second((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(first == second);
}

TEST_SUITE_END();
