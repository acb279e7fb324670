#include <CLI11.hpp>
#include <iostream>

#include "vasis/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Variation-aware semantic image synthesis lab"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, resume_path;
  bool force = false;
  int64_t gen_count = 8;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
  };

  CLI::App* make_ds = app.add_subcommand("make-dataset", "write the synthetic dataset to disk");
  add_config(make_ds);
  make_ds->add_flag("--force", force, "overwrite an existing dataset directory");

  CLI::App* train = app.add_subcommand("train", "run the training loop");
  add_config(train);
  train->add_option("--resume", resume_path, "checkpoint to resume from");

  CLI::App* probe = app.add_subcommand(
      "probe", "padding/kernel ablation, per-block std probe, collapse scores");
  add_config(probe);
  probe->add_option("--checkpoint", checkpoint_path, "optional trained checkpoint");

  CLI::App* eval = app.add_subcommand("eval", "FID / mIoU / Acc / cost report on a checkpoint");
  add_config(eval);
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint to evaluate")->required();

  CLI::App* count = app.add_subcommand("count", "parameter/FLOP table over variants");
  add_config(count);

  CLI::App* gen = app.add_subcommand("generate", "render an image grid from a checkpoint");
  add_config(gen);
  gen->add_option("--checkpoint", checkpoint_path, "checkpoint to load (optional: untrained)");
  gen->add_option("--count", gen_count, "number of images");

  CLI11_PARSE(app, argc, argv);

  try {
    vasis::ExperimentConfig config = vasis::load_config(config_path);
    if (make_ds->parsed()) return vasis::cmd_make_dataset(config, force);
    if (train->parsed()) return vasis::cmd_train(config, resume_path);
    if (probe->parsed()) return vasis::cmd_probe(config, checkpoint_path);
    if (eval->parsed()) return vasis::cmd_eval(config, checkpoint_path);
    if (count->parsed()) return vasis::cmd_count(config);
    if (gen->parsed()) return vasis::cmd_generate(config, checkpoint_path, gen_count);
  } catch (const vasis::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
