#pragma once

#include <string>

#include <json.hpp>

#include "vasis/data_io.hpp"
#include "vasis/networks.hpp"

namespace vasis {

struct TrainConfig {
  int64_t steps = 2000;
  int64_t batch_size = 1;
  double lr_g = 1e-4, lr_d = 4e-4;
  double beta1 = 0.0, beta2 = 0.999;
  double weight_gan = 1.0, weight_fm = 10.0, weight_perceptual = 10.0;
  int64_t eval_every = 50;
  int64_t eval_samples = 32;
  double val_fraction = 0.2;
  int64_t checkpoint_every = 500;
  bool zero_noise = false;

  TrainRecipe recipe() const;
};

// Declarative description of a run: dataset, architecture variant, training
// recipe, and seed. Serializes canonically (sorted keys), so equal configs
// hash equally; unknown keys in a config file are rejected by name.
struct ExperimentConfig {
  uint64_t seed = 1;
  std::string out_dir = "runs/run";
  std::string dataset_path;
  SyntheticSpec dataset;
  GeneratorSpec generator;     // num_classes bound from dataset
  DiscriminatorSpec discriminator;
  TrainConfig train;

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  std::string hash() const;  // 16 hex chars over the canonical dump
};

ExperimentConfig load_config(const std::string& path);

// Evenly spread distinct base colors for n classes.
std::vector<std::array<double, 3>> default_palette(int64_t n);

}  // namespace vasis
