#pragma once

#include <string>

#include "vasis/checkpoint.hpp"
#include "vasis/config.hpp"
#include "vasis/data_io.hpp"
#include "vasis/diagnostics.hpp"
#include "vasis/metrics.hpp"

namespace vasis {

// Sorted key=value report with deterministic formatting. Reports with equal
// config hashes and seeds are byte-identical (no timestamps, fixed widths).
class KvReport {
 public:
  KvReport(const std::string& config_hash, uint64_t seed);
  void add(const std::string& key, const std::string& value);
  void add(const std::string& key, double value);
  void add(const std::string& key, int64_t value);
  void write(const std::string& path) const;
  std::string render() const;

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

Models build_models(const ExperimentConfig& config);

struct SplitDataset {
  Dataset all;
  std::vector<size_t> train_indices;
  std::vector<size_t> val_indices;  // held-out tail of the dataset
};
SplitDataset load_split_dataset(const ExperimentConfig& config);

Batch make_batch(const Dataset& ds, const std::vector<size_t>& indices);

struct EvalResult {
  double fid_train = 0.0;  // reference set: training renders
  double fid_val = 0.0;    // reference set: held-out renders
  double miou = 0.0;
  double acc = 0.0;
  std::vector<std::optional<double>> intra_std;  // per class, over eval images
  CostReport generator_cost;
  CostReport discriminator_cost;
};

// Generates eval_samples images conditioned on held-out layouts (cycled) and
// scores them. eval_salt seeds the latent/noise draws, so equal salts give
// identical numbers on the same checkpoint.
EvalResult evaluate(const Models& models, const SplitDataset& split,
                    const ExperimentConfig& config, uint64_t eval_salt);

// CLI entry points; return process exit codes (0 on success).
int cmd_make_dataset(const ExperimentConfig& config, bool force);
int cmd_train(const ExperimentConfig& config, const std::string& resume_path);
int cmd_probe(const ExperimentConfig& config, const std::string& checkpoint_path);
int cmd_eval(const ExperimentConfig& config, const std::string& checkpoint_path);
int cmd_count(const ExperimentConfig& config);
int cmd_generate(const ExperimentConfig& config, const std::string& checkpoint_path,
                 int64_t count);

}  // namespace vasis
