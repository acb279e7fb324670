#pragma once

#include <map>
#include <string>
#include <vector>

#include "vasis/autograd.hpp"
#include "vasis/rng.hpp"

namespace vasis {

// Registry of named trainable parameters. Names are unique and stable, so
// checkpoints and the brute-force parameter enumeration key off them.
// Initialization derives a private stream per name from (seed, fnv1a(name)),
// making init values independent of construction order.
class ParamStore {
 public:
  explicit ParamStore(uint64_t init_seed = 0) : init_seed_(init_seed) {}

  Var create(const std::string& name, Shape shape, double mean, double stddev);
  Var create_constant(const std::string& name, Shape shape, double value);
  Var create_from(const std::string& name, Tensor init);

  Var find(const std::string& name) const;
  bool contains(const std::string& name) const { return by_name_.count(name) > 0; }
  const std::vector<std::pair<std::string, Var>>& items() const { return items_; }
  size_t count() const { return items_.size(); }
  int64_t total_values() const;

  void zero_grads() const;
  uint64_t init_seed() const { return init_seed_; }

 private:
  Var insert(const std::string& name, Tensor value);

  uint64_t init_seed_;
  std::vector<std::pair<std::string, Var>> items_;
  std::map<std::string, size_t> by_name_;
};

// Adam with configurable betas. State is keyed by parameter name so it can
// round-trip through checkpoints.
class AdamOptimizer {
 public:
  AdamOptimizer(double lr, double beta1, double beta2, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<std::pair<std::string, Var>>& params);
  double grad_norm(const std::vector<std::pair<std::string, Var>>& params) const;

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  int64_t step_count() const { return t_; }

  // Exposed for checkpointing.
  std::map<std::string, Tensor>& moment1() { return m_; }
  std::map<std::string, Tensor>& moment2() { return v_; }
  void set_step_count(int64_t t) { t_ = t; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::map<std::string, Tensor> m_, v_;
};

}  // namespace vasis
