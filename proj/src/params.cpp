#include "vasis/params.hpp"

#include <cmath>

namespace vasis {

Var ParamStore::insert(const std::string& name, Tensor value) {
  VASIS_CHECK(!by_name_.count(name), validation, "duplicate parameter name: " << name);
  Var v = Var::leaf(std::move(value), /*requires_grad=*/true, name);
  by_name_[name] = items_.size();
  items_.emplace_back(name, v);
  return v;
}

Var ParamStore::create(const std::string& name, Shape shape, double mean, double stddev) {
  RngStream rng(init_seed_, fnv1a(name) ^ streams::kInit);
  Tensor t(shape);
  rng.fill_normal(t, mean, stddev);
  return insert(name, std::move(t));
}

Var ParamStore::create_constant(const std::string& name, Shape shape, double value) {
  return insert(name, Tensor::full(shape, value));
}

Var ParamStore::create_from(const std::string& name, Tensor init) {
  return insert(name, std::move(init));
}

Var ParamStore::find(const std::string& name) const {
  auto it = by_name_.find(name);
  VASIS_CHECK(it != by_name_.end(), validation, "unknown parameter: " << name);
  return items_[it->second].second;
}

int64_t ParamStore::total_values() const {
  int64_t n = 0;
  for (const auto& [name, v] : items_) n += v.value().size();
  return n;
}

void ParamStore::zero_grads() const {
  for (const auto& [name, v] : items_) v.zero_grad();
}

void AdamOptimizer::step(const std::vector<std::pair<std::string, Var>>& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    const Tensor& g = p.grad();
    Tensor& m = m_.try_emplace(name, Tensor::zeros(g.shape())).first->second;
    Tensor& v = v_.try_emplace(name, Tensor::zeros(g.shape())).first->second;
    Tensor& x = p.node()->value;
    for (int64_t i = 0; i < g.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      x[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
    }
  }
}

double AdamOptimizer::grad_norm(const std::vector<std::pair<std::string, Var>>& params) const {
  double acc = 0.0;
  for (const auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    const Tensor& g = p.grad();
    for (int64_t i = 0; i < g.size(); ++i) acc += g[i] * g[i];
  }
  return std::sqrt(acc);
}

}  // namespace vasis
