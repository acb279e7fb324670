#pragma once

#include <map>
#include <string>

#include "vasis/params.hpp"

namespace vasis {

// Container of named numeric arrays plus a config snapshot. Values are raw
// little-endian float64, so save -> load round-trips bit-exactly.
struct Checkpoint {
  int64_t step = 0;
  std::string config_json;
  std::map<std::string, Tensor> arrays;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Helpers moving model/optimizer state in and out of a checkpoint. Optimizer
// arrays are stored under "<opt_prefix>.m."/".v." plus the parameter name.
void pack_params(Checkpoint& ckpt, const ParamStore& store);
void unpack_params(const Checkpoint& ckpt, ParamStore& store);
void pack_optimizer(Checkpoint& ckpt, AdamOptimizer& opt, const std::string& opt_prefix);
void unpack_optimizer(const Checkpoint& ckpt, AdamOptimizer& opt, const std::string& opt_prefix);

}  // namespace vasis
