#include "vasis/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace vasis {

namespace {

constexpr char kMagic[8] = {'V', 'A', 'S', 'C', 'K', 'P', 'T', '1'};

void write_u64(std::ofstream& f, uint64_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint64_t read_u64(std::ifstream& f) {
  uint64_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  VASIS_CHECK(f.good(), io, "cannot write checkpoint: " << path);
  f.write(kMagic, sizeof(kMagic));
  write_u64(f, static_cast<uint64_t>(ckpt.step));
  write_u64(f, ckpt.config_json.size());
  f.write(ckpt.config_json.data(), static_cast<std::streamsize>(ckpt.config_json.size()));
  write_u64(f, ckpt.arrays.size());
  for (const auto& [name, t] : ckpt.arrays) {
    write_u64(f, name.size());
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    const Shape s = t.shape();
    write_u64(f, static_cast<uint64_t>(s.b));
    write_u64(f, static_cast<uint64_t>(s.c));
    write_u64(f, static_cast<uint64_t>(s.h));
    write_u64(f, static_cast<uint64_t>(s.w));
    f.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  VASIS_CHECK(f.good(), io, "checkpoint write failed: " << path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  VASIS_CHECK(f.good(), io, "cannot open checkpoint: " << path);
  char magic[8];
  f.read(magic, sizeof(magic));
  VASIS_CHECK(f.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0, io,
              "not a checkpoint file: " << path);
  Checkpoint ckpt;
  ckpt.step = static_cast<int64_t>(read_u64(f));
  uint64_t cfg_len = read_u64(f);
  ckpt.config_json.resize(cfg_len);
  f.read(ckpt.config_json.data(), static_cast<std::streamsize>(cfg_len));
  uint64_t count = read_u64(f);
  for (uint64_t i = 0; i < count; ++i) {
    uint64_t name_len = read_u64(f);
    std::string name(name_len, '\0');
    f.read(name.data(), static_cast<std::streamsize>(name_len));
    Shape s;
    s.b = static_cast<int64_t>(read_u64(f));
    s.c = static_cast<int64_t>(read_u64(f));
    s.h = static_cast<int64_t>(read_u64(f));
    s.w = static_cast<int64_t>(read_u64(f));
    Tensor t(s);
    f.read(reinterpret_cast<char*>(t.data()),
           static_cast<std::streamsize>(t.size() * sizeof(double)));
    VASIS_CHECK(f.good(), io, "truncated checkpoint: " << path);
    ckpt.arrays.emplace(std::move(name), std::move(t));
  }
  return ckpt;
}

void pack_params(Checkpoint& ckpt, const ParamStore& store) {
  for (const auto& [name, v] : store.items()) ckpt.arrays["param." + name] = v.value();
}

void unpack_params(const Checkpoint& ckpt, ParamStore& store) {
  for (const auto& [name, v] : store.items()) {
    auto it = ckpt.arrays.find("param." + name);
    VASIS_CHECK(it != ckpt.arrays.end(), io, "checkpoint missing parameter: " << name);
    VASIS_CHECK(it->second.shape() == v.shape(), io,
                "checkpoint shape mismatch for " << name << ": " << it->second.shape().str()
                                                 << " vs " << v.shape().str());
    v.node()->value = it->second;
  }
}

void pack_optimizer(Checkpoint& ckpt, AdamOptimizer& opt, const std::string& opt_prefix) {
  for (const auto& [name, t] : opt.moment1()) ckpt.arrays[opt_prefix + ".m." + name] = t;
  for (const auto& [name, t] : opt.moment2()) ckpt.arrays[opt_prefix + ".v." + name] = t;
}

void unpack_optimizer(const Checkpoint& ckpt, AdamOptimizer& opt, const std::string& opt_prefix) {
  opt.moment1().clear();
  opt.moment2().clear();
  const std::string m_prefix = opt_prefix + ".m.";
  const std::string v_prefix = opt_prefix + ".v.";
  for (const auto& [name, t] : ckpt.arrays) {
    if (name.rfind(m_prefix, 0) == 0) opt.moment1()[name.substr(m_prefix.size())] = t;
    if (name.rfind(v_prefix, 0) == 0) opt.moment2()[name.substr(v_prefix.size())] = t;
  }
  opt.set_step_count(ckpt.step);
}

}  // namespace vasis
