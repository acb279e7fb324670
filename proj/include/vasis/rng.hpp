#pragma once

#include <cstdint>
#include <string>

#include "vasis/tensor.hpp"

namespace vasis {

// Counter-based pseudo-random stream.
//
// Draw i of stream (seed, id) is a pure function of (seed, id, i): the
// counter is hashed through two rounds of the splitmix64 finalizer and mixed
// with a key derived from seed and id. Equal (seed, id) therefore yields a
// bitwise-identical sequence on every run, streams can be split freely, and
// resuming only needs the counter value. Normal deviates come from
// Box-Muller on the uniform output, with the spare value cached.
class RngStream {
 public:
  RngStream(uint64_t seed, uint64_t stream_id);

  uint64_t next_u64();
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  double normal();                        // standard normal
  int64_t uniform_int(int64_t n);         // [0, n)

  void fill_normal(Tensor& t, double mean = 0.0, double stddev = 1.0);
  void fill_uniform(Tensor& t, double lo, double hi);

  uint64_t seed() const { return seed_; }
  uint64_t stream_id() const { return stream_id_; }
  uint64_t counter() const { return counter_; }
  void set_counter(uint64_t counter);     // discards any cached spare

  // Derived stream: independent sequence keyed by (seed, id, salt).
  RngStream child(uint64_t salt) const;
  RngStream child(const std::string& salt) const;

 private:
  uint64_t seed_ = 0;
  uint64_t stream_id_ = 0;
  uint64_t key_ = 0;
  uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Well-known stream ids used by the training/evaluation pipeline.
namespace streams {
inline constexpr uint64_t kInit = 1;       // parameter initialization
inline constexpr uint64_t kData = 2;       // batch composition
inline constexpr uint64_t kLatent = 3;     // generator latent draws
inline constexpr uint64_t kLayerNoise = 4; // per-layer semantic noise
inline constexpr uint64_t kEval = 5;       // evaluation-time draws
}  // namespace streams

}  // namespace vasis
