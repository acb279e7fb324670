#include "vasis/rng.hpp"

#include <cmath>
#include <numbers>

namespace vasis {

namespace {

inline uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ull;

}  // namespace

RngStream::RngStream(uint64_t seed, uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  key_ = mix64(mix64(seed + kGolden) ^ mix64(stream_id * kGolden + 1));
}

uint64_t RngStream::next_u64() {
  uint64_t out = mix64(key_ ^ mix64(counter_ * kGolden + kGolden));
  ++counter_;
  return out;
}

double RngStream::uniform() {
  // 53 high bits -> double in [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double RngStream::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 in (0, 1] keeps the log finite.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

int64_t RngStream::uniform_int(int64_t n) {
  VASIS_CHECK(n >= 1, validation, "uniform_int needs n >= 1, got " << n);
  // Modulo bias is ~n/2^64, irrelevant for the counts used here.
  return static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n));
}

void RngStream::fill_normal(Tensor& t, double mean, double stddev) {
  for (int64_t i = 0; i < t.size(); ++i) t[i] = mean + stddev * normal();
}

void RngStream::fill_uniform(Tensor& t, double lo, double hi) {
  for (int64_t i = 0; i < t.size(); ++i) t[i] = uniform(lo, hi);
}

void RngStream::set_counter(uint64_t counter) {
  counter_ = counter;
  have_spare_ = false;
}

RngStream RngStream::child(uint64_t salt) const {
  return RngStream(seed_, mix64(stream_id_ * kGolden + 17) ^ mix64(salt + 29));
}

RngStream RngStream::child(const std::string& salt) const { return child(fnv1a(salt)); }

}  // namespace vasis
