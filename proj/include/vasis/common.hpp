#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace vasis {

// Error categories map 1:1 onto CLI exit codes.
enum class ErrorCategory { config = 1, io = 2, validation = 3, numeric = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const { return category_; }
  int exit_code() const { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& message) {
  throw Error(category, message);
}

// FNV-1a, used for config hashes and name-keyed parameter init streams.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a(const std::string& s, uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a(s.data(), s.size(), h);
}

}  // namespace vasis

#define VASIS_CHECK(cond, category, msg)                             \
  do {                                                               \
    if (!(cond)) {                                                   \
      std::ostringstream oss__;                                      \
      oss__ << msg;                                                  \
      ::vasis::fail(::vasis::ErrorCategory::category, oss__.str()); \
    }                                                                \
  } while (0)
