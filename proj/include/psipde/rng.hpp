#pragma once

#include <cstdint>
#include <string_view>

namespace psipde {

// Counter-based generator: the k-th draw of stream (seed, stream) is a pure
// function of (seed, stream, k), so parallel workers get reproducible,
// independent sequences without sharing state.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream = 0) : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

  std::uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }
  // Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }
  double normal();
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  static std::uint64_t mix(std::uint64_t z);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Named sub-stream of a root seed, e.g. derive_seed(root, "simulate.noise").
std::uint64_t derive_seed(std::uint64_t root, std::string_view name);

}  // namespace psipde
