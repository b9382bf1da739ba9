#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace irsc::rng {

// Derives a stream seed from a master seed, a label and an index.
// Label hashing is FNV-1a, mixing is splitmix64; both are fixed so the same
// (master, label, index) triple yields the same stream on every platform.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                          std::uint64_t index = 0);

// Deterministic random stream. Uniform and Gaussian draws are generated
// by hand (53-bit uniforms, Box-Muller) instead of std:: distributions,
// whose byte streams are implementation defined.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}
  Stream(std::uint64_t master, std::string_view label, std::uint64_t index = 0)
      : engine_(derive_seed(master, label, index)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (cosine branch).
  double normal();

  // Uniform index in [0, n); n must be nonzero.
  std::size_t uniform_index(std::size_t n);

  Stream substream(std::string_view label, std::uint64_t index = 0);

 private:
  std::mt19937_64 engine_;
};

}  // namespace irsc::rng
