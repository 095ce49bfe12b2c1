#pragma once

#include <array>
#include <cstdint>

namespace cagnet {

// xoshiro256** seeded through splitmix64. We roll our own instead of using
// <random> because the standard distributions are implementation-defined,
// and run logs / checkpoints must be byte-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform();
  double uniform(double lo, double hi);

  // Unbiased integer in [0, n); n must be > 0.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller. The spare value is discarded so the
  // stream position is a pure function of the number of calls.
  double normal();

  bool coin() { return (next_u64() >> 63) != 0; }

  // Independent child stream; used to give each dataset sample / epoch its
  // own generator so parallel order never changes the draws.
  Rng split(std::uint64_t stream) const;

  std::array<std::uint64_t, 4> state() const { return s_; }
  void set_state(const std::array<std::uint64_t, 4>& s) { s_ = s; }

 private:
  Rng() = default;
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace cagnet
