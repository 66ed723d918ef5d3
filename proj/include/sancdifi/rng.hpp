#pragma once

#include <cstdint>

namespace sancdifi {

// Stream identifiers for seed derivation. Each pipeline stage draws from its
// own stream so that enabling or disabling one stage leaves the others intact.
enum class Stream : std::uint64_t {
  DataGen = 1,
  WeightInit = 2,
  TrainShuffle = 3,
  TrainNoise = 4,
  Poison = 5,
  Trigger = 6,
  RiseMasks = 7,
  ForwardNoise = 8,
  ReverseNoise = 9,
  Phase1 = 10,
  Phase2 = 11,
  Evaluation = 12,
  Retry = 13,
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Sub-seed = hash(master, stream, index). Stable across platforms.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                          std::uint64_t index = 0) noexcept;

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                 std::uint64_t index = 0) noexcept {
  return derive_seed(master, static_cast<std::uint64_t>(stream), index);
}

/// Counter-based generator: the n-th draw is splitmix64(key + n * gamma).
/// Normals come from Box-Muller so the stream does not depend on the
/// standard library's distribution implementations.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double normal() noexcept;
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;
  bool bernoulli(double p) noexcept { return uniform() < p; }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sancdifi
