#pragma once

#include <cstdint>

namespace lbds {

/// Stream tags for the independent noise sources of a path.
enum class StreamTag : std::uint64_t {
  jumps = 0x6a756d7073ULL,
  diffusion = 0x646966660ULL,
  backward = 0x6261636bULL,
  probe = 0x70726f6265ULL,
};

/// Counter-based generator: the output sequence is a pure function of
/// (seed, a, b, tag), so streams can be created in any order on any thread.
/// `a` and `b` are typically the path index and the interval index.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t tag);
  CounterRng(std::uint64_t seed, std::uint64_t a, std::uint64_t b, StreamTag tag)
      : CounterRng(seed, a, b, static_cast<std::uint64_t>(tag)) {}

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Standard normal (Box-Muller, both outputs used).
  double normal();
  /// Exponential with unit rate.
  double exponential();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

}  // namespace lbds
