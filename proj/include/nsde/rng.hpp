#pragma once

#include <cstdint>
#include <limits>

namespace nsde {

/// Finalizer of the SplitMix64 generator; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives the seed of stream `index` under `base`. Streams with distinct
/// (base, tag, index) are statistically independent for Monte Carlo use.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag,
                                    std::uint64_t index) noexcept {
  return mix64(mix64(base ^ mix64(tag + 0x9e3779b97f4a7c15ULL)) + index);
}

/// Counter-based SplitMix64 engine. Satisfies UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

 private:
  std::uint64_t state_;
};

// Stream tags keep the seed spaces of different consumers apart.
namespace stream {
inline constexpr std::uint64_t kEndpoint = 1;
inline constexpr std::uint64_t kPi = 2;
inline constexpr std::uint64_t kRepetition = 3;
inline constexpr std::uint64_t kRestart = 4;
inline constexpr std::uint64_t kProbe = 5;
inline constexpr std::uint64_t kInner = 6;
}  // namespace stream

}  // namespace nsde
