#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (seed, stream, index), so results never depend on call order or on how
// work is split across threads.

#include <array>
#include <cmath>
#include <cstdint>

#include <boost/math/special_functions/erf.hpp>

namespace unravel {

/// Philox4x32-10 block cipher (Salmon et al., "Parallel random numbers: as
/// easy as 1, 2, 3"). Maps a 128-bit counter under a 64-bit key to 128
/// random bits.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter apply(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// Uniform in the open interval (0, 1) from the top 52 bits of `bits`.
inline double open_unit_interval(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Standard normal quantile, Phi^{-1}(u) = -sqrt(2) erfc^{-1}(2u).
inline double normal_quantile(double u) {
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

/// A keyed family of independent streams. `stream` selects a stream (e.g. a
/// trajectory), `index`/`lane` address a draw within it.
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  /// Two 64-bit words for counter (index, block, stream).
  std::array<std::uint64_t, 2> bits(std::uint32_t index, std::uint32_t block) const noexcept {
    const Philox4x32::Counter ctr{index, block, static_cast<std::uint32_t>(stream_),
                                  static_cast<std::uint32_t>(stream_ >> 32)};
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed_),
                              static_cast<std::uint32_t>(seed_ >> 32)};
    const auto out = Philox4x32::apply(ctr, key);
    return {(std::uint64_t{out[1]} << 32) | out[0], (std::uint64_t{out[3]} << 32) | out[2]};
  }

  /// Uniform draw number `slot` at position `index`; slots pair up per cipher call.
  double uniform(std::uint32_t index, std::uint32_t slot) const noexcept {
    return open_unit_interval(bits(index, slot / 2)[slot % 2]);
  }

  /// Standard normal draw via the inverse-CDF transform.
  double normal(std::uint32_t index, std::uint32_t slot) const {
    return normal_quantile(uniform(index, slot));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

/// Wiener increments keyed by (seed, trajectory_id, step, channel).
class NoiseStream {
 public:
  constexpr NoiseStream(std::uint64_t seed, std::uint64_t trajectory_id) noexcept
      : rng_(seed, trajectory_id) {}

  std::uint64_t seed() const noexcept { return rng_.seed(); }
  std::uint64_t trajectory_id() const noexcept { return rng_.stream(); }

  /// dW ~ Normal(0, dt) for the given step and channel.
  double increment(std::uint32_t step, std::uint32_t channel, double dt) const {
    return std::sqrt(dt) * rng_.normal(step, channel);
  }

 private:
  CounterRng rng_;
};

}  // namespace unravel
