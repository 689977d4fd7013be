#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <thread>
#include <vector>

#include "unravel/random.hpp"
#include "unravel/summation.hpp"

using namespace unravel;

TEST_CASE("philox4x32-10 known-answer vectors") {
  // Reference vectors distributed with Random123 (kat_vectors).
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  CHECK(Philox4x32::apply(C{0, 0, 0, 0}, K{0, 0}) ==
        C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(Philox4x32::apply(C{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                          K{0xffffffffu, 0xffffffffu}) ==
        C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(Philox4x32::apply(C{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                          K{0xa4093822u, 0x299f31d0u}) ==
        C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("uniforms stay strictly inside (0, 1)") {
  CHECK(open_unit_interval(0) > 0.0);
  CHECK(open_unit_interval(~0ull) < 1.0);
  CHECK(std::isfinite(normal_quantile(open_unit_interval(0))));
  CHECK(std::isfinite(normal_quantile(open_unit_interval(~0ull))));
}

TEST_CASE("normal quantile matches tabulated values") {
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
  CHECK(normal_quantile(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-14));
  CHECK(normal_quantile(0.8413447460685429) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("noise increments are a pure function of their key") {
  const NoiseStream a(42, 7);
  const NoiseStream b(42, 7);
  for (std::uint32_t s = 0; s < 100; ++s)
    for (std::uint32_t k = 0; k < 5; ++k) CHECK(a.increment(s, k, 1e-3) == b.increment(s, k, 1e-3));

  // Evaluation order and thread do not matter.
  std::vector<double> forward(200), backward(200), threaded(200);
  for (std::uint32_t i = 0; i < 200; ++i) forward[i] = a.increment(i / 4, i % 4, 1e-3);
  for (std::uint32_t i = 200; i-- > 0;) backward[i] = a.increment(i / 4, i % 4, 1e-3);
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < 4; ++t)
      pool.emplace_back([&, t] {
        for (std::uint32_t i = t; i < 200; i += 4) threaded[i] = a.increment(i / 4, i % 4, 1e-3);
      });
  }
  CHECK(forward == backward);
  CHECK(forward == threaded);

  CHECK(NoiseStream(42, 8).increment(0, 0, 1.0) != a.increment(0, 0, 1.0));
  CHECK(NoiseStream(43, 7).increment(0, 0, 1.0) != a.increment(0, 0, 1.0));
  CHECK(a.increment(0, 1, 1.0) != a.increment(0, 0, 1.0));
  CHECK(a.increment(1, 0, 1.0) != a.increment(0, 0, 1.0));
}

TEST_CASE("noise increments have mean 0 and variance dt") {
  const double dt = 1e-3;
  const NoiseStream stream(2024, 3);
  const int draws = 100000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < draws; ++i) {
    const double x = stream.increment(static_cast<std::uint32_t>(i / 3),
                                      static_cast<std::uint32_t>(i % 3), dt);
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / draws;
  const double var = sum2 / draws - mean * mean;
  CHECK(std::abs(mean) <= 4 * std::sqrt(dt / draws));
  CHECK(std::abs(var / dt - 1) <= 0.05);
}

TEST_CASE("pairwise sum bracketing depends only on length") {
  std::vector<double> v{1e16, 1.0, -1e16, 1.0, 3.0};
  const double a = pairwise_sum(std::span<const double>(v));
  const double b = pairwise_sum(std::span<const double>(v));
  CHECK(a == b);
  // ((1e16 + 1) + (-1e16 + (1 + 3))) evaluated in that fixed order.
  CHECK(a == (1e16 + 1.0) + (-1e16 + (1.0 + 3.0)));
  CHECK_THROWS(pairwise_sum(std::span<const double>()));
}
