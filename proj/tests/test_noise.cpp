#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "mvdelay/noise.hpp"
#include "mvdelay/stats.hpp"

using namespace mvdelay;

TEST_CASE("Philox4x32-10 known answers") {
  using W = std::array<std::uint32_t, 4>;
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == W{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        W{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        W{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("NoiseStream is a pure function of its key") {
  const NoiseStream a(42), b(42);
  std::vector<double> x(5), y(5);
  a.gaussian(3, Channel::W1, 17, x);
  b.gaussian(3, Channel::W1, 17, y);
  CHECK(x == y);
  a.gaussian(3, Channel::W2, 17, y);
  CHECK(x != y);
  a.with_family(Family::reference).gaussian(3, Channel::W1, 17, y);
  CHECK(x != y);
  NoiseStream(43).gaussian(3, Channel::W1, 17, y);
  CHECK(x != y);
  a.gaussian(4, Channel::W1, 17, y);
  CHECK(x != y);
  a.gaussian(3, Channel::W1, 18, y);
  CHECK(x != y);
}

TEST_CASE("increments have variance h") {
  const NoiseStream noise(5);
  const std::size_t n = 200000;
  std::vector<double> v(n), one(1);
  for (std::size_t i = 0; i < n; ++i) {
    noise.increment(i, Channel::W1, 0, 0.04, one);
    v[i] = one[0];
  }
  const auto m = mean_and_error(v);
  CHECK(std::abs(m.mean) < 4.0 * m.standard_error);
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = v[i] * v[i];
  const auto var = mean_and_error(sq);
  CHECK(std::abs(var.mean - 0.04) < 4.0 * var.standard_error);
}

TEST_CASE("odd lengths are prefixes of even ones") {
  const NoiseStream noise(1);
  std::vector<double> a(3), b(4);
  noise.gaussian(0, Channel::W1, 0, a);
  noise.gaussian(0, Channel::W1, 0, b);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a[i] == b[i]);
}
