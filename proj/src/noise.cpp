#include "mvdelay/noise.hpp"

#include <cmath>
#include <numbers>

namespace mvdelay {

namespace {

constexpr std::uint32_t kMulA = 0xD2511F53;
constexpr std::uint32_t kMulB = 0xCD9E8D57;
constexpr std::uint32_t kWeylA = 0x9E3779B9;
constexpr std::uint32_t kWeylB = 0xBB67AE85;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

// Uniform on the open interval (0, 1) from 64 random bits, 53-bit resolution.
inline double open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeylA;
      key[1] += kWeylB;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMulA, ctr[0], hi0, lo0);
    mulhilo(kMulB, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

void NoiseStream::gaussian(std::uint64_t particle, Channel channel, std::uint64_t step, std::span<double> out) const {
  const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
  // Word 2 packs family and channel; word 3 holds the high particle bits and
  // the block index, so streams stay distinct for up to 2^16 blocks.
  const std::uint32_t tag = (static_cast<std::uint32_t>(family_) << 8) | static_cast<std::uint32_t>(channel);
  const auto particle_hi = static_cast<std::uint32_t>(particle >> 32) & 0xFFFFu;
  for (std::size_t k = 0, block = 0; k < out.size(); ++block) {
    const std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(particle),
                                           tag | (static_cast<std::uint32_t>(step >> 32) << 16),
                                           (particle_hi << 16) | static_cast<std::uint32_t>(block)};
    const auto r = philox4x32_10(ctr, key);
    // Box-Muller: one block yields two normals.
    const double u1 = open_unit(r[0], r[1]);
    const double u2 = open_unit(r[2], r[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out[k++] = radius * std::cos(angle);
    if (k < out.size()) out[k++] = radius * std::sin(angle);
  }
}

void NoiseStream::increment(std::uint64_t particle, Channel channel, std::uint64_t step, double h,
                            std::span<double> out) const {
  gaussian(particle, channel, step, out);
  const double scale = std::sqrt(h);
  for (double& v : out) v *= scale;
}

}  // namespace mvdelay
