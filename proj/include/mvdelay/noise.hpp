#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace mvdelay {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11). Stateless: the output is a
/// pure function of (counter, key).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

enum class Channel : std::uint32_t {
  W1 = 0,        ///< additive noise beta dW1
  W2 = 1,        ///< multiplicative noise sigma dW2
  W1_tilde = 2,  ///< auxiliary Brownian motion independent of W1, W2
  initial = 3,   ///< draws of initial segments
  coupling = 4,  ///< acceptance draws of the reflection coupling
};

/// Independent sub-streams of one master seed, e.g. the particles of a
/// simulation versus the particles used to build a reference measure flow.
enum class Family : std::uint32_t {
  main = 0,
  reference = 1,
  replica = 2,
  initial_alt = 3,
};

/// Deterministic Gaussian increments keyed by (seed, family, particle,
/// channel, step). Distinct keys give independent streams; no state is kept,
/// so particles can be advanced in any order or in parallel.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, Family family = Family::main) : seed_(seed), family_(family) {}

  std::uint64_t seed() const { return seed_; }
  Family family() const { return family_; }
  NoiseStream with_family(Family family) const { return {seed_, family}; }

  /// Fills out with i.i.d. N(0, 1) variates.
  void gaussian(std::uint64_t particle, Channel channel, std::uint64_t step, std::span<double> out) const;
  /// Fills out with i.i.d. N(0, h) variates.
  void increment(std::uint64_t particle, Channel channel, std::uint64_t step, double h,
                 std::span<double> out) const;

 private:
  std::uint64_t seed_;
  Family family_;
};

}  // namespace mvdelay
