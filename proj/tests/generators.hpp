#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "mvdelay/model.hpp"

namespace gen {

// Small property-test generators on top of a seeded std::mt19937_64.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::mt19937_64& rng() { return rng_; }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal(double mean = 0.0, double sd = 1.0) { return std::normal_distribution<double>(mean, sd)(rng_); }
  std::size_t index(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_); }

  // k / 2^bits with |k| <= 2^bits * range; sums of such values are exact in double.
  double dyadic(int bits = 8, double range = 4.0) {
    const auto scale = static_cast<double>(1u << bits);
    const auto k = std::uniform_int_distribution<long>(static_cast<long>(-range * scale),
                                                       static_cast<long>(range * scale))(rng_);
    return static_cast<double>(k) / scale;
  }

  std::vector<double> vector(std::size_t n, double lo = -3.0, double hi = 3.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = uniform(lo, hi);
    return v;
  }

  mvdelay::ParticleCloud cloud(const mvdelay::TimeGrid& grid, std::size_t dim, std::size_t n, double spread = 2.0) {
    std::vector<double> flat(n * grid.points() * dim);
    for (auto& x : flat) x = normal(0.0, spread);
    return {grid, dim, std::move(flat)};
  }

  mvdelay::ParticleCloud dyadic_cloud(const mvdelay::TimeGrid& grid, std::size_t dim, std::size_t n) {
    std::vector<double> flat(n * grid.points() * dim);
    for (auto& x : flat) x = dyadic();
    return {grid, dim, std::move(flat)};
  }

  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    std::shuffle(p.begin(), p.end(), rng_);
    return p;
  }

 private:
  std::mt19937_64 rng_;
};

inline mvdelay::TimeGrid grid(double h, std::size_t m, std::size_t steps = 0) {
  mvdelay::TimeGrid g;
  g.step_h = h;
  g.delay_steps = m;
  g.horizon_steps = steps;
  return g;
}

}  // namespace gen
