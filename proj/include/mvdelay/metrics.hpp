#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvdelay/model.hpp"

namespace mvdelay {

enum class PathNorm { sup, gamma_r0 };

std::string to_string(PathNorm norm);

/// sup: max_j |xi(t_j)|.
/// gamma_r0: 1/2 |xi(0)| + 1/2 (trapezoidal mean of |xi| over the window).
/// Both reduce to |xi(0)| for a single-point segment.
double path_norm(SegmentView seg, PathNorm norm);
double path_norm(const Segment& seg, PathNorm norm);

/// Norm of the pointwise difference a - b.
double path_distance(SegmentView a, SegmentView b, PathNorm norm);

enum class DistanceMethod { assignment_exact, coupled_pair_bound, sorted_1d };

std::string to_string(DistanceMethod method);

struct EmpiricalDistanceReport {
  double value = 0.0;
  DistanceMethod method = DistanceMethod::assignment_exact;
  int order = 1;
  PathNorm norm = PathNorm::sup;
};

/// Solving the assignment problem beyond this many particles is impractical;
/// experiments switch to coupled_pair_cost (an upper bound) above it.
inline constexpr std::size_t kAssignmentCeiling = 2000;

/// Exact W_p between two equal-size uniform empirical measures on segment
/// space, via the linear assignment problem on C_ij = |xi_i - eta_j|^p.
EmpiricalDistanceReport empirical_wasserstein(const ParticleCloud& a, const ParticleCloud& b, int order,
                                              PathNorm norm);
EmpiricalDistanceReport empirical_wasserstein(const CloudView& a, const CloudView& b, int order, PathNorm norm);

/// ((1/N) sum_i |xi_i - eta_i|^p)^(1/p) for the given pairing. Any pairing is
/// a coupling, so this bounds the empirical distance from above.
double coupled_pair_cost(std::span<const std::pair<Segment, Segment>> pairs, int order, PathNorm norm);
/// Same, with the clouds paired by particle index.
double coupled_pair_cost(const CloudView& a, const CloudView& b, int order, PathNorm norm);

/// Mean and Monte Carlo standard error of a coupled cost across pairs. For
/// order 2 the error is propagated through the square root.
struct CoupledCost {
  double value = 0.0;
  double standard_error = 0.0;
};
CoupledCost coupled_pair_cost_with_error(const CloudView& a, const CloudView& b, int order, PathNorm norm);

/// Upper estimate of W_1 under the product norm sum_{i<=m} |xi_i - eta_i|_Gamma
/// on m-particle marginals of exchangeable systems: m times the mean
/// per-particle Gamma cost of the index pairing.
double product_gamma_cost(const CloudView& a, const CloudView& b, std::size_t m);

/// 1-D W_p via the monotone (sorted) coupling.
double sorted_1d_wasserstein(std::span<const double> xs, std::span<const double> ys, int order);

/// (1/N) sum_i |xi_i|_Gamma^2.
double second_gamma_moment(const ParticleCloud& cloud);
double second_gamma_moment(const CloudView& cloud);

struct RateFit {
  double rate = 0.0;
  double log_intercept = 0.0;
  double r_squared = 0.0;
  double rate_standard_error = 0.0;
  std::size_t points_used = 0;
};

/// Least squares of log(value) on t; rate is the negated slope. The first
/// burn_in points are discarded.
RateFit fit_exponential_rate(std::span<const std::pair<double, double>> series, std::size_t burn_in = 0);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double slope_standard_error = 0.0;
};

/// Ordinary least squares of y on x (used for log-log slopes).
LineFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace mvdelay
