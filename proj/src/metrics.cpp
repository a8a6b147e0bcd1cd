#include "mvdelay/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "mvdelay/assignment.hpp"
#include "mvdelay/stats.hpp"

namespace mvdelay {

namespace {

double point_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

double point_distance(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t c = 0; c < x.size(); ++c) {
    const double d = x[c] - y[c];
    s += d * d;
  }
  return std::sqrt(s);
}

// Combines per-point magnitudes |p_j| (j = 0..m) into the requested norm.
template <typename PointMagnitude>
double combine(std::size_t points, PathNorm norm, PointMagnitude&& magnitude) {
  if (points == 1) return magnitude(0);
  if (norm == PathNorm::sup) {
    double best = 0.0;
    for (std::size_t j = 0; j < points; ++j) best = std::max(best, magnitude(j));
    return best;
  }
  const std::size_t m = points - 1;
  const double now = magnitude(m);
  double trapezoid = 0.5 * (magnitude(0) + now);
  for (std::size_t j = 1; j < m; ++j) trapezoid += magnitude(j);
  return 0.5 * now + 0.5 * (trapezoid / static_cast<double>(m));
}

double powered(double x, int order) { return order == 1 ? x : x * x; }

void check_order(int order) {
  if (order != 1 && order != 2) throw Error("wasserstein order must be 1 or 2");
}

void check_compatible(const CloudView& a, const CloudView& b) {
  if (a.size() != b.size()) throw Error("empirical distance requires clouds of equal size");
  if (a.size() == 0) throw Error("empirical distance requires nonempty clouds");
  if (a.dim() != b.dim() || a.points() != b.points())
    throw Error("empirical distance requires clouds on the same grid and dimension");
}

}  // namespace

std::string to_string(PathNorm norm) { return norm == PathNorm::sup ? "sup" : "gamma_r0"; }

std::string to_string(DistanceMethod method) {
  switch (method) {
    case DistanceMethod::assignment_exact: return "assignment_exact";
    case DistanceMethod::coupled_pair_bound: return "coupled_pair_bound";
    case DistanceMethod::sorted_1d: return "sorted_1d";
  }
  return "assignment_exact";
}

double path_norm(SegmentView seg, PathNorm norm) {
  return combine(seg.points(), norm, [&](std::size_t j) { return point_norm(seg.point(j)); });
}

double path_norm(const Segment& seg, PathNorm norm) { return path_norm(seg.view(), norm); }

double path_distance(SegmentView a, SegmentView b, PathNorm norm) {
  if (a.dim() != b.dim() || a.points() != b.points()) throw Error("path distance: shape mismatch");
  return combine(a.points(), norm, [&](std::size_t j) { return point_distance(a.point(j), b.point(j)); });
}

EmpiricalDistanceReport empirical_wasserstein(const CloudView& a, const CloudView& b, int order, PathNorm norm) {
  check_order(order);
  check_compatible(a, b);
  const std::size_t n = a.size();
  EmpiricalDistanceReport report{0.0, DistanceMethod::assignment_exact, order, norm};
  if (n == 1) {
    report.value = path_distance(a.segment(0), b.segment(0), norm);
    return report;
  }
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      cost[i * n + j] = powered(path_distance(a.segment(i), b.segment(j), norm), order);
  const auto matching = solve_assignment(cost, n);
  const double mean = matching.total_cost / static_cast<double>(n);
  report.value = order == 1 ? mean : std::sqrt(mean);
  return report;
}

EmpiricalDistanceReport empirical_wasserstein(const ParticleCloud& a, const ParticleCloud& b, int order,
                                              PathNorm norm) {
  return empirical_wasserstein(a.view(), b.view(), order, norm);
}

double coupled_pair_cost(std::span<const std::pair<Segment, Segment>> pairs, int order, PathNorm norm) {
  check_order(order);
  if (pairs.empty()) throw Error("coupled_pair_cost: empty pair list");
  double total = 0.0;
  for (const auto& [x, y] : pairs) total += powered(path_distance(x.view(), y.view(), norm), order);
  const double mean = total / static_cast<double>(pairs.size());
  return order == 1 ? mean : std::sqrt(mean);
}

double coupled_pair_cost(const CloudView& a, const CloudView& b, int order, PathNorm norm) {
  return coupled_pair_cost_with_error(a, b, order, norm).value;
}

CoupledCost coupled_pair_cost_with_error(const CloudView& a, const CloudView& b, int order, PathNorm norm) {
  check_order(order);
  check_compatible(a, b);
  std::vector<double> costs(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) costs[i] = powered(path_distance(a.segment(i), b.segment(i), norm), order);
  const auto stats = mean_and_error(costs);
  CoupledCost out;
  if (order == 1) {
    out.value = stats.mean;
    out.standard_error = stats.standard_error;
  } else {
    out.value = std::sqrt(stats.mean);
    out.standard_error = out.value > 0.0 ? stats.standard_error / (2.0 * out.value) : 0.0;
  }
  return out;
}

double product_gamma_cost(const CloudView& a, const CloudView& b, std::size_t m) {
  return static_cast<double>(m) * coupled_pair_cost(a, b, 1, PathNorm::gamma_r0);
}

double sorted_1d_wasserstein(std::span<const double> xs, std::span<const double> ys, int order) {
  check_order(order);
  if (xs.size() != ys.size()) throw Error("sorted_1d_wasserstein: inputs must have equal length");
  if (xs.empty()) throw Error("sorted_1d_wasserstein: empty input");
  std::vector<double> a(xs.begin(), xs.end()), b(ys.begin(), ys.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += powered(std::abs(a[i] - b[i]), order);
  const double mean = total / static_cast<double>(a.size());
  return order == 1 ? mean : std::sqrt(mean);
}

double second_gamma_moment(const CloudView& cloud) {
  double total = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double g = path_norm(cloud.segment(i), PathNorm::gamma_r0);
    total += g * g;
  }
  return total / static_cast<double>(cloud.size());
}

double second_gamma_moment(const ParticleCloud& cloud) { return second_gamma_moment(cloud.view()); }

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("fit_line: need at least two paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw Error("fit_line: abscissae must not all coincide");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  const double ss_res = std::max(0.0, syy - fit.slope * sxy);
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  fit.slope_standard_error = x.size() > 2 ? std::sqrt(ss_res / (n - 2.0) / sxx) : 0.0;
  return fit;
}

RateFit fit_exponential_rate(std::span<const std::pair<double, double>> series, std::size_t burn_in) {
  if (burn_in >= series.size() || series.size() - burn_in < 3)
    throw Error("fit_exponential_rate: need at least 3 points after burn-in");
  std::vector<double> t, logv;
  for (std::size_t i = burn_in; i < series.size(); ++i) {
    const auto [time, value] = series[i];
    if (!(value > 0.0)) throw Error("fit_exponential_rate: values must be positive");
    t.push_back(time);
    logv.push_back(std::log(value));
  }
  const auto line = fit_line(t, logv);
  RateFit fit;
  fit.rate = -line.slope;
  fit.log_intercept = line.intercept;
  fit.r_squared = line.r_squared;
  fit.rate_standard_error = line.slope_standard_error;
  fit.points_used = t.size();
  return fit;
}

}  // namespace mvdelay
