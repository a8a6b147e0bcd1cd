#include "mvdelay/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mvdelay/metrics.hpp"
#include "mvdelay/noise.hpp"

namespace mvdelay {

namespace {

void check_pair(const Scenario& a, const Scenario& b, const MeasureFlow& fa, const MeasureFlow& fb) {
  a.validate();
  b.validate();
  if (!(a.grid == b.grid)) throw Error("coupling: scenarios must share the time grid");
  if (a.model.name != b.model.name || a.model.dim != b.model.dim || a.model.noise_dim != b.model.noise_dim)
    throw Error("coupling: scenarios must share the model");
  if (a.n_particles != b.n_particles) throw Error("coupling: scenarios must have the same particle count");
  const std::size_t steps = a.grid.horizon_steps;
  if (!fa.has_snapshot(steps) || !fb.has_snapshot(steps)) throw Error("coupling: flows do not cover the horizon");
  if (!(fa.grid().step_h == a.grid.step_h && fa.grid().delay_steps == a.grid.delay_steps) ||
      !(fb.grid().step_h == b.grid.step_h && fb.grid().delay_steps == b.grid.delay_steps))
    throw Error("coupling: flows are on a different grid");
}

CouplingStep measure(const ParticleCloud& x, const ParticleCloud& y, std::size_t step, double h) {
  CouplingStep rec;
  rec.step = step;
  rec.time = static_cast<double>(step) * h;
  const auto gamma = coupled_pair_cost_with_error(x.view(), y.view(), 1, PathNorm::gamma_r0);
  const auto sup2 = coupled_pair_cost_with_error(x.view(), y.view(), 2, PathNorm::sup);
  rec.gamma_w1 = gamma.value;
  rec.gamma_w1_se = gamma.standard_error;
  rec.sup_w2 = sup2.value;
  rec.sup_w2_se = sup2.standard_error;
  rec.sup_w1 = coupled_pair_cost(x.view(), y.view(), 1, PathNorm::sup);
  std::vector<double> ends(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto a = x.segment(i).now();
    const auto b = y.segment(i).now();
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
    ends[i] = std::sqrt(s);
  }
  rec.endpoint_mean = pairwise_sum(ends) / static_cast<double>(ends.size());
  rec.marginal_w1 = std::numeric_limits<double>::quiet_NaN();
  if (x.dim() == 1) {
    std::vector<double> a(x.size()), b(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      a[i] = x.segment(i).now()[0];
      b[i] = y.segment(i).now()[0];
    }
    rec.marginal_w1 = sorted_1d_wasserstein(a, b, 1);
  }
  return rec;
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace

MixingProfile::MixingProfile(double epsilon) : epsilon_(epsilon) {
  if (!(epsilon > 0.0)) throw Error("mixing profile: epsilon must be positive");
}

double MixingProfile::pi_R(double x) const {
  if (x >= epsilon_) return 1.0;
  if (x <= 0.5 * epsilon_) return 0.0;
  return 2.0 * x / epsilon_ - 1.0;
}

double MixingProfile::pi_S(double x) const {
  const double r = pi_R(x);
  return std::sqrt(std::max(0.0, 1.0 - r * r));
}

MixingProfile pi_functions(double epsilon) { return MixingProfile(epsilon); }

void reflect(std::span<const double> increment, std::span<const double> z, std::span<double> out) {
  if (increment.size() != z.size() || out.size() != z.size()) throw Error("reflect: dimension mismatch");
  const double zz = norm2(z);
  if (zz == 0.0) {
    std::copy(increment.begin(), increment.end(), out.begin());
    return;
  }
  double dot = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) dot += increment[c] * z[c];
  const double scale = 2.0 * dot / zz;
  for (std::size_t c = 0; c < z.size(); ++c) out[c] = increment[c] - scale * z[c];
}

std::vector<double> reflect(std::span<const double> increment, std::span<const double> z) {
  std::vector<double> out(increment.size());
  reflect(increment, z, out);
  return out;
}

CouplingTrace run_synchronous_pair(const Scenario& first, const Scenario& second, const MeasureFlow& first_flow,
                                   const MeasureFlow& second_flow, std::size_t threads) {
  check_pair(first, second, first_flow, second_flow);
  const NoiseStream noise(first.seed, Family::main);
  ParticleCloud x = sample_initial_cloud(first);
  ParticleCloud y = sample_initial_cloud(second);
  const double h = first.grid.step_h;
  CouplingTrace trace;
  std::vector<double> ex(x.size() * x.dim()), ey(ex.size());
  for (std::size_t k = 0; k < first.grid.horizon_steps; ++k) {
    trace.steps.push_back(measure(x, y, k, h));
    const BoundCoefficients cx(first.model, first_flow.snapshot(k));
    const BoundCoefficients cy(second.model, second_flow.snapshot(k));
    euler_endpoints(x.view(), cx, noise, k, h, ex, 0, threads);
    euler_endpoints(y.view(), cy, noise, k, h, ey, 0, threads);
    x = x.advanced(ex);
    y = y.advanced(ey);
  }
  trace.steps.push_back(measure(x, y, first.grid.horizon_steps, h));
  trace.final_x = std::move(x);
  trace.final_y = std::move(y);
  return trace;
}

CouplingTrace run_reflection_pair(const Scenario& first, const Scenario& second, const MeasureFlow& first_flow,
                                  const MeasureFlow& second_flow, double epsilon, std::size_t threads) {
  const MixingProfile profile(epsilon);
  check_pair(first, second, first_flow, second_flow);
  if (first.model.mode != Mode::theorem3) throw Error("reflection coupling requires a theorem3 model");
  const NoiseStream noise(first.seed, Family::main);
  ParticleCloud x = sample_initial_cloud(first);
  ParticleCloud y = sample_initial_cloud(second);
  const double h = first.grid.step_h;
  const double sqrt_h = std::sqrt(h);
  const double beta = first.model.beta;
  const std::size_t n = x.size();
  const std::size_t d = first.model.dim;
  const std::size_t d2 = first.model.noise_dim;
  const bool with_sigma = first.model.has_sigma();
  CouplingTrace trace;
  std::vector<double> ex(n * d), ey(n * d), defect(n);
  for (std::size_t k = 0; k < first.grid.horizon_steps; ++k) {
    auto rec = measure(x, y, k, h);
    const BoundCoefficients cx(first.model, first_flow.snapshot(k));
    const BoundCoefficients cy(second.model, second_flow.snapshot(k));
    parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
      std::vector<double> w(d), xi(d), eta(d), w2(d2), u(1), sx(d * d2), sy(d * d2), mx(d), my(d), delta(d);
      for (std::size_t i = begin; i < end; ++i) {
        const auto xs = x.segment(i);
        const auto ys = y.segment(i);
        noise.increment(i, Channel::W1, k, h, w);
        noise.gaussian(i, Channel::W1_tilde, k, xi);
        cx.drift(xs, mx);
        cy.drift(ys, my);
        if (with_sigma) {
          noise.increment(i, Channel::W2, k, h, w2);
          cx.diffusion(xs, sx);
          cy.diffusion(ys, sy);
        }
        double dist2 = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          const double z = xs.now()[c] - ys.now()[c];
          dist2 += z * z;
        }
        const double dist = std::sqrt(dist2);
        const double pr = profile.pi_R(dist);
        const double ps = profile.pi_S(dist);
        defect[i] = std::abs(pr * pr + ps * ps - 1.0);
        const double s = beta * pr * sqrt_h;
        // Means of the step given everything but the reflected component.
        for (std::size_t c = 0; c < d; ++c) {
          double nx = xs.now()[c] + mx[c] * h + beta * ps * w[c];
          double ny = ys.now()[c] + my[c] * h + beta * ps * w[c];
          for (std::size_t l = 0; with_sigma && l < d2; ++l) {
            nx += sx[c * d2 + l] * w2[l];
            ny += sy[c * d2 + l] * w2[l];
          }
          mx[c] = nx;
          my[c] = ny;
        }
        double* px = ex.data() + i * d;
        double* py = ey.data() + i * d;
        if (s == 0.0) {
          std::copy(mx.begin(), mx.end(), px);
          std::copy(my.begin(), my.end(), py);
          continue;
        }
        // Maximal reflection coupling of N(mx, s^2) and N(my, s^2).
        double dd = 0.0, cross = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          delta[c] = (mx[c] - my[c]) / s;
          dd += delta[c] * delta[c];
          cross += xi[c] * delta[c];
        }
        noise.gaussian(i, Channel::coupling, k, u);
        const double uniform = 0.5 * std::erfc(-u[0] / std::sqrt(2.0));
        const bool meet = std::log(uniform) <= -cross - 0.5 * dd;
        reflect(xi, delta, eta);
        for (std::size_t c = 0; c < d; ++c) {
          px[c] = mx[c] + s * xi[c];
          py[c] = meet ? px[c] : my[c] + s * eta[c];
        }
      }
    });
    for (std::size_t j = 0; j < n * d; ++j)
      if (!std::isfinite(ex[j]) || !std::isfinite(ey[j])) throw BlowUpError(j / d, k);
    rec.mixing_defect = *std::max_element(defect.begin(), defect.end());
    trace.steps.push_back(rec);
    x = x.advanced(ex);
    y = y.advanced(ey);
  }
  trace.steps.push_back(measure(x, y, first.grid.horizon_steps, h));
  trace.final_x = std::move(x);
  trace.final_y = std::move(y);
  return trace;
}

std::vector<TestFunction> default_test_functions(std::size_t dim) {
  std::vector<TestFunction> out;
  for (std::size_t c = 0; c < dim; ++c) {
    const std::string name = dim == 1 ? "tanh" : "tanh_x" + std::to_string(c + 1);
    out.push_back({name, [c](std::span<const double> x) { return std::tanh(x[c]); }});
  }
  out.push_back({"gaussian_bump", [](std::span<const double> x) { return std::exp(-norm2(x)); }});
  out.push_back({"smoothed_halfspace", [](std::span<const double> x) { return 1.0 / (1.0 + std::exp(-x[0] / 0.1)); }});
  return out;
}

double GirsanovTest::combined_se() const { return std::sqrt(lhs_se * lhs_se + rhs_se * rhs_se); }

bool GirsanovTest::within(double sigmas) const { return std::abs(lhs - rhs) <= sigmas * combined_se(); }

bool GirsanovReport::unit_mean_ok() const { return std::abs(E_R.mean - 1.0) <= 3.0 * E_R.standard_error; }

bool GirsanovReport::tests_ok() const {
  return std::all_of(tests.begin(), tests.end(), [](const GirsanovTest& t) { return t.within(3.0); });
}

bool GirsanovReport::entropy_ok() const {
  return entropy_bound.mean >= -1e-12 && std::abs(entropy_gap.mean) <= 3.0 * entropy_gap.standard_error;
}

nlohmann::json GirsanovReport::to_json() const {
  nlohmann::json j;
  j["endpoint_residual_max"] = endpoint_residual_max;
  j["E_R"] = {{"mean", E_R.mean}, {"se", E_R.standard_error}};
  j["entropy_bound"] = {{"mean", entropy_bound.mean}, {"se", entropy_bound.standard_error}};
  j["q_side"] = {{"mean", q_side.mean}, {"se", q_side.standard_error}};
  j["entropy_gap"] = {{"mean", entropy_gap.mean}, {"se", entropy_gap.standard_error}};
  j["tests"] = nlohmann::json::array();
  for (const auto& t : tests)
    j["tests"].push_back({{"f", t.f}, {"lhs", t.lhs}, {"lhs_se", t.lhs_se}, {"rhs", t.rhs}, {"rhs_se", t.rhs_se}});
  j["checks"] = {{"residual", residual_ok()},
                 {"unit_mean", unit_mean_ok()},
                 {"tests", tests_ok()},
                 {"entropy", entropy_ok()},
                 {"passed", passed()}};
  j["n_replicas"] = weights.size();
  return j;
}

GirsanovReport run_girsanov_pair(const Scenario& mu0, const Scenario& nu0, const MeasureFlow& mu_flow,
                                 const MeasureFlow& nu_flow, const GirsanovOptions& options,
                                 const std::vector<TestFunction>& tests) {
  mu0.validate();
  nu0.validate();
  if (mu0.model.mode != Mode::theorem2 || nu0.model.mode != Mode::theorem2)
    throw Error("girsanov coupling requires theorem2 models");
  if (!(mu0.grid == nu0.grid) || mu0.model.dim != nu0.model.dim || mu0.model.noise_dim != nu0.model.noise_dim)
    throw Error("girsanov coupling: scenarios must share grid and dimensions");
  if (mu0.model.beta == 0.0) throw Error("girsanov coupling: beta must be nonzero");
  const std::size_t steps = options.t0_steps;
  if (steps == 0 || steps > mu0.grid.horizon_steps) throw Error("girsanov coupling: t0 must be a positive grid step within the horizon");
  if (!mu_flow.has_snapshot(steps) || !nu_flow.has_snapshot(steps))
    throw Error("girsanov coupling: flows do not reach t0");
  if (options.n_replicas < 2) throw Error("girsanov coupling: need at least two replicas");

  const std::size_t n = options.n_replicas;
  const std::size_t d = mu0.model.dim;
  const std::size_t d2 = mu0.model.noise_dim;
  const double h = mu0.grid.step_h;
  const double beta = mu0.model.beta;
  const std::size_t threads = options.threads;
  const NoiseStream noise(mu0.seed, Family::replica);

  const ParticleCloud x0 = sample_initial_cloud(mu0, noise, n);
  const NoiseStream tilde_noise =
      options.pairing == InitialPairing::optimal ? noise : NoiseStream(nu0.seed, Family::initial_alt);
  if (options.pairing == InitialPairing::optimal &&
      (mu0.initial.kind == InitialSampler::Kind::brownian_history ||
       nu0.initial.kind == InitialSampler::Kind::brownian_history))
    throw Error("girsanov coupling: optimal pairing needs point or gaussian initials");
  const ParticleCloud xt0 = sample_initial_cloud(nu0, tilde_noise, n);

  // Measure-only diffusion matrices per step.
  std::vector<std::vector<double>> sig_mu(steps), sig_nu(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    sig_mu[k].assign(d * d2, 0.0);
    sig_nu[k].assign(d * d2, 0.0);
    if (!mu0.model.has_sigma()) continue;
    const BoundCoefficients cm(mu0.model, mu_flow.snapshot(k));
    const BoundCoefficients cn(nu0.model, nu_flow.snapshot(k));
    cm.diffusion(x0.segment(0), sig_mu[k]);
    cn.diffusion(x0.segment(0), sig_nu[k]);
  }
  auto accumulate_xi = [&](std::size_t k, std::span<const double> w2, std::span<double> xm, std::span<double> xn) {
    for (std::size_t c = 0; c < d; ++c)
      for (std::size_t e = 0; e < d2; ++e) {
        xm[c] += sig_mu[k][c * d2 + e] * w2[e];
        xn[c] += sig_nu[k][c * d2 + e] * w2[e];
      }
  };

  // xi_mu(t0) - xi_nu(t0) per replica.
  std::vector<double> xi_gap(n * d, 0.0);
  if (mu0.model.has_sigma()) {
    parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
      std::vector<double> w2(d2), xm(d), xn(d);
      for (std::size_t i = begin; i < end; ++i) {
        std::fill(xm.begin(), xm.end(), 0.0);
        std::fill(xn.begin(), xn.end(), 0.0);
        for (std::size_t k = 0; k < steps; ++k) {
          noise.increment(i, Channel::W2, k, h, w2);
          accumulate_xi(k, w2, xm, xn);
        }
        for (std::size_t c = 0; c < d; ++c) xi_gap[i * d + c] = xm[c] - xn[c];
      }
    });
  }
  const double t0 = static_cast<double>(steps) * h;
  std::vector<double> shift(n * d);
  std::vector<double> start_gap(n * d);  // X~0(0) - X0(0)
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = x0.segment(i).now();
    const auto b = xt0.segment(i).now();
    for (std::size_t c = 0; c < d; ++c) {
      start_gap[i * d + c] = b[c] - a[c];
      shift[i * d + c] = (xi_gap[i * d + c] - start_gap[i * d + c]) / t0;
    }
  }

  MeasureFlow xs(x0, steps), ys(xt0, steps), xts(xt0, steps);
  std::vector<double> xi_mu(n * d, 0.0), xi_nu(n * d, 0.0);
  std::vector<double> log_r(n, 0.0), phi_energy(n, 0.0);
  std::vector<double> dw1(n * d), dw2(n * d2), ex(n * d), ext(n * d), ey(n * d);
  for (std::size_t k = 0; k < steps; ++k) {
    const BoundCoefficients cm(mu0.model, mu_flow.snapshot(k));
    const BoundCoefficients cn(nu0.model, nu_flow.snapshot(k));
    const CloudView xv = xs.snapshot(k);
    const CloudView yv = ys.snapshot(k);
    const double frac = static_cast<double>(k + 1) / static_cast<double>(steps);
    parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
      std::vector<double> bx(d), by(d);
      for (std::size_t i = begin; i < end; ++i) {
        auto w1 = std::span<double>(dw1).subspan(i * d, d);
        auto w2 = std::span<double>(dw2).subspan(i * d2, d2);
        noise.increment(i, Channel::W1, k, h, w1);
        if (mu0.model.has_sigma()) noise.increment(i, Channel::W2, k, h, w2);
        cm.drift(xv.segment(i), bx);
        cn.drift(yv.segment(i), by);
        double lr = 0.0, energy = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          const double phi = (by[c] - bx[c] - shift[i * d + c]) / beta;
          lr += phi * w1[c] - 0.5 * phi * phi * h;
          energy += phi * phi * h;
        }
        log_r[i] += lr;
        phi_energy[i] += energy;
      }
    });
    euler_endpoints_with(xv, cm, dw1, dw2, k, h, ex, threads);
    euler_endpoints_with(xts.snapshot(k), cn, dw1, dw2, k, h, ext, threads);
    for (std::size_t i = 0; i < n; ++i) {
      if (mu0.model.has_sigma())
        accumulate_xi(k, std::span<const double>(dw2).subspan(i * d2, d2), std::span<double>(xi_mu).subspan(i * d, d),
                      std::span<double>(xi_nu).subspan(i * d, d));
      for (std::size_t c = 0; c < d; ++c) {
        const std::size_t q = i * d + c;
        const double gap = (1.0 - frac) * start_gap[q] + frac * xi_gap[q] + xi_nu[q] - xi_mu[q];
        ey[q] = ex[q] + gap;
      }
    }
    xs.append(ex);
    xts.append(ext);
    ys.append(ey);
  }

  GirsanovReport report;
  report.log_weights = log_r;
  report.weights.resize(n);
  std::vector<double> r_log_r(n), q(n), gap(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = std::exp(log_r[i]);
    report.weights[i] = r;
    r_log_r[i] = r * log_r[i];
    q[i] = r * 0.5 * phi_energy[i];
    gap[i] = r_log_r[i] - q[i];
    const auto a = xs.snapshot(steps).segment(i).now();
    const auto b = ys.snapshot(steps).segment(i).now();
    for (std::size_t c = 0; c < d; ++c)
      report.endpoint_residual_max = std::max(report.endpoint_residual_max, std::abs(a[c] - b[c]));
  }
  report.E_R = mean_and_error(report.weights);
  report.entropy_bound = mean_and_error(r_log_r);
  report.q_side = mean_and_error(q);
  report.entropy_gap = mean_and_error(gap);
  std::vector<double> lhs(n), rhs(n);
  for (const auto& t : tests) {
    for (std::size_t i = 0; i < n; ++i) {
      lhs[i] = report.weights[i] * t.f(xs.snapshot(steps).segment(i).now());
      rhs[i] = t.f(xts.snapshot(steps).segment(i).now());
    }
    const auto l = mean_and_error(lhs);
    const auto r = mean_and_error(rhs);
    report.tests.push_back({t.name, l.mean, l.standard_error, r.mean, r.standard_error});
  }
  return report;
}

}  // namespace mvdelay
