#include "mvdelay/rates.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace mvdelay {

namespace {

using boost::math::quadrature::gauss_kronrod;

double integrate(const std::function<double(double)>& f, double a, double b, double tol, double* error = nullptr) {
  if (b <= a) return 0.0;
  // Boost's error estimate carries a floor proportional to |x|, which short
  // intervals far from the origin never get under; integrate over [0, 1].
  const double len = b - a;
  const auto unit = [&](double t) { return len * f(a + len * t); };
  double err = 0.0;
  const double value = gauss_kronrod<double, 61>::integrate(unit, 0.0, 1.0, 15, tol, &err);
  if (error) *error += err;
  return value;
}

// Integral of gamma over [0, s] for the piecewise kind.
double piecewise_gamma_integral(const RateFunction& rf, double s) {
  const double R = rf.R;
  const double K1 = rf.K1;
  const double first = 0.5 * K1 * std::min(s, R) * std::min(s, R);
  if (s <= R) return first;
  const double a = (K1 + rf.K2) / R;
  const double top = std::min(s, 2.0 * R);
  const double middle = -a * (top * top * top - R * R * R) / 3.0 + (a * R + K1) * (top * top - R * R) / 2.0;
  if (s <= 2.0 * R) return first + middle;
  return first + middle - 0.5 * rf.K2 * (s * s - 4.0 * R * R);
}

// Dissipation rate used for the Gaussian tail bound.
double tail_rate(const RateFunction& rf) { return 0.5 * (rf.K2 - rf.Ksigma); }

double divergence_limit(const RateFunction& rf) { return 1e4 * std::max(1.0, 2.0 * rf.R); }

// Point beyond which gamma_tilde(v) <= -tail_rate v holds.
double decay_start(const RateFunction& rf) {
  if (rf.kind == RateFunction::Kind::piecewise) return 2.0 * rf.R;
  const double c = tail_rate(rf);
  const double limit = divergence_limit(rf);
  const std::size_t samples = 100000;
  const double step = limit / static_cast<double>(samples);
  std::size_t last_bad = 0;
  bool any_bad = false;
  for (std::size_t j = 1; j <= samples; ++j) {
    const double v = step * static_cast<double>(j);
    if (eval_gamma_tilde(rf, v) > -c * v) {
      last_bad = j;
      any_bad = true;
    }
  }
  if (any_bad && last_bad + 10 >= samples)
    throw Error("rate integrals diverge: gamma + Ksigma v is not dissipative by s = 1e4 max(1, 2R)");
  return any_bad ? step * static_cast<double>(last_bad + 1) : 0.0;
}

struct TailIntegral {
  double value = 0.0;
  QuadratureDiagnostics diagnostics;
};

// int_u^ref s exp(Psi(s) - Psi(u)) ds, split at the kinks.
double head_integral(const RateFunction& rf, double u, double ref, double psi_u, double tol, double* error) {
  const auto integrand = [&](double s) { return s * std::exp(eval_Psi(rf, s) - psi_u); };
  std::vector<double> breaks{u};
  if (rf.kind == RateFunction::Kind::piecewise) {
    for (double b : {rf.R, 2.0 * rf.R})
      if (b > u && b < ref) breaks.push_back(b);
  }
  breaks.push_back(ref);
  double value = 0.0;
  for (std::size_t j = 0; j + 1 < breaks.size(); ++j) value += integrate(integrand, breaks[j], breaks[j + 1], tol, error);
  return value;
}

// int_u^inf s exp(Psi(s) - Psi(u)) ds with a certified Gaussian tail bound.
TailIntegral tail_integral(const RateFunction& rf, double u, double s0, double tol) {
  TailIntegral out;
  out.diagnostics.tolerance = tol;
  const double psi_u = eval_Psi(rf, u);
  const auto integrand = [&](double s) { return s * std::exp(eval_Psi(rf, s) - psi_u); };
  const double ref = std::max(u, s0);
  double error = 0.0;
  out.value = head_integral(rf, u, ref, psi_u, tol, &error);

  const double beta2 = rf.beta * rf.beta;
  const double c = tail_rate(rf);
  const double width = 2.0 * std::sqrt(beta2 / c);
  const double scale = std::exp(eval_Psi(rf, ref) - psi_u) * (2.0 * beta2 / c);
  const auto bound = [&](double S) { return scale * std::exp(-c * (S * S - ref * ref) / (4.0 * beta2)); };
  double lower = ref;
  const double limit = std::max(divergence_limit(rf), ref + 64.0 * width);
  while (true) {
    const double upper = lower + width;
    out.value += integrate(integrand, lower, upper, tol, &error);
    lower = upper;
    if (bound(lower) < tol * out.value) break;
    if (lower > limit) throw Error("rate integrals diverge: tail bound does not fall below tolerance");
  }
  out.diagnostics.truncation = lower;
  out.diagnostics.tail_bound = bound(lower);
  out.diagnostics.error_estimate = error;
  return out;
}

double sup_gamma_plus(const RateFunction& rf, double epsilon) {
  double best = 0.0;
  if (rf.kind == RateFunction::Kind::piecewise) {
    const double R = rf.R;
    std::vector<double> candidates{std::min(epsilon, R), std::min(epsilon, 2.0 * R)};
    const double a = (rf.K1 + rf.K2) / R;
    const double vertex = 0.5 * (rf.K1 / a + R);
    if (vertex > R && vertex < std::min(epsilon, 2.0 * R)) candidates.push_back(vertex);
    for (double r : candidates) best = std::max(best, eval_gamma(rf, r));
    return best;
  }
  const std::size_t samples = 10000;
  for (std::size_t j = 0; j <= samples; ++j)
    best = std::max(best, eval_gamma(rf, epsilon * static_cast<double>(j) / static_cast<double>(samples)));
  return best;
}

}  // namespace

RateFunction RateFunction::piecewise(double K1, double K2, double R, double Ksigma, double beta) {
  RateFunction rf;
  rf.kind = Kind::piecewise;
  rf.K1 = K1;
  rf.K2 = K2;
  rf.R = R;
  rf.Ksigma = Ksigma;
  rf.beta = beta;
  rf.validate();
  return rf;
}

RateFunction RateFunction::custom(std::function<double(double)> gamma, double K2, double Ksigma, double beta) {
  RateFunction rf;
  rf.kind = Kind::custom;
  rf.gamma = std::move(gamma);
  rf.K2 = K2;
  rf.Ksigma = Ksigma;
  rf.beta = beta;
  rf.validate();
  return rf;
}

RateFunction RateFunction::from_constants(const ModelConstants& constants, double beta) {
  return piecewise(constants.K1, constants.K2, constants.R, constants.Ksigma, beta);
}

void RateFunction::validate() const {
  if (beta == 0.0 || !std::isfinite(beta)) throw Error("rate function: beta must be nonzero");
  if (Ksigma < 0.0) throw Error("rate function: Ksigma must be nonnegative");
  if (!(K2 > Ksigma)) throw Error("rate function: requires K2 > Ksigma");
  if (kind == Kind::piecewise) {
    if (K1 < 0.0) throw Error("rate function: K1 must be nonnegative");
    if (!(R > 0.0)) throw Error("rate function: R must be positive");
  } else if (!gamma) {
    throw Error("rate function: custom kind needs a callable");
  }
}

double eval_gamma(const RateFunction& rf, double r) {
  if (r < 0.0) throw Error("eval_gamma: r must be nonnegative");
  if (rf.kind == RateFunction::Kind::custom) return rf.gamma(r);
  if (r <= rf.R) return rf.K1 * r;
  if (r <= 2.0 * rf.R) return (-((rf.K1 + rf.K2) / rf.R) * (r - rf.R) + rf.K1) * r;
  return -rf.K2 * r;
}

double eval_gamma_tilde(const RateFunction& rf, double r) { return eval_gamma(rf, r) + rf.Ksigma * r; }

double eval_Psi(const RateFunction& rf, double s) {
  if (s < 0.0) throw Error("eval_Psi: s must be nonnegative");
  const double scale = 1.0 / (2.0 * rf.beta * rf.beta);
  if (rf.kind == RateFunction::Kind::piecewise)
    return scale * (piecewise_gamma_integral(rf, s) + 0.5 * rf.Ksigma * s * s);
  const auto g = [&](double v) { return eval_gamma_tilde(rf, v); };
  return scale * integrate(g, 0.0, s, 1e-10);
}

DeltaResult compute_delta(const RateFunction& rf, double tol) {
  rf.validate();
  const auto tail = tail_integral(rf, 0.0, decay_start(rf), tol);
  return {tail.value, tail.diagnostics};
}

double eval_f_prime(const RateFunction& rf, double u, double tol) {
  rf.validate();
  if (u < 0.0) throw Error("eval_f_prime: u must be nonnegative");
  return tail_integral(rf, u, decay_start(rf), tol).value;
}

double eval_f(const RateFunction& rf, double r, double tol) {
  rf.validate();
  if (r < 0.0) throw Error("eval_f: r must be nonnegative");
  if (r == 0.0) return 0.0;
  const double s0 = decay_start(rf);
  const double psi_s0 = eval_Psi(rf, s0);
  const double beyond = s0 > 0.0 ? tail_integral(rf, s0, s0, tol).value : 0.0;
  const auto fp = [&](double u) {
    if (u >= s0) return tail_integral(rf, u, s0, tol).value;
    const double psi_u = eval_Psi(rf, u);
    return std::exp(psi_s0 - psi_u) * beyond + head_integral(rf, u, s0, psi_u, tol, nullptr);
  };
  std::vector<double> breaks{0.0};
  if (rf.kind == RateFunction::Kind::piecewise)
    for (double b : {rf.R, 2.0 * rf.R})
      if (b < r) breaks.push_back(b);
  breaks.push_back(r);
  const double panel = 0.5 * std::abs(rf.beta) / std::sqrt(tail_rate(rf));
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < breaks.size(); ++j) {
    const double len = breaks[j + 1] - breaks[j];
    const auto pieces = static_cast<std::size_t>(std::ceil(len / panel));
    for (std::size_t k = 0; k < pieces; ++k) {
      const double a = breaks[j] + len * static_cast<double>(k) / static_cast<double>(pieces);
      const double b = breaks[j] + len * static_cast<double>(k + 1) / static_cast<double>(pieces);
      total += gauss_kronrod<double, 61>::integrate(fp, a, b, 0);
    }
  }
  return total;
}

Theorem23Check check_theorem23_condition(double K1, double K2, double K3, double r0) {
  if (K1 < 0.0 || K2 < 0.0 || r0 < 0.0) throw Error("check_theorem23_condition: constants must be nonnegative");
  if (!(K3 > 0.0)) throw Error("check_theorem23_condition: K3 must be positive");
  Theorem23Check out;
  out.condition.lhs = 20.0 * K1 + 2.0 * K2;
  out.condition.rhs = K3 * std::exp(-K3 * r0);
  out.condition.holds = out.condition.lhs < out.condition.rhs;
  out.prefactor = 2.0 * std::exp(K3 * r0);
  out.exponent = std::exp(K3 * r0) * (out.condition.lhs - out.condition.rhs);
  return out;
}

RateReport theorem33_rates(const RateFunction& rf, double Kb, double r0, double tol) {
  if (Kb < 0.0 || r0 < 0.0) throw Error("theorem33_rates: Kb and r0 must be nonnegative");
  const auto delta = compute_delta(rf, tol);
  RateReport report;
  const double beta2 = rf.beta * rf.beta;
  const double kappa = rf.K2 - rf.Ksigma;
  report.delta = delta.delta;
  report.diagnostics = delta.diagnostics;
  report.lambda0 = 2.0 * beta2 / report.delta;
  const double growth = std::exp(report.lambda0 * r0);
  report.c = kappa / beta2 * growth * report.delta;
  report.lambda = report.lambda0 - report.c * Kb;
  report.contractive = report.lambda > 0.0;
  const double kd1 = 2.0 * beta2 * beta2 / (growth * kappa * report.delta * report.delta);
  const double ctk0 = 2.0 * kappa * std::exp(-2.0 * kappa * r0) / 6.0;
  report.kb_kd1 = {Kb < kd1, Kb, kd1};
  report.CTK0 = {Kb < ctk0, Kb, ctk0};
  const double kd = std::min(kd1, ctk0);
  report.kb_kd = {Kb < kd, Kb, kd};
  return report;
}

nlohmann::json RateReport::to_json() const {
  const auto cond = [](const ConditionValue& v) { return nlohmann::json{{"holds", v.holds}, {"lhs", v.lhs}, {"rhs", v.rhs}}; };
  return {{"delta", delta},
          {"lambda0", lambda0},
          {"c", c},
          {"lambda", lambda},
          {"contractive", contractive},
          {"conditions", {{"kb_kd1", cond(kb_kd1)}, {"kb_kd", cond(kb_kd)}, {"CTK0", cond(CTK0)}}},
          {"quadrature_diagnostics",
           {{"truncation", diagnostics.truncation},
            {"tail_bound", diagnostics.tail_bound},
            {"error_estimate", diagnostics.error_estimate},
            {"tolerance", diagnostics.tolerance}}}};
}

double ell_epsilon(const RateFunction& rf, double epsilon, double delta) {
  if (epsilon < 0.0) throw Error("ell_epsilon: epsilon must be nonnegative");
  return 2.0 * rf.beta * rf.beta * epsilon + delta * (sup_gamma_plus(rf, epsilon) + rf.Ksigma * epsilon);
}

double ell_epsilon(const RateFunction& rf, double epsilon) {
  return ell_epsilon(rf, epsilon, compute_delta(rf).delta);
}

}  // namespace mvdelay
