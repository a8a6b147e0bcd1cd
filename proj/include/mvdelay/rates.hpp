#pragma once

#include <functional>

#include <nlohmann/json.hpp>

#include "mvdelay/model.hpp"

namespace mvdelay {

/// The dissipativity profile gamma of the drift, plus K_sigma and beta.
///
/// piecewise: gamma(r) = K1 r                              r <= R
///                             (-(K1 + K2)/R (r - R) + K1) r     R < r <= 2R
///                             -K2 r                             r > 2R
/// custom: any callable; K2 must be declared so that
/// gamma(v) + K_sigma v <= -(K2 - K_sigma) v / 2 eventually.
struct RateFunction {
  enum class Kind { piecewise, custom };
  Kind kind = Kind::piecewise;
  double K1 = 0.0;
  double K2 = 1.0;
  double R = 1.0;
  double Ksigma = 0.0;
  double beta = 1.0;
  std::function<double(double)> gamma;

  static RateFunction piecewise(double K1, double K2, double R, double Ksigma, double beta);
  static RateFunction custom(std::function<double(double)> gamma, double K2, double Ksigma, double beta);
  static RateFunction from_constants(const ModelConstants& constants, double beta);
  void validate() const;
};

double eval_gamma(const RateFunction& rf, double r);
/// gamma(r) + K_sigma r.
double eval_gamma_tilde(const RateFunction& rf, double r);
/// Psi(s) = (1 / 2 beta^2) int_0^s gamma_tilde(v) dv; closed form for the
/// piecewise kind, adaptive quadrature (relative 1e-10) otherwise.
double eval_Psi(const RateFunction& rf, double s);

struct QuadratureDiagnostics {
  double truncation = 0.0;   ///< upper limit s* of the numerical integral
  double tail_bound = 0.0;   ///< certified bound on the neglected tail
  double error_estimate = 0.0;
  double tolerance = 0.0;
};

struct DeltaResult {
  double delta = 0.0;
  QuadratureDiagnostics diagnostics;
};

/// delta = int_0^inf s exp(Psi(s)) ds.
DeltaResult compute_delta(const RateFunction& rf, double tol = 1e-12);
/// f'(u) = int_u^inf s exp(Psi(s) - Psi(u)) ds.
double eval_f_prime(const RateFunction& rf, double u, double tol = 1e-13);
/// f(r) = int_0^r f'(u) du.
double eval_f(const RateFunction& rf, double r, double tol = 1e-13);

struct ConditionValue {
  bool holds = false;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct Theorem23Check {
  ConditionValue condition;  ///< 20 K1 + 2 K2 < K3 exp(-K3 r0)
  double prefactor = 0.0;    ///< 2 exp(K3 r0)
  double exponent = 0.0;     ///< exp(K3 r0)(2 K2 + 20 K1 - K3 exp(-K3 r0))
};

Theorem23Check check_theorem23_condition(double K1, double K2, double K3, double r0);

struct RateReport {
  double delta = 0.0;
  double lambda0 = 0.0;
  double c = 0.0;
  double lambda = 0.0;
  bool contractive = false;
  ConditionValue kb_kd1;
  ConditionValue kb_kd;
  ConditionValue CTK0;
  QuadratureDiagnostics diagnostics;
  nlohmann::json to_json() const;
};

/// delta, lambda0 = 2 beta^2 / delta, c = ((K2 - Ks) / beta^2) e^(lambda0 r0) delta,
/// lambda = lambda0 - c Kb, plus the Kb conditions. lambda is reported as
/// computed even when it is not positive.
RateReport theorem33_rates(const RateFunction& rf, double Kb, double r0, double tol = 1e-12);

/// l(eps) = 2 beta^2 eps + delta (sup_{[0, eps]} gamma^+ + K_sigma eps).
double ell_epsilon(const RateFunction& rf, double epsilon);
double ell_epsilon(const RateFunction& rf, double epsilon, double delta);

}  // namespace mvdelay
