#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvdelay/engine.hpp"
#include "mvdelay/model.hpp"
#include "mvdelay/stats.hpp"

namespace mvdelay {

/// pi_R ramps linearly from 0 at epsilon/2 to 1 at epsilon;
/// pi_S = sqrt(1 - pi_R^2).
class MixingProfile {
 public:
  explicit MixingProfile(double epsilon);
  double epsilon() const { return epsilon_; }
  double pi_R(double x) const;
  double pi_S(double x) const;

 private:
  double epsilon_;
};

MixingProfile pi_functions(double epsilon);

/// (I - 2 u u^T) w with u = z / |z|; the identity when z = 0.
void reflect(std::span<const double> increment, std::span<const double> z, std::span<double> out);
std::vector<double> reflect(std::span<const double> increment, std::span<const double> z);

struct CouplingStep {
  std::size_t step = 0;
  double time = 0.0;
  double endpoint_mean = 0.0;  ///< mean |X(t) - Y(t)|
  double gamma_w1 = 0.0;       ///< mean Gamma distance of the paired segments
  double gamma_w1_se = 0.0;
  double sup_w1 = 0.0;         ///< mean sup distance
  double sup_w2 = 0.0;         ///< root mean square sup distance
  double sup_w2_se = 0.0;
  double mixing_defect = 0.0;  ///< max |pi_R^2 + pi_S^2 - 1| over pairs (reflection only)
  double marginal_w1 = 0.0;    ///< exact W1 of the endpoint marginals (d = 1; NaN otherwise)
};

struct CouplingTrace {
  std::vector<CouplingStep> steps;
  ParticleCloud final_x;
  ParticleCloud final_y;
};

/// Paired clouds X ~ first, Y ~ second, particle i of both driven by the same
/// increments (noise of first.seed). Coefficients read the respective flows.
/// Initial segments come from each scenario's sampler with its own seed, so
/// equal seeds share the underlying normals.
CouplingTrace run_synchronous_pair(const Scenario& first, const Scenario& second, const MeasureFlow& first_flow,
                                   const MeasureFlow& second_flow, std::size_t threads = 1);

/// Asymptotic reflection coupling: X gets beta(pi_S dW1 + pi_R dW~),
/// Y gets beta(pi_S dW1 + pi_R dW~'), both share dW2. Over one Euler step the
/// pi_R components are coupled maximally: Y lands on X with probability
/// min(1, phi(xi + D) / phi(xi)), D the scaled gap of the step means, and
/// otherwise dW~' is dW~ reflected along D.
CouplingTrace run_reflection_pair(const Scenario& first, const Scenario& second, const MeasureFlow& first_flow,
                                  const MeasureFlow& second_flow, double epsilon, std::size_t threads = 1);

struct TestFunction {
  std::string name;
  std::function<double(std::span<const double>)> f;
};

/// tanh of each coordinate, exp(-|x|^2) and a smoothed half-space indicator
/// 1 / (1 + exp(-x_1 / 0.1)).
std::vector<TestFunction> default_test_functions(std::size_t dim);

enum class InitialPairing { independent, optimal };

struct GirsanovOptions {
  std::size_t t0_steps = 100;
  std::size_t n_replicas = 10000;
  InitialPairing pairing = InitialPairing::independent;
  std::size_t threads = 1;
};

struct GirsanovTest {
  std::string f;
  double lhs = 0.0;  ///< mean of R f(X(t0))
  double lhs_se = 0.0;
  double rhs = 0.0;  ///< mean of f(X~(t0))
  double rhs_se = 0.0;
  double combined_se() const;
  bool within(double sigmas = 3.0) const;
};

struct GirsanovReport {
  double endpoint_residual_max = 0.0;
  MeanError E_R;
  MeanError entropy_bound;  ///< R log R
  MeanError q_side;         ///< R * 1/2 sum |phi|^2 h
  MeanError entropy_gap;    ///< paired difference of the two above
  std::vector<GirsanovTest> tests;
  std::vector<double> weights;
  std::vector<double> log_weights;

  bool residual_ok() const { return endpoint_residual_max < 1e-10; }
  bool unit_mean_ok() const;
  bool tests_ok() const;
  bool entropy_ok() const;
  bool passed() const { return residual_ok() && unit_mean_ok() && tests_ok() && entropy_ok(); }
  nlohmann::json to_json() const;
};

/// Coupling by change of conditional measure. Per replica: X0 ~ mu0 and
/// X~0 ~ nu0; X solves the mu-driven equation; Y is assembled from X by
///   Y(t) - X(t) = (1 - t/t0)(X~0(0) - X0(0)) + (t/t0)(xi_mu(t0) - xi_nu(t0))
///                 + xi_nu(t) - xi_mu(t),
/// with xi_mu = int sigma(mu_s) dW2; phi = [B(Y_t, nu_t) - B(X_t, mu_t) - shift] / beta
/// is evaluated at the left point and log R = sum <phi, dW1> - 1/2 sum |phi|^2 h.
/// X~ solves the nu-driven equation with the same increments.
GirsanovReport run_girsanov_pair(const Scenario& mu0, const Scenario& nu0, const MeasureFlow& mu_flow,
                                 const MeasureFlow& nu_flow, const GirsanovOptions& options,
                                 const std::vector<TestFunction>& tests);

}  // namespace mvdelay
