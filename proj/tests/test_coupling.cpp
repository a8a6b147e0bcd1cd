#include <doctest.h>

#include <cmath>

#include "generators.hpp"
#include "mvdelay/config.hpp"
#include "mvdelay/coupling.hpp"
#include "mvdelay/noise.hpp"

using namespace mvdelay;
using nlohmann::json;

namespace {

Scenario scenario(json j) { return scenario_from_json(j); }

json ou_pair(double a, std::size_t m, std::size_t steps, double location) {
  return {{"grid", {{"h", 0.01}, {"delay_steps", m}, {"horizon_steps", steps}}},
          {"model", {{"name", "ou"}, {"params", {{"a", a}}}}},
          {"n_particles", 16},
          {"initial", {{"name", "point"}, {"params", {{"location", location}}}}},
          {"seed", 12}};
}

MeasureFlow constant_flow(const Scenario& s) {
  return MeasureFlow::stationary(sample_initial_cloud(s, NoiseStream(s.seed, Family::reference), 2),
                                 s.grid.horizon_steps);
}

}  // namespace

TEST_CASE("pi_functions") {
  const auto p = pi_functions(0.1);
  CHECK(p.pi_R(0.2) == 1.0);
  CHECK(p.pi_S(0.2) == 0.0);
  CHECK(p.pi_R(0.04) == 0.0);
  CHECK(p.pi_S(0.04) == 1.0);
  CHECK(p.pi_R(0.075) == doctest::Approx(0.5));
  CHECK(p.pi_S(0.075) == doctest::Approx(std::sqrt(0.75)));
  CHECK_THROWS_AS(pi_functions(0.0), Error);
  gen::Gen g(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = g.uniform(0.0, 0.3);
    CHECK(std::abs(p.pi_R(x) * p.pi_R(x) + p.pi_S(x) * p.pi_S(x) - 1.0) <= 1e-12);
  }
}

TEST_CASE("reflect") {
  const std::vector<double> w{0.3, -1.2};
  CHECK(reflect(w, std::vector<double>{0.0, 0.0}) == w);
  CHECK(reflect(std::vector<double>{0.7}, std::vector<double>{1.0})[0] == doctest::Approx(-0.7));
  gen::Gen g(2);
  for (int i = 0; i < 200; ++i) {
    const std::size_t d = g.index(1, 5);
    const auto inc = g.vector(d), z = g.vector(d);
    const auto r = reflect(inc, z);
    double a = 0.0, b = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      a += inc[c] * inc[c];
      b += r[c] * r[c];
    }
    CHECK(b == doctest::Approx(a).epsilon(1e-12));
  }
}

TEST_CASE("synchronous coupling of a process with itself is exact") {
  auto j = ou_pair(1.0, 3, 50, 0.0);
  j["initial"] = {{"name", "gaussian"}};
  j["model"]["params"]["kernel"] = {{"name", "bounded_kernel"}, {"epsilon", 0.2}};
  const auto s = scenario(j);
  const auto flow = MeasureFlow::stationary(sample_initial_cloud(s), s.grid.horizon_steps);
  const auto trace = run_synchronous_pair(s, s, flow, flow);
  for (const auto& step : trace.steps) {
    CHECK(step.sup_w2 == 0.0);
    CHECK(step.gamma_w1 == 0.0);
  }
}

TEST_CASE("synchronous coupling of linear OU contracts by |1 - a h| per step") {
  const double a = 2.0;
  const auto first = scenario(ou_pair(a, 0, 100, -1.0));
  const auto second = scenario(ou_pair(a, 0, 100, 1.5));
  const auto trace = run_synchronous_pair(first, second, constant_flow(first), constant_flow(second));
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    CHECK(trace.steps[k].endpoint_mean ==
          doctest::Approx(2.5 * std::pow(1.0 - a * 0.01, static_cast<double>(k))).epsilon(1e-12));
  }
}

TEST_CASE("property: recorded sup distances dominate Gamma distances") {
  auto j1 = ou_pair(1.0, 5, 40, 0.0), j2 = ou_pair(1.0, 5, 40, 1.0);
  j1["initial"] = {{"name", "brownian_history"}};
  j2["initial"] = {{"name", "gaussian"}, {"params", {{"location", 1.0}}}};
  j1["model"]["name"] = j2["model"]["name"] = "double_well";
  j1["model"]["constants"] = j2["model"]["constants"] = {{"K2", 2.0}};
  const auto first = scenario(j1), second = scenario(j2);
  const auto trace = run_synchronous_pair(first, second, constant_flow(first), constant_flow(second));
  for (const auto& step : trace.steps) {
    CHECK(step.gamma_w1 <= step.sup_w1 * (1.0 + 1e-14));
    CHECK(step.sup_w1 <= step.sup_w2 * (1.0 + 1e-14));
  }
}

TEST_CASE("reflection coupling with a wide synchronous band is synchronous") {
  auto j = ou_pair(1.0, 2, 50, 0.3);
  j["model"]["params"]["sigma"] = {{"name", "affine_sigma"}, {"sigma0", 0.1}, {"sigma1", 0.2}};
  const auto s = scenario(j);
  const auto flow = constant_flow(s);
  const auto refl = run_reflection_pair(s, s, flow, flow, 1e6);
  const auto sync = run_synchronous_pair(s, s, flow, flow);
  CHECK(refl.final_x == sync.final_x);
  CHECK(refl.final_y == sync.final_y);
}

TEST_CASE("reflection coupling doubles the relative noise away from the band") {
  auto j1 = ou_pair(1.0, 0, 20, -50.0), j2 = ou_pair(1.0, 0, 20, 50.0);
  j1["model"]["name"] = j2["model"]["name"] = "zero";
  const auto first = scenario(j1), second = scenario(j2);
  const auto trace = run_reflection_pair(first, second, constant_flow(first), constant_flow(second), 1e-3);
  const NoiseStream noise(first.seed);
  std::vector<double> xi(1);
  for (std::size_t i = 0; i < 16; ++i) {
    double z = -100.0;
    for (std::size_t k = 0; k < 20; ++k) {
      noise.gaussian(i, Channel::W1_tilde, k, xi);
      z += 2.0 * std::sqrt(0.01) * xi[0];
    }
    const double x = trace.final_x.segment(i).now()[0];
    const double y = trace.final_y.segment(i).now()[0];
    CHECK(x - y == doctest::Approx(z).epsilon(1e-12));
    CHECK(x + y == doctest::Approx(0.0).epsilon(1e-9));
  }
  for (const auto& step : trace.steps) CHECK(step.mixing_defect <= 1e-12);
}

TEST_CASE("reflection coupling keeps both marginals") {
  // Coupled Y against an uncoupled copy driven by independent noise: the
  // endpoint laws must agree.
  auto j1 = ou_pair(1.0, 0, 100, -1.0), j2 = ou_pair(1.0, 0, 100, 1.0);
  j1["n_particles"] = j2["n_particles"] = 20000;
  const auto first = scenario(j1), second = scenario(j2);
  const auto trace = run_reflection_pair(first, second, constant_flow(first), constant_flow(second), 1e-3);
  // OU from 1: mean e^{-1}, variance (1 - e^{-2}) / 2 under Euler with h = 0.01.
  const double h = 0.01, a = 1.0 - h;
  const double mean = std::pow(a, 100);
  const double var = h * (1.0 - std::pow(a, 200)) / (1.0 - a * a);
  double s1 = 0.0, s2 = 0.0;
  const std::size_t n = trace.final_y.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double y = trace.final_y.segment(i).now()[0];
    s1 += y;
    s2 += (y - mean) * (y - mean);
  }
  CHECK(std::abs(s1 / n - mean) < 4.0 * std::sqrt(var / n));
  CHECK(std::abs(s2 / n - var) < 4.0 * var * std::sqrt(2.0 / n));
  // Most pairs have met by t = 1.
  CHECK(trace.steps.back().endpoint_mean < 0.5 * trace.steps.front().endpoint_mean);
}

TEST_CASE("reflection coupling requires theorem3") {
  auto j = ou_pair(1.0, 0, 5, 0.0);
  j["model"]["mode"] = "theorem2";
  const auto s = scenario(j);
  const auto flow = constant_flow(s);
  CHECK_THROWS_AS(run_reflection_pair(s, s, flow, flow, 0.1), Error);
}

TEST_CASE("coupling rejects mismatched scenarios") {
  const auto a = scenario(ou_pair(1.0, 0, 5, 0.0));
  auto j = ou_pair(1.0, 1, 5, 0.0);
  const auto b = scenario(j);
  CHECK_THROWS_AS(run_synchronous_pair(a, b, constant_flow(a), constant_flow(b)), Error);
}

TEST_CASE("Girsanov: identical laws give unit weights") {
  auto j = ou_pair(1.0, 3, 50, 0.0);
  j["model"]["params"]["sigma"] = {{"name", "moment_sigma"}, {"sigma0", 0.3}, {"sigma1", 0.1}};
  j["model"]["mode"] = "theorem2";
  j["initial"] = {{"name", "gaussian"}, {"params", {{"scale", 0.5}}}};
  const auto s = scenario(j);
  const auto flow = MeasureFlow::stationary(sample_initial_cloud(s), s.grid.horizon_steps);
  GirsanovOptions opt;
  opt.t0_steps = 50;
  opt.n_replicas = 200;
  opt.pairing = InitialPairing::optimal;
  const auto report = run_girsanov_pair(s, s, flow, flow, opt, default_test_functions(1));
  CHECK(report.endpoint_residual_max < 1e-10);
  for (double w : report.weights) CHECK(w == 1.0);
  CHECK(report.entropy_bound.mean == 0.0);
  CHECK(report.passed());
}

TEST_CASE("Girsanov: shifted initial laws") {
  auto j = ou_pair(1.0, 5, 100, 0.0);
  j["model"]["params"]["kernel"] = {{"name", "linear_kernel"}, {"epsilon", 0.2}};
  j["model"]["params"]["sigma"] = {{"name", "moment_sigma"}, {"sigma0", 0.3}, {"sigma1", 0.1}, {"summary", "rms"}};
  j["model"]["mode"] = "theorem2";
  j["initial"] = {{"name", "gaussian"}, {"params", {{"scale", 0.5}}}};
  const auto mu = scenario(j);
  j["initial"]["params"]["location"] = 0.4;
  const auto nu = scenario(j);
  const auto fm = MeasureFlow::stationary(sample_initial_cloud(mu), 100);
  const auto fn = MeasureFlow::stationary(sample_initial_cloud(nu), 100);
  GirsanovOptions opt;
  opt.t0_steps = 100;
  opt.n_replicas = 4000;
  const auto report = run_girsanov_pair(mu, nu, fm, fn, opt, default_test_functions(1));
  CHECK(report.endpoint_residual_max < 1e-10);
  CHECK(report.entropy_bound.mean > 0.0);
  CHECK(report.passed());
  CHECK(report.to_json()["tests"].size() == 3);
  opt.t0_steps = 101;
  CHECK_THROWS_AS(run_girsanov_pair(mu, nu, fm, fn, opt, default_test_functions(1)), Error);
  j["model"]["mode"] = "theorem3";
  j["model"]["params"].erase("sigma");
  const auto t3 = scenario(j);
  opt.t0_steps = 10;
  CHECK_THROWS_AS(run_girsanov_pair(t3, t3, fm, fm, opt, default_test_functions(1)), Error);
}
