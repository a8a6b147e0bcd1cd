#include <doctest.h>

#include <cmath>

#include "generators.hpp"
#include "mvdelay/config.hpp"
#include "mvdelay/engine.hpp"
#include "mvdelay/metrics.hpp"
#include "mvdelay/registry.hpp"
#include "mvdelay/stats.hpp"

using namespace mvdelay;
using nlohmann::json;

namespace {

CoefficientModel zero_model(std::size_t d = 1) {
  CoefficientModel m;
  m.name = "zero";
  m.dim = d;
  m.noise_dim = d;
  m.b0 = [](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
  m.beta = 0.0;
  return m;
}

Scenario scenario(const std::string& text) { return scenario_from_json(json::parse(text)); }

}  // namespace

TEST_CASE("step_interacting: zero dynamics only advance the clock") {
  gen::Gen g(1);
  const auto cloud = g.cloud(gen::grid(0.1, 3), 2, 6);
  const auto next = step_interacting(cloud, zero_model(2), NoiseStream(1), 0);
  CHECK(next.time() == doctest::Approx(0.1));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK(next.segment(i).now()[0] == cloud.segment(i).now()[0]);
    CHECK(next.segment(i).point(0)[1] == cloud.segment(i).point(1)[1]);
  }
}

TEST_CASE("step_interacting: explicit Euler for OU") {
  auto model = model_from_json(json::parse(R"({"name": "ou", "params": {"a": 1.0}})"));
  const double h = 0.01;
  const ParticleCloud cloud(gen::grid(h, 0), 1, {0.7});
  const NoiseStream noise(99);
  std::vector<double> dw(1);
  noise.increment(0, Channel::W1, 4, h, dw);
  const auto next = step_interacting(cloud, model, noise, 4);
  CHECK(next.segment(0).now()[0] == doctest::Approx(0.7 * (1.0 - h) + dw[0]).epsilon(1e-15));
}

TEST_CASE("step_interacting: kernel averaged over two particles") {
  auto model = zero_model();
  model.kernel = std::make_shared<LinearKernel>(1.0, 0.0);
  const double a = -1.0, b = 2.0, h = 0.1;
  const ParticleCloud cloud(gen::grid(h, 2), 1, {a, a, a, b, b, b});
  const auto next = step_interacting(cloud, model, NoiseStream(0), 0);
  CHECK(next.segment(0).now()[0] == doctest::Approx(a + h * (b - a) / 2));
  CHECK(next.segment(1).now()[0] == doctest::Approx(b + h * (a - b) / 2));
}

TEST_CASE("blow-up is detected") {
  auto model = zero_model();
  model.beta = 1.0;
  model.b0 = [](std::span<const double> x, std::span<double> out) { out[0] = x[0] * x[0] * x[0]; };
  ParticleCloud cloud(gen::grid(1.0, 0), 1, {0.0, 5.0});
  const NoiseStream noise(1);
  bool raised = false;
  try {
    for (std::size_t k = 0; k < 50; ++k) cloud = step_interacting(cloud, model, noise, k);
  } catch (const BlowUpError& e) {
    raised = true;
    CHECK(e.particle() == 1);
  }
  CHECK(raised);
}

TEST_CASE("property: step_frozen equals step_interacting without interaction") {
  gen::Gen g(2);
  const auto model = model_from_json(json::parse(
      R"({"name": "double_well", "params": {"sigma": {"name": "affine_sigma", "sigma0": 0.2, "sigma1": 0.1}},
          "constants": {"K2": 2}})"));
  for (int trial = 0; trial < 10; ++trial) {
    const auto cloud = g.cloud(gen::grid(0.01, g.index(0, 5)), 1, g.index(1, 20), 0.5);
    const auto other = g.cloud(cloud.grid(), 1, 7);
    const auto flow = MeasureFlow::stationary(other, 3);
    const NoiseStream noise(g.index(0, 1000));
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(step_frozen(cloud, flow, model, noise, k) == step_interacting(cloud, model, noise, k));
  }
}

TEST_CASE("step_frozen reads the flow, not the cloud") {
  auto model = model_from_json(json::parse(R"({"name": "ou",
      "params": {"sigma": {"name": "moment_sigma", "sigma0": 0.0, "sigma1": 1.0}}, "mode": "theorem2"})"));
  gen::Gen g(3);
  const auto cloud = g.cloud(gen::grid(0.01, 2), 1, 5);
  const ParticleCloud zeros(cloud.grid(), 1, std::vector<double>(3 * 5, 0.0));
  const NoiseStream noise(3);
  const auto next = step_frozen(cloud, MeasureFlow::stationary(zeros, 1), model, noise, 0);
  std::vector<double> dw(1);
  for (std::size_t i = 0; i < 5; ++i) {
    noise.increment(i, Channel::W1, 0, 0.01, dw);
    const double x = cloud.segment(i).now()[0];
    CHECK(next.segment(i).now()[0] == doctest::Approx(x - 0.01 * x + dw[0]).epsilon(1e-14));
  }
  CHECK_THROWS_AS(step_frozen(cloud, MeasureFlow::stationary(zeros, 1), model, noise, 2), Error);

  // The system's own snapshot as a frozen flow gives the interacting step.
  model.kernel = std::make_shared<BoundedKernel>(0.4, 0.3);
  const MeasureFlow own(cloud, 1);
  CHECK(step_frozen(cloud, own, model, noise, 0) == step_interacting(cloud, model, noise, 0));
}

TEST_CASE("MeasureFlow stores strided snapshots") {
  gen::Gen g(4);
  const auto initial = g.cloud(gen::grid(0.1, 2), 2, 3);
  MeasureFlow flow(initial, 2);
  CHECK(flow.recorded() == 0);
  CHECK(flow.has_snapshot(0));
  CHECK_FALSE(flow.has_snapshot(1));
  std::vector<double> e1(6), e2(6);
  for (auto& v : e1) v = g.normal();
  for (auto& v : e2) v = g.normal();
  flow.append(e1);
  flow.append(e2);
  const auto expected = initial.advanced(e1).advanced(e2);
  CHECK(flow.cloud(2).flat() == expected.flat());
  CHECK(flow.cloud(1).flat() == initial.advanced(e1).flat());
  CHECK_THROWS_AS(flow.append(e1), Error);
  const auto still = MeasureFlow::stationary(initial, 5);
  CHECK(still.cloud(5).flat() == initial.flat());
}

TEST_CASE("Picard: measure-free dynamics converge at once") {
  const auto s = scenario(R"({"grid": {"h": 0.01, "delay_steps": 5, "horizon_steps": 50},
      "model": {"name": "ou"}, "n_particles": 4, "initial": {"name": "gaussian"}, "seed": 3})");
  const auto r = solve_mckean_vlasov_picard(s, {64, 1e-12, 5, 1});
  CHECK(r.iterations == 1);
  CHECK(r.trace.size() == 2);
  CHECK(r.trace[0] > 0.0);
  CHECK(r.trace[1] == 0.0);
}

TEST_CASE("Picard: trace non-increasing for a small linear interaction; deterministic") {
  const auto s = scenario(R"({"grid": {"h": 0.01, "delay_steps": 5, "horizon_steps": 100},
      "model": {"name": "ou", "params": {"kernel": {"name": "linear_kernel", "epsilon": 0.1}}},
      "initial": {"name": "gaussian", "params": {"location": 1.0}}, "seed": 5})");
  const auto r = solve_mckean_vlasov_picard(s, {128, 1e-10, 40, 1});
  CHECK(r.iterations > 0);
  for (std::size_t j = 2; j < r.trace.size(); ++j) CHECK(r.trace[j] <= r.trace[j - 1]);
  const auto again = solve_mckean_vlasov_picard(s, {128, 1e-10, 40, 2});
  CHECK(again.flow == r.flow);
  CHECK(again.trace == r.trace);
  try {
    solve_mckean_vlasov_picard(s, {128, 1e-10, 2, 1});
    FAIL("expected PicardError");
  } catch (const PicardError& e) {
    CHECK(e.trace().size() == 2);
  }
}

TEST_CASE("zero dynamics keep the initial cloud over the horizon") {
  const auto s = scenario(R"({"grid": {"h": 0.1, "delay_steps": 2, "horizon_steps": 4},
      "model": {"name": "zero"}, "n_particles": 3, "initial": {"name": "gaussian"}, "seed": 1})");
  const auto initial = sample_initial_cloud(s);
  ParticleCloud cloud = initial;
  for (std::size_t k = 0; k < 4; ++k) cloud = step_interacting(cloud, zero_model(), NoiseStream(s.seed), k);
  CHECK(cloud.with_time(0.0) == initial);
  CHECK(run_interacting(s, 1).trace.size() == 5);
}

TEST_CASE("run_interacting: OU variance") {
  const auto s = scenario(R"({"grid": {"h": 0.01, "delay_steps": 0, "horizon_steps": 1000},
      "model": {"name": "ou", "params": {"a": 1.0}}, "n_particles": 10000, "seed": 77})");
  const auto run = run_interacting(s, 1000);
  std::vector<double> sq(run.final.size());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = std::pow(run.final.segment(i).now()[0], 2);
  const auto m = mean_and_error(sq);
  CHECK(std::abs(m.mean - 0.5 * (1.0 - std::exp(-20.0))) < 3.0 * m.standard_error);
}

TEST_CASE("run_interacting: threads do not change results") {
  const auto s = scenario(R"({"grid": {"h": 0.01, "delay_steps": 3, "horizon_steps": 30},
      "model": {"name": "double_well", "params": {"kernel": {"name": "bounded_kernel", "epsilon": 0.3, "window_weight": 0.5}},
                "constants": {"K2": 2}},
      "n_particles": 50, "initial": {"name": "brownian_history"}, "seed": 8})");
  CHECK(run_interacting(s, 5, 1).final == run_interacting(s, 5, 3).final);
}

TEST_CASE("exchangeability: relabeling particles with their noise permutes the result") {
  auto s = scenario(R"({"grid": {"h": 0.01, "delay_steps": 2, "horizon_steps": 20},
      "model": {"name": "ou", "params": {"kernel": {"name": "bounded_kernel", "epsilon": 0.5}}},
      "n_particles": 6, "initial": {"name": "gaussian"}, "seed": 4})");
  gen::Gen g(6);
  const auto initial = sample_initial_cloud(s);
  const auto order = g.permutation(6);
  const NoiseStream noise(s.seed);
  // Advance both clouds with explicit increments so that the permuted run
  // reuses the same noise per particle.
  ParticleCloud a = initial, b = initial.permuted(order);
  std::vector<double> ea(6), eb(6), dw(6), dwp(6), one(1);
  for (std::size_t k = 0; k < s.grid.horizon_steps; ++k) {
    for (std::size_t i = 0; i < 6; ++i) {
      noise.increment(i, Channel::W1, k, s.grid.step_h, one);
      dw[i] = one[0];
    }
    for (std::size_t i = 0; i < 6; ++i) dwp[i] = dw[order[i]];
    const BoundCoefficients ca(s.model, a.view()), cb(s.model, b.view());
    euler_endpoints_with(a.view(), ca, dw, {}, k, s.grid.step_h, ea);
    euler_endpoints_with(b.view(), cb, dwp, {}, k, s.grid.step_h, eb);
    a = a.advanced(ea);
    b = b.advanced(eb);
  }
  const auto expected = a.permuted(order);
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(b.segment(i).now()[0] == doctest::Approx(expected.segment(i).now()[0]).epsilon(1e-13));
}

TEST_CASE("initial samplers") {
  auto s = scenario(R"({"grid": {"h": 0.04, "delay_steps": 4}, "model": {"name": "ou", "params": {"dim": 2}},
      "n_particles": 3, "initial": {"name": "point", "params": {"location": [1, -2]}}})");
  auto c = sample_initial_cloud(s);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(c.segment(i).point(j)[0] == 1.0);
      CHECK(c.segment(i).point(j)[1] == -2.0);
    }
  s.initial.kind = InitialSampler::Kind::brownian_history;
  s.initial.scale = 1.0;
  c = sample_initial_cloud(s);
  CHECK(c.segment(0).point(0)[0] == 1.0);
  CHECK(c.segment(0).now()[0] != 1.0);
  s.initial.kind = InitialSampler::Kind::gaussian;
  c = sample_initial_cloud(s);
  CHECK(c.segment(2).point(0)[1] == c.segment(2).now()[1]);
}
