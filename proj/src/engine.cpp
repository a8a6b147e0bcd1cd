#include "mvdelay/engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mvdelay/metrics.hpp"
#include "mvdelay/stats.hpp"

namespace mvdelay {

namespace {

// x + drift h + beta dw1 + sigma dw2 for one segment; false if non-finite.
bool update_one(SegmentView xi, const BoundCoefficients& coefficients, std::span<const double> dw1,
                std::span<const double> dw2, double h, std::span<double> drift, std::span<double> sigma,
                std::span<double> out) {
  const auto& model = coefficients.model();
  const std::size_t d = model.dim;
  const std::size_t d2 = model.noise_dim;
  coefficients.drift(xi, drift);
  const auto x = xi.now();
  for (std::size_t c = 0; c < d; ++c) out[c] = x[c] + drift[c] * h + model.beta * dw1[c];
  if (model.has_sigma()) {
    coefficients.diffusion(xi, sigma);
    for (std::size_t c = 0; c < d; ++c)
      for (std::size_t e = 0; e < d2; ++e) out[c] += sigma[c * d2 + e] * dw2[e];
  }
  for (std::size_t c = 0; c < d; ++c)
    if (!std::isfinite(out[c])) return false;
  return true;
}

void check_state(const CloudView& state, const CoefficientModel& model) {
  if (state.dim() != model.dim) throw Error("engine: cloud dimension does not match the model");
}

}  // namespace

BlowUpError::BlowUpError(std::size_t particle, std::size_t step)
    : Error("non-finite state for particle " + std::to_string(particle) + " at step " + std::to_string(step)),
      particle_(particle),
      step_(step) {}

ParticleCloud sample_initial_cloud(const Scenario& scenario, const NoiseStream& noise, std::size_t n,
                                   std::uint64_t first_particle) {
  const auto& grid = scenario.grid;
  const auto& sampler = scenario.initial;
  const std::size_t d = scenario.model.dim;
  const std::size_t points = grid.points();
  if (sampler.location.size() != d) throw Error("initial sampler: location has the wrong dimension");
  if (n == 0) throw Error("initial sampler: need at least one particle");
  std::vector<double> flat(n * points * d);
  std::vector<double> z(d);
  for (std::size_t i = 0; i < n; ++i) {
    double* seg = flat.data() + i * points * d;
    const std::uint64_t id = first_particle + i;
    switch (sampler.kind) {
      case InitialSampler::Kind::point:
        for (std::size_t j = 0; j < points; ++j) std::copy(sampler.location.begin(), sampler.location.end(), seg + j * d);
        break;
      case InitialSampler::Kind::gaussian:
        noise.gaussian(id, Channel::initial, 0, z);
        for (std::size_t j = 0; j < points; ++j)
          for (std::size_t c = 0; c < d; ++c) seg[j * d + c] = sampler.location[c] + sampler.scale * z[c];
        break;
      case InitialSampler::Kind::brownian_history: {
        const double step_scale = sampler.scale * std::sqrt(grid.step_h);
        std::copy(sampler.location.begin(), sampler.location.end(), seg);
        for (std::size_t j = 1; j < points; ++j) {
          noise.gaussian(id, Channel::initial, j, z);
          for (std::size_t c = 0; c < d; ++c) seg[j * d + c] = seg[(j - 1) * d + c] + step_scale * z[c];
        }
        break;
      }
    }
  }
  return ParticleCloud(grid, d, std::move(flat), 0.0);
}

ParticleCloud sample_initial_cloud(const Scenario& scenario) {
  return sample_initial_cloud(scenario, NoiseStream(scenario.seed, Family::main), scenario.n_particles);
}

void euler_endpoints(const CloudView& state, const BoundCoefficients& coefficients, const NoiseStream& noise,
                     std::size_t step, double h, std::span<double> out, std::uint64_t first_particle,
                     std::size_t threads) {
  const auto& model = coefficients.model();
  check_state(state, model);
  const std::size_t d = model.dim;
  const std::size_t d2 = model.noise_dim;
  if (out.size() != state.size() * d) throw Error("engine: endpoint buffer has the wrong size");
  const bool with_sigma = model.has_sigma();
  parallel_for(state.size(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> dw1(d), dw2(d2), drift(d), sigma(d * d2);
    for (std::size_t i = begin; i < end; ++i) {
      const std::uint64_t id = first_particle + i;
      noise.increment(id, Channel::W1, step, h, dw1);
      if (with_sigma) noise.increment(id, Channel::W2, step, h, dw2);
      if (!update_one(state.segment(i), coefficients, dw1, dw2, h, drift, sigma, out.subspan(i * d, d)))
        throw BlowUpError(id, step);
    }
  });
}

void euler_endpoints_with(const CloudView& state, const BoundCoefficients& coefficients, std::span<const double> dw1,
                          std::span<const double> dw2, std::size_t step, double h, std::span<double> out,
                          std::size_t threads) {
  const auto& model = coefficients.model();
  check_state(state, model);
  const std::size_t d = model.dim;
  const std::size_t d2 = model.noise_dim;
  const std::size_t n = state.size();
  if (out.size() != n * d || dw1.size() != n * d) throw Error("engine: increment buffer has the wrong size");
  if (model.has_sigma() && dw2.size() != n * d2) throw Error("engine: increment buffer has the wrong size");
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> drift(d), sigma(d * d2);
    for (std::size_t i = begin; i < end; ++i) {
      const auto w2 = model.has_sigma() ? dw2.subspan(i * d2, d2) : std::span<const double>{};
      if (!update_one(state.segment(i), coefficients, dw1.subspan(i * d, d), w2, h, drift, sigma,
                      out.subspan(i * d, d)))
        throw BlowUpError(i, step);
    }
  });
}

MeasureFlow::MeasureFlow(const ParticleCloud& initial, std::size_t steps)
    : grid_(initial.grid()),
      dim_(initial.dim()),
      size_(initial.size()),
      steps_(steps),
      path_points_(initial.points() + steps) {
  paths_.assign(size_ * path_points_ * dim_, 0.0);
  for (std::size_t i = 0; i < size_; ++i) {
    const auto v = initial.segment(i).values();
    std::copy(v.begin(), v.end(), paths_.begin() + static_cast<std::ptrdiff_t>(i * path_points_ * dim_));
  }
}

MeasureFlow MeasureFlow::stationary(const ParticleCloud& initial, std::size_t steps) {
  MeasureFlow flow;
  flow.grid_ = initial.grid();
  flow.dim_ = initial.dim();
  flow.size_ = initial.size();
  flow.steps_ = steps;
  flow.recorded_ = 0;
  flow.path_points_ = initial.points();
  flow.stationary_ = true;
  flow.paths_ = initial.flat();
  return flow;
}

CloudView MeasureFlow::snapshot(std::size_t k) const {
  if (!has_snapshot(k)) throw Error("measure flow: no snapshot at step " + std::to_string(k));
  const std::size_t offset = stationary_ ? 0 : k * dim_;
  return {paths_.data() + offset, size_, path_points_ * dim_, grid_.points(), dim_};
}

ParticleCloud MeasureFlow::cloud(std::size_t k) const {
  const auto view = snapshot(k);
  const std::size_t per = grid_.points() * dim_;
  std::vector<double> flat(size_ * per);
  for (std::size_t i = 0; i < size_; ++i) {
    const auto v = view.segment(i).values();
    std::copy(v.begin(), v.end(), flat.begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return ParticleCloud(grid_, dim_, std::move(flat), static_cast<double>(k) * grid_.step_h);
}

void MeasureFlow::append(std::span<const double> endpoints) {
  if (stationary_) throw Error("measure flow: cannot append to a stationary flow");
  if (recorded_ >= steps_) throw Error("measure flow: horizon exhausted");
  if (endpoints.size() != size_ * dim_) throw Error("measure flow: endpoint count mismatch");
  ++recorded_;
  const std::size_t slot = grid_.delay_steps + recorded_;
  for (std::size_t i = 0; i < size_; ++i)
    std::copy_n(endpoints.data() + i * dim_, dim_, paths_.data() + (i * path_points_ + slot) * dim_);
}

ParticleCloud step_interacting(const ParticleCloud& cloud, const CoefficientModel& model, const NoiseStream& noise,
                               std::size_t step, std::size_t threads) {
  const auto view = cloud.view();
  const BoundCoefficients coefficients(model, view);
  std::vector<double> endpoints(cloud.size() * cloud.dim());
  euler_endpoints(view, coefficients, noise, step, cloud.grid().step_h, endpoints, 0, threads);
  return cloud.advanced(endpoints);
}

ParticleCloud step_frozen(const ParticleCloud& cloud, const MeasureFlow& flow, const CoefficientModel& model,
                          const NoiseStream& noise, std::size_t step, std::size_t threads) {
  if (!flow.has_snapshot(step)) throw Error("step_frozen: flow has no snapshot at step " + std::to_string(step));
  const BoundCoefficients coefficients(model, flow.snapshot(step));
  std::vector<double> endpoints(cloud.size() * cloud.dim());
  euler_endpoints(cloud.view(), coefficients, noise, step, cloud.grid().step_h, endpoints, 0, threads);
  return cloud.advanced(endpoints);
}

MeasureFlow simulate_frozen(const ParticleCloud& initial, const MeasureFlow& flow, const CoefficientModel& model,
                            const NoiseStream& noise, std::size_t threads, std::uint64_t first_particle) {
  if (!(initial.grid() == flow.grid()) || initial.dim() != flow.dim())
    throw Error("simulate_frozen: flow and cloud disagree on grid or dimension");
  const std::size_t steps = flow.steps();
  MeasureFlow out(initial, steps);
  std::vector<double> endpoints(initial.size() * initial.dim());
  for (std::size_t k = 0; k < steps; ++k) {
    const BoundCoefficients coefficients(model, flow.snapshot(k));
    euler_endpoints(out.snapshot(k), coefficients, noise, k, initial.grid().step_h, endpoints, first_particle,
                    threads);
    out.append(endpoints);
  }
  return out;
}

PicardResult solve_mckean_vlasov_picard(const Scenario& scenario, const PicardOptions& options) {
  if (!(options.tol > 0.0)) throw Error("picard: tol must be positive");
  if (options.n_reference < 2) throw Error("picard: need at least two reference particles");
  scenario.validate();
  const NoiseStream noise(scenario.seed, Family::reference);
  const auto initial = sample_initial_cloud(scenario, noise, options.n_reference);
  const std::size_t steps = scenario.grid.horizon_steps;
  MeasureFlow current = MeasureFlow::stationary(initial, steps);
  PicardResult result;
  for (std::size_t j = 0; j < options.max_iter; ++j) {
    MeasureFlow next = simulate_frozen(initial, current, scenario.model, noise, options.threads);
    double distance = 0.0;
    for (std::size_t k = 0; k <= steps; ++k)
      distance = std::max(distance, coupled_pair_cost(current.snapshot(k), next.snapshot(k), 2, PathNorm::sup));
    result.trace.push_back(distance);
    current = std::move(next);
    if (distance <= options.tol) {
      result.flow = std::move(current);
      result.iterations = j;
      return result;
    }
  }
  throw PicardError("picard iteration did not reach tol " + std::to_string(options.tol) + " in " +
                        std::to_string(options.max_iter) + " iterations",
                    result.trace);
}

namespace {

TraceRecord record_of(const ParticleCloud& cloud, std::size_t step) {
  std::vector<double> moments(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double g = path_norm(cloud.segment(i), PathNorm::gamma_r0);
    moments[i] = g * g;
  }
  const auto stats = mean_and_error(moments);
  return {step, static_cast<double>(step) * cloud.grid().step_h, stats.mean, stats.standard_error};
}

}  // namespace

InteractingRun run_interacting(const Scenario& scenario, std::size_t record_every, std::size_t threads,
                               bool keep_snapshots) {
  scenario.validate();
  if (scenario.grid.horizon_steps < 1) throw Error("run_interacting: horizon_steps must be at least 1");
  if (record_every == 0) throw Error("run_interacting: record_every must be at least 1");
  const NoiseStream noise(scenario.seed, Family::main);
  InteractingRun run;
  ParticleCloud cloud = sample_initial_cloud(scenario);
  run.trace.push_back(record_of(cloud, 0));
  if (keep_snapshots) run.snapshots.push_back(cloud);
  for (std::size_t k = 0; k < scenario.grid.horizon_steps; ++k) {
    cloud = step_interacting(cloud, scenario.model, noise, k, threads);
    const std::size_t done = k + 1;
    if (done % record_every == 0 || done == scenario.grid.horizon_steps) {
      run.trace.push_back(record_of(cloud, done));
      if (keep_snapshots) run.snapshots.push_back(cloud);
    }
  }
  run.final = std::move(cloud);
  return run;
}

}  // namespace mvdelay
