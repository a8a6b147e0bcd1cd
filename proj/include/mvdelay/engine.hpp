#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mvdelay/model.hpp"
#include "mvdelay/noise.hpp"

namespace mvdelay {

/// Raised when an update produces a non-finite state.
class BlowUpError : public Error {
 public:
  BlowUpError(std::size_t particle, std::size_t step);
  std::size_t particle() const { return particle_; }
  std::size_t step() const { return step_; }

 private:
  std::size_t particle_;
  std::size_t step_;
};

/// Draws n initial segments from the scenario's sampler. Particle i uses the
/// initial channel of noise stream id first_particle + i.
///   point:            constant segment at location
///   gaussian:         endpoint location + scale * Z, extended constantly back
///   brownian_history: xi(-r0) = location, then Brownian increments of
///                     variance scale^2 * h up to xi(0)
ParticleCloud sample_initial_cloud(const Scenario& scenario, const NoiseStream& noise, std::size_t n,
                                   std::uint64_t first_particle = 0);
ParticleCloud sample_initial_cloud(const Scenario& scenario);

/// Euler-Maruyama endpoints for every segment of state:
///   x + drift(xi) h + beta dW1 + sigma(xi) dW2,
/// with coefficients already bound to the measure snapshot of step k and
/// noise ids first_particle + i. Writes state.size() * d values to out.
void euler_endpoints(const CloudView& state, const BoundCoefficients& coefficients, const NoiseStream& noise,
                     std::size_t step, double h, std::span<double> out, std::uint64_t first_particle = 0,
                     std::size_t threads = 1);

/// Same update with explicit increments dW1 (N x d) and dW2 (N x d2).
void euler_endpoints_with(const CloudView& state, const BoundCoefficients& coefficients, std::span<const double> dw1,
                          std::span<const double> dw2, std::size_t step, double h, std::span<double> out,
                          std::size_t threads = 1);

/// Empirical measure flow t -> mu_t on segment space. Paths are stored once
/// per particle (m + 1 + steps points), and snapshot k is a strided view of
/// the window ending at step k. A stationary flow returns the initial cloud
/// at every step.
class MeasureFlow {
 public:
  MeasureFlow() = default;
  /// Recording flow: snapshot 0 is initial; later steps are appended.
  MeasureFlow(const ParticleCloud& initial, std::size_t steps);
  static MeasureFlow stationary(const ParticleCloud& initial, std::size_t steps);

  std::size_t size() const { return size_; }
  std::size_t dim() const { return dim_; }
  std::size_t steps() const { return steps_; }
  std::size_t recorded() const { return recorded_; }
  const TimeGrid& grid() const { return grid_; }
  bool stationary() const { return stationary_; }
  bool has_snapshot(std::size_t k) const { return k <= steps_ && (stationary_ || k <= recorded_); }

  CloudView snapshot(std::size_t k) const;
  ParticleCloud cloud(std::size_t k) const;
  /// Appends the endpoints of step recorded() + 1.
  void append(std::span<const double> endpoints);

  friend bool operator==(const MeasureFlow&, const MeasureFlow&) = default;

 private:
  TimeGrid grid_{};
  std::size_t dim_ = 1;
  std::size_t size_ = 0;
  std::size_t steps_ = 0;
  std::size_t recorded_ = 0;
  std::size_t path_points_ = 0;
  bool stationary_ = false;
  std::vector<double> paths_;
};

/// One explicit step of the N-particle mean-field system, the interaction
/// evaluated on the pre-step cloud. Noise ids are the particle indices.
ParticleCloud step_interacting(const ParticleCloud& cloud, const CoefficientModel& model, const NoiseStream& noise,
                               std::size_t step, std::size_t threads = 1);

/// One step of the decoupled dynamics, the measure argument read from
/// flow.snapshot(step).
ParticleCloud step_frozen(const ParticleCloud& cloud, const MeasureFlow& flow, const CoefficientModel& model,
                          const NoiseStream& noise, std::size_t step, std::size_t threads = 1);

/// Runs the decoupled dynamics from initial over the whole flow horizon and
/// returns the resulting empirical flow.
MeasureFlow simulate_frozen(const ParticleCloud& initial, const MeasureFlow& flow, const CoefficientModel& model,
                            const NoiseStream& noise, std::size_t threads = 1, std::uint64_t first_particle = 0);

struct PicardOptions {
  std::size_t n_reference = 512;
  double tol = 1e-6;
  std::size_t max_iter = 30;
  std::size_t threads = 1;
};

struct PicardResult {
  MeasureFlow flow;
  /// trace[j] = sup_k d(flow_j(k), flow_{j+1}(k)), the pair cost of order 2
  /// in the sup norm, pairing particles by index.
  std::vector<double> trace;
  std::size_t iterations = 0;
};

class PicardError : public Error {
 public:
  PicardError(const std::string& what, std::vector<double> trace) : Error(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

/// Fixed-point iteration mu^(j+1) = law of the dynamics driven by mu^(j),
/// started from the constant flow of the initial cloud. The reference
/// particles use the reference noise family of scenario.seed, and the same
/// noise in every iteration.
PicardResult solve_mckean_vlasov_picard(const Scenario& scenario, const PicardOptions& options);

struct TraceRecord {
  std::size_t step = 0;
  double time = 0.0;
  double second_gamma_moment = 0.0;
  double second_gamma_moment_se = 0.0;
};

struct InteractingRun {
  ParticleCloud final;
  std::vector<TraceRecord> trace;
  std::vector<ParticleCloud> snapshots;
};

/// Advances the scenario's particle system over the horizon, recording the
/// second Gamma-moment every record_every steps (and at step 0). With
/// keep_snapshots, the recorded clouds are kept as well.
InteractingRun run_interacting(const Scenario& scenario, std::size_t record_every, std::size_t threads = 1,
                               bool keep_snapshots = false);

}  // namespace mvdelay
