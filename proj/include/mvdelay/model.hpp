#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvdelay {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Uniform grid carrying the delay window [-r0, 0] and the simulation horizon.
///
/// The delay is an exact multiple of the step: r0 = delay_steps * step_h.
/// delay_steps == 0 is the no-delay case, where a segment is a single point.
struct TimeGrid {
  double step_h = 0.01;
  std::size_t delay_steps = 0;
  std::size_t horizon_steps = 0;

  double r0() const { return static_cast<double>(delay_steps) * step_h; }
  double horizon() const { return static_cast<double>(horizon_steps) * step_h; }
  std::size_t points() const { return delay_steps + 1; }
  void validate() const;
};

/// Read-only view of one segment: points() consecutive points in R^d, the
/// last one being the current value xi(0).
class SegmentView {
 public:
  SegmentView() = default;
  SegmentView(std::span<const double> values, std::size_t dim) : values_(values), dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t points() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
  std::span<const double> point(std::size_t j) const { return values_.subspan(j * dim_, dim_); }
  std::span<const double> now() const { return point(points() - 1); }
  std::span<const double> values() const { return values_; }

 private:
  std::span<const double> values_;
  std::size_t dim_ = 0;
};

/// A discretized path history over [-r0, 0]; index 0 is time -r0, the last
/// index is time 0.
class Segment {
 public:
  Segment() = default;
  /// Throws if values.size() is not a positive multiple of dim or any entry
  /// is not finite.
  Segment(std::vector<double> values, std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t points() const { return values_.size() / dim_; }
  std::span<const double> point(std::size_t j) const { return view().point(j); }
  std::span<const double> now() const { return view().now(); }
  const std::vector<double>& values() const { return values_; }
  SegmentView view() const { return {values_, dim_}; }

  friend bool operator==(const Segment&, const Segment&) = default;

 private:
  std::vector<double> values_;
  std::size_t dim_ = 1;
};

/// Drops the oldest point and appends new_point as the current value.
Segment segment_shift(const Segment& seg, std::span<const double> new_point);

/// Segment whose every point equals x.
Segment constant_segment(std::span<const double> x, const TimeGrid& grid);

/// Strided read-only view of N segments of equal shape. Used both for particle
/// clouds and for snapshots of a stored measure flow.
class CloudView {
 public:
  CloudView() = default;
  CloudView(const double* base, std::size_t size, std::size_t stride, std::size_t points, std::size_t dim)
      : base_(base), size_(size), stride_(stride), points_(points), dim_(dim) {}

  std::size_t size() const { return size_; }
  std::size_t points() const { return points_; }
  std::size_t dim() const { return dim_; }
  SegmentView segment(std::size_t i) const {
    return {std::span<const double>(base_ + i * stride_, points_ * dim_), dim_};
  }

 private:
  const double* base_ = nullptr;
  std::size_t size_ = 0;
  std::size_t stride_ = 0;
  std::size_t points_ = 0;
  std::size_t dim_ = 0;
};

/// N segments on a shared grid plus the clock. Doubles as the uniform
/// empirical measure (1/N) sum_i delta_{segment_i}.
class ParticleCloud {
 public:
  ParticleCloud() = default;
  ParticleCloud(const TimeGrid& grid, std::size_t dim, std::vector<double> flat, double time = 0.0);
  ParticleCloud(const TimeGrid& grid, const std::vector<Segment>& segments, double time = 0.0);

  std::size_t size() const { return size_; }
  std::size_t dim() const { return dim_; }
  std::size_t points() const { return grid_.points(); }
  double time() const { return time_; }
  const TimeGrid& grid() const { return grid_; }
  const std::vector<double>& flat() const { return data_; }

  SegmentView segment(std::size_t i) const { return view().segment(i); }
  Segment segment_copy(std::size_t i) const;
  CloudView view() const { return {data_.data(), size_, points() * dim_, points(), dim_}; }

  /// New cloud with every segment shifted by one step: endpoints holds N*d
  /// new current values. Time advances by the grid step.
  ParticleCloud advanced(std::span<const double> endpoints) const;
  ParticleCloud with_time(double t) const;
  /// Particles reordered so that result[k] = this[order[k]].
  ParticleCloud permuted(std::span<const std::size_t> order) const;

  friend bool operator==(const ParticleCloud&, const ParticleCloud&) = default;

 private:
  TimeGrid grid_{};
  std::size_t dim_ = 1;
  std::size_t size_ = 0;
  double time_ = 0.0;
  std::vector<double> data_;
};

inline bool operator==(const TimeGrid& a, const TimeGrid& b) {
  return a.step_h == b.step_h && a.delay_steps == b.delay_steps && a.horizon_steps == b.horizon_steps;
}

/// Structural constants declared by the scenario author. They are consumed
/// as hypotheses by the rate formulas and never estimated from the callables.
struct ModelConstants {
  double K1 = 0.0;
  double K2 = 1.0;
  double K3 = 0.0;
  double Ksigma = 0.0;
  double Kb = 0.0;
  double R = 1.0;
};

enum class Mode { theorem2, theorem3 };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& name);

/// Scalar summaries of a measure snapshot that a measure-dependent diffusion
/// may read.
struct MeasureSummary {
  double second_gamma_moment = 0.0;
  std::vector<double> mean_endpoint;
};

MeasureSummary summarize(const CloudView& snapshot);

/// Interaction kernel b~ bound to one measure snapshot: evaluates
/// x -> integral b~(x, eta) mu(d eta).
class MeanField {
 public:
  virtual ~MeanField() = default;
  virtual void drift(SegmentView xi, std::span<double> out) const = 0;
};

/// Pairwise interaction kernel b~(xi, eta) -> R^d.
class InteractionKernel {
 public:
  virtual ~InteractionKernel() = default;
  virtual std::string name() const = 0;
  virtual void evaluate(SegmentView xi, SegmentView eta, std::span<double> out) const = 0;
  /// The default binding averages evaluate() over every segment of the
  /// snapshot. Kernels with an exact factorized average override it.
  virtual std::unique_ptr<MeanField> bind(const CloudView& snapshot) const;
};

using VectorField = std::function<void(std::span<const double> x, std::span<double> out)>;
/// Fills a row-major d x d2 matrix.
using StateDiffusion = std::function<void(std::span<const double> x, std::span<double> out)>;
using MeasureDiffusion = std::function<void(const MeasureSummary& summary, std::span<double> out)>;

/// Coefficients of dX = [b0(X(t)) + mean of b~(X_t, .)] dt + beta dW1 + sigma dW2.
///
/// sigma is either state-only (theorem3 mode) or measure-only (theorem2
/// mode); at most one of state_sigma / measure_sigma is set. With neither,
/// sigma is zero.
struct CoefficientModel {
  std::string name;
  std::size_t dim = 1;
  std::size_t noise_dim = 1;
  VectorField b0;
  std::shared_ptr<const InteractionKernel> kernel;
  StateDiffusion state_sigma;
  MeasureDiffusion measure_sigma;
  double beta = 1.0;
  ModelConstants constants{};
  Mode mode = Mode::theorem3;

  bool has_kernel() const { return static_cast<bool>(kernel); }
  bool has_sigma() const { return static_cast<bool>(state_sigma) || static_cast<bool>(measure_sigma); }
  bool measure_dependent() const { return has_kernel() || static_cast<bool>(measure_sigma); }
  void validate() const;
};

/// Model coefficients bound to a single measure snapshot, so that drift and
/// diffusion of any segment can be evaluated without re-reading the measure.
class BoundCoefficients {
 public:
  BoundCoefficients(const CoefficientModel& model, const CloudView& snapshot);

  void drift(SegmentView xi, std::span<double> out) const;
  /// Row-major d x d2; all zeros when the model has no sigma.
  void diffusion(SegmentView xi, std::span<double> out) const;
  const CoefficientModel& model() const { return *model_; }

 private:
  const CoefficientModel* model_;
  std::unique_ptr<MeanField> mean_field_;
  MeasureSummary summary_;
};

/// Named distribution over initial segments.
struct InitialSampler {
  enum class Kind { point, gaussian, brownian_history };
  Kind kind = Kind::point;
  std::vector<double> location{0.0};
  double scale = 0.0;

  std::string name() const;
};

struct Scenario {
  TimeGrid grid{};
  CoefficientModel model{};
  std::size_t n_particles = 1;
  InitialSampler initial{};
  std::uint64_t seed = 0;

  void validate() const;
};

}  // namespace mvdelay
