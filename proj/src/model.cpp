#include "mvdelay/model.hpp"

#include <algorithm>
#include <cmath>

#include "mvdelay/metrics.hpp"

namespace mvdelay {

namespace {

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

class PairwiseMeanField final : public MeanField {
 public:
  PairwiseMeanField(const InteractionKernel& kernel, const CloudView& snapshot)
      : kernel_(kernel), snapshot_(snapshot) {}

  void drift(SegmentView xi, std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<double> term(out.size());
    for (std::size_t j = 0; j < snapshot_.size(); ++j) {
      kernel_.evaluate(xi, snapshot_.segment(j), term);
      for (std::size_t c = 0; c < out.size(); ++c) out[c] += term[c];
    }
    const double inv_n = 1.0 / static_cast<double>(snapshot_.size());
    for (double& v : out) v *= inv_n;
  }

 private:
  const InteractionKernel& kernel_;
  CloudView snapshot_;
};

}  // namespace

void TimeGrid::validate() const {
  if (!(step_h > 0.0) || !std::isfinite(step_h)) throw Error("time grid: step h must be positive");
}

Segment::Segment(std::vector<double> values, std::size_t dim) : values_(std::move(values)), dim_(dim) {
  if (dim_ == 0 || values_.empty() || values_.size() % dim_ != 0)
    throw Error("segment: value count must be a positive multiple of the dimension");
  if (!all_finite(values_)) throw Error("segment: non-finite entry");
}

Segment segment_shift(const Segment& seg, std::span<const double> new_point) {
  if (new_point.size() != seg.dim()) throw Error("segment_shift: dimension mismatch");
  if (!all_finite(new_point)) throw Error("segment_shift: non-finite point");
  const auto& v = seg.values();
  std::vector<double> out(v.size());
  std::copy(v.begin() + static_cast<std::ptrdiff_t>(seg.dim()), v.end(), out.begin());
  std::copy(new_point.begin(), new_point.end(), out.end() - static_cast<std::ptrdiff_t>(seg.dim()));
  return Segment(std::move(out), seg.dim());
}

Segment constant_segment(std::span<const double> x, const TimeGrid& grid) {
  std::vector<double> out;
  out.reserve(grid.points() * x.size());
  for (std::size_t j = 0; j < grid.points(); ++j) out.insert(out.end(), x.begin(), x.end());
  return Segment(std::move(out), x.size());
}

ParticleCloud::ParticleCloud(const TimeGrid& grid, std::size_t dim, std::vector<double> flat, double time)
    : grid_(grid), dim_(dim), time_(time), data_(std::move(flat)) {
  const std::size_t per = grid_.points() * dim_;
  if (dim_ == 0 || data_.empty() || data_.size() % per != 0)
    throw Error("particle cloud: data size does not match grid and dimension");
  if (!all_finite(data_)) throw Error("particle cloud: non-finite entry");
  size_ = data_.size() / per;
}

ParticleCloud::ParticleCloud(const TimeGrid& grid, const std::vector<Segment>& segments, double time)
    : grid_(grid), time_(time) {
  if (segments.empty()) throw Error("particle cloud: needs at least one segment");
  dim_ = segments.front().dim();
  for (const auto& s : segments) {
    if (s.dim() != dim_ || s.points() != grid_.points())
      throw Error("particle cloud: segments must share the grid and dimension");
    data_.insert(data_.end(), s.values().begin(), s.values().end());
  }
  size_ = segments.size();
}

Segment ParticleCloud::segment_copy(std::size_t i) const {
  const auto v = segment(i).values();
  return Segment(std::vector<double>(v.begin(), v.end()), dim_);
}

ParticleCloud ParticleCloud::advanced(std::span<const double> endpoints) const {
  if (endpoints.size() != size_ * dim_) throw Error("particle cloud: endpoint count mismatch");
  const std::size_t per = points() * dim_;
  std::vector<double> next(data_.size());
  for (std::size_t i = 0; i < size_; ++i) {
    const double* src = data_.data() + i * per;
    double* dst = next.data() + i * per;
    std::copy(src + dim_, src + per, dst);
    std::copy(endpoints.begin() + static_cast<std::ptrdiff_t>(i * dim_),
              endpoints.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim_), dst + per - dim_);
  }
  ParticleCloud out;
  out.grid_ = grid_;
  out.dim_ = dim_;
  out.size_ = size_;
  out.time_ = time_ + grid_.step_h;
  out.data_ = std::move(next);
  return out;
}

ParticleCloud ParticleCloud::with_time(double t) const {
  ParticleCloud out = *this;
  out.time_ = t;
  return out;
}

ParticleCloud ParticleCloud::permuted(std::span<const std::size_t> order) const {
  if (order.size() != size_) throw Error("particle cloud: permutation size mismatch");
  const std::size_t per = points() * dim_;
  std::vector<double> next(data_.size());
  for (std::size_t k = 0; k < size_; ++k) {
    if (order[k] >= size_) throw Error("particle cloud: permutation index out of range");
    std::copy_n(data_.data() + order[k] * per, per, next.data() + k * per);
  }
  return ParticleCloud(grid_, dim_, std::move(next), time_);
}

std::string to_string(Mode mode) { return mode == Mode::theorem2 ? "theorem2" : "theorem3"; }

Mode mode_from_string(const std::string& name) {
  if (name == "theorem2") return Mode::theorem2;
  if (name == "theorem3") return Mode::theorem3;
  throw Error("unknown model mode '" + name + "'");
}

MeasureSummary summarize(const CloudView& snapshot) {
  MeasureSummary s;
  s.mean_endpoint.assign(snapshot.dim(), 0.0);
  double moment = 0.0;
  for (std::size_t i = 0; i < snapshot.size(); ++i) {
    const auto seg = snapshot.segment(i);
    const double g = path_norm(seg, PathNorm::gamma_r0);
    moment += g * g;
    const auto x = seg.now();
    for (std::size_t c = 0; c < x.size(); ++c) s.mean_endpoint[c] += x[c];
  }
  const double inv_n = 1.0 / static_cast<double>(snapshot.size());
  s.second_gamma_moment = moment * inv_n;
  for (double& v : s.mean_endpoint) v *= inv_n;
  return s;
}

std::unique_ptr<MeanField> InteractionKernel::bind(const CloudView& snapshot) const {
  return std::make_unique<PairwiseMeanField>(*this, snapshot);
}

void CoefficientModel::validate() const {
  if (dim == 0 || noise_dim == 0) throw Error("model: dimensions must be positive");
  if (!b0) throw Error("model: missing drift b0");
  if (beta == 0.0 || !std::isfinite(beta)) throw Error("model: beta must be a nonzero finite number");
  if (state_sigma && measure_sigma) throw Error("model: sigma cannot depend on both state and measure");
  if (mode == Mode::theorem3) {
    if (measure_sigma) throw Error("model: theorem3 mode requires a state-only sigma");
    if (!(constants.K2 > constants.Ksigma)) throw Error("model: theorem3 mode requires K2 > Ksigma");
  } else if (state_sigma) {
    throw Error("model: theorem2 mode requires a measure-only sigma");
  }
}

BoundCoefficients::BoundCoefficients(const CoefficientModel& model, const CloudView& snapshot) : model_(&model) {
  if (model.kernel) mean_field_ = model.kernel->bind(snapshot);
  if (model.measure_sigma) summary_ = summarize(snapshot);
}

void BoundCoefficients::drift(SegmentView xi, std::span<double> out) const {
  model_->b0(xi.now(), out);
  if (mean_field_) {
    double extra[8];
    std::vector<double> heap;
    std::span<double> term(extra, out.size());
    if (out.size() > 8) {
      heap.resize(out.size());
      term = heap;
    }
    mean_field_->drift(xi, term);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += term[c];
  }
}

void BoundCoefficients::diffusion(SegmentView xi, std::span<double> out) const {
  if (model_->state_sigma) {
    model_->state_sigma(xi.now(), out);
  } else if (model_->measure_sigma) {
    model_->measure_sigma(summary_, out);
  } else {
    std::fill(out.begin(), out.end(), 0.0);
  }
}

std::string InitialSampler::name() const {
  switch (kind) {
    case Kind::point: return "point";
    case Kind::gaussian: return "gaussian";
    case Kind::brownian_history: return "brownian_history";
  }
  return "point";
}

void Scenario::validate() const {
  grid.validate();
  model.validate();
  if (n_particles == 0) throw Error("scenario: n_particles must be at least 1");
  if (initial.location.size() != model.dim) throw Error("scenario: initial location has the wrong dimension");
  if (initial.scale < 0.0) throw Error("scenario: initial scale must be nonnegative");
}

}  // namespace mvdelay
