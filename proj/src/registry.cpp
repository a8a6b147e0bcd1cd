#include "mvdelay/registry.hpp"

#include <cmath>

namespace mvdelay {

namespace {

using nlohmann::json;

double number_or(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw Error(std::string("model parameter '") + key + "' must be a number");
  return j.at(key).get<double>();
}

class FactorizedLinearField final : public MeanField {
 public:
  FactorizedLinearField(const LinearKernel& kernel, std::vector<double> mean_average)
      : kernel_(kernel), mean_average_(std::move(mean_average)) {}

  void drift(SegmentView xi, std::span<double> out) const override {
    for (std::size_t c = 0; c < out.size(); ++c)
      out[c] = kernel_.epsilon() * (mean_average_[c] - window_average(xi, c, kernel_.window_weight()));
  }

 private:
  const LinearKernel& kernel_;
  std::vector<double> mean_average_;
};

class CachedBoundedField final : public MeanField {
 public:
  CachedBoundedField(const BoundedKernel& kernel, const CloudView& snapshot)
      : kernel_(kernel), n_(snapshot.size()), dim_(snapshot.dim()), averages_(n_ * dim_) {
    for (std::size_t j = 0; j < n_; ++j)
      for (std::size_t c = 0; c < dim_; ++c)
        averages_[j * dim_ + c] = window_average(snapshot.segment(j), c, kernel.window_weight());
  }

  void drift(SegmentView xi, std::span<double> out) const override {
    for (std::size_t c = 0; c < dim_; ++c) {
      const double a = window_average(xi, c, kernel_.window_weight());
      double total = 0.0;
      for (std::size_t j = 0; j < n_; ++j) total += std::tanh(averages_[j * dim_ + c] - a);
      out[c] = kernel_.epsilon() * (total / static_cast<double>(n_));
    }
  }

 private:
  const BoundedKernel& kernel_;
  std::size_t n_;
  std::size_t dim_;
  std::vector<double> averages_;
};

std::shared_ptr<const InteractionKernel> make_kernel(const json& spec) {
  const auto name = spec.value("name", std::string("none"));
  if (name == "none") return nullptr;
  const double epsilon = number_or(spec, "epsilon", 0.1);
  const double weight = number_or(spec, "window_weight", 0.0);
  if (weight < 0.0 || weight > 1.0) throw Error("kernel window_weight must lie in [0, 1]");
  if (name == "linear_kernel") return std::make_shared<LinearKernel>(epsilon, weight);
  if (name == "bounded_kernel") return std::make_shared<BoundedKernel>(epsilon, weight);
  throw Error("unknown interaction kernel '" + name + "'");
}

void attach_sigma(CoefficientModel& model, const json& spec) {
  const auto name = spec.value("name", std::string("none"));
  const std::size_t d = model.dim;
  model.noise_dim = d;
  if (name == "none") return;
  const double s0 = number_or(spec, "sigma0", 0.0);
  const double s1 = number_or(spec, "sigma1", 0.0);
  if (name == "affine_sigma") {
    // sigma(x) = diag(s0 + s1 x_c)
    model.state_sigma = [d, s0, s1](std::span<const double> x, std::span<double> out) {
      std::fill(out.begin(), out.end(), 0.0);
      for (std::size_t c = 0; c < d; ++c) out[c * d + c] = s0 + s1 * x[c];
    };
    return;
  }
  if (name == "moment_sigma") {
    // sigma(mu) = (s0 + s1 S(mu)) I, S the second Gamma-moment or its root.
    const auto summary = spec.value("summary", std::string("second_moment"));
    if (summary != "second_moment" && summary != "rms")
      throw Error("moment_sigma summary must be 'second_moment' or 'rms'");
    const bool rms = summary == "rms";
    model.measure_sigma = [d, s0, s1, rms](const MeasureSummary& m, std::span<double> out) {
      const double s = rms ? std::sqrt(m.second_gamma_moment) : m.second_gamma_moment;
      std::fill(out.begin(), out.end(), 0.0);
      for (std::size_t c = 0; c < d; ++c) out[c * d + c] = s0 + s1 * s;
    };
    return;
  }
  throw Error("unknown sigma '" + name + "'");
}

}  // namespace

double window_average(SegmentView xi, std::size_t coord, double window_weight) {
  const std::size_t points = xi.points();
  const double now = xi.point(points - 1)[coord];
  if (points == 1 || window_weight == 0.0) return now;
  const std::size_t m = points - 1;
  double trapezoid = 0.5 * (xi.point(0)[coord] + now);
  for (std::size_t j = 1; j < m; ++j) trapezoid += xi.point(j)[coord];
  return (1.0 - window_weight) * now + window_weight * trapezoid / static_cast<double>(m);
}

void LinearKernel::evaluate(SegmentView xi, SegmentView eta, std::span<double> out) const {
  for (std::size_t c = 0; c < out.size(); ++c)
    out[c] = epsilon_ * (window_average(eta, c, weight_) - window_average(xi, c, weight_));
}

std::unique_ptr<MeanField> LinearKernel::bind(const CloudView& snapshot) const {
  std::vector<double> mean(snapshot.dim(), 0.0);
  for (std::size_t j = 0; j < snapshot.size(); ++j)
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += window_average(snapshot.segment(j), c, weight_);
  for (double& v : mean) v /= static_cast<double>(snapshot.size());
  return std::make_unique<FactorizedLinearField>(*this, std::move(mean));
}

void BoundedKernel::evaluate(SegmentView xi, SegmentView eta, std::span<double> out) const {
  for (std::size_t c = 0; c < out.size(); ++c)
    out[c] = epsilon_ * std::tanh(window_average(eta, c, weight_) - window_average(xi, c, weight_));
}

std::unique_ptr<MeanField> BoundedKernel::bind(const CloudView& snapshot) const {
  return std::make_unique<CachedBoundedField>(*this, snapshot);
}

CoefficientModel model_from_json(const json& j) {
  CoefficientModel model;
  model.name = j.value("name", std::string("ou"));
  const json params = j.value("params", json::object());
  const auto dim = params.value("dim", 1);
  if (dim < 1) throw Error("model dim must be at least 1");
  model.dim = static_cast<std::size_t>(dim);
  model.noise_dim = model.dim;

  if (model.name == "zero") {
    model.b0 = [](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
  } else if (model.name == "ou") {
    const double a = number_or(params, "a", 1.0);
    model.b0 = [a](std::span<const double> x, std::span<double> out) {
      for (std::size_t c = 0; c < out.size(); ++c) out[c] = -a * x[c];
    };
  } else if (model.name == "double_well") {
    // b0 = grad V for V(x) = -(quartic/4)|x|^4 + (quadratic/2)|x|^2.
    const double quartic = number_or(params, "quartic", 4.0);
    const double quadratic = number_or(params, "quadratic", 2.0);
    model.b0 = [quartic, quadratic](std::span<const double> x, std::span<double> out) {
      double r2 = 0.0;
      for (double v : x) r2 += v * v;
      for (std::size_t c = 0; c < out.size(); ++c) out[c] = -quartic * r2 * x[c] + quadratic * x[c];
    };
  } else {
    throw Error("unknown model '" + model.name + "'");
  }

  if (params.contains("kernel")) model.kernel = make_kernel(params.at("kernel"));
  if (params.contains("sigma")) attach_sigma(model, params.at("sigma"));

  const json constants = j.value("constants", json::object());
  model.constants.K1 = number_or(constants, "K1", 0.0);
  model.constants.K2 = number_or(constants, "K2", 1.0);
  model.constants.K3 = number_or(constants, "K3", 0.0);
  model.constants.Ksigma = number_or(constants, "Ksigma", 0.0);
  model.constants.Kb = number_or(constants, "Kb", 0.0);
  model.constants.R = number_or(constants, "R", 1.0);
  model.beta = number_or(j, "beta", 1.0);
  model.mode = mode_from_string(j.value("mode", std::string("theorem3")));
  model.validate();
  return model;
}

}  // namespace mvdelay
