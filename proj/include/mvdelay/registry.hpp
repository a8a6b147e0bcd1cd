#pragma once

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "mvdelay/model.hpp"

namespace mvdelay {

/// b~(xi, eta) = epsilon * (A(eta) - A(xi)), with the window average
/// A(xi) = (1 - w) xi(0) + w * (trapezoidal mean of xi over [-r0, 0]).
/// Its mean-field average factorizes exactly through the mean of A.
class LinearKernel final : public InteractionKernel {
 public:
  LinearKernel(double epsilon, double window_weight) : epsilon_(epsilon), weight_(window_weight) {}
  std::string name() const override { return "linear_kernel"; }
  void evaluate(SegmentView xi, SegmentView eta, std::span<double> out) const override;
  std::unique_ptr<MeanField> bind(const CloudView& snapshot) const override;

  double epsilon() const { return epsilon_; }
  double window_weight() const { return weight_; }

 private:
  double epsilon_;
  double weight_;
};

/// b~(xi, eta) = epsilon * tanh(A(eta) - A(xi)) coordinatewise, A as above.
/// Bounded by |epsilon|; averaged by the full pairwise sum, with A(eta)
/// computed once per snapshot.
class BoundedKernel final : public InteractionKernel {
 public:
  BoundedKernel(double epsilon, double window_weight) : epsilon_(epsilon), weight_(window_weight) {}
  std::string name() const override { return "bounded_kernel"; }
  void evaluate(SegmentView xi, SegmentView eta, std::span<double> out) const override;
  std::unique_ptr<MeanField> bind(const CloudView& snapshot) const override;

  double epsilon() const { return epsilon_; }
  double window_weight() const { return weight_; }

 private:
  double epsilon_;
  double weight_;
};

/// A(xi) for coordinate c.
double window_average(SegmentView xi, std::size_t coord, double window_weight);

/// Builds a model from its JSON description:
///   {"name": "zero"|"ou"|"double_well", "params": {...},
///    "constants": {"K1",...,"R"}, "beta": b, "mode": "theorem2"|"theorem3"}
/// params may hold "dim", drift parameters ("a" for ou; "quartic",
/// "quadratic" for double_well), a "kernel" object and a "sigma" object.
CoefficientModel model_from_json(const nlohmann::json& j);

}  // namespace mvdelay
