#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "dimension/error.hpp"
#include "dimension/params.hpp"

namespace dimension {

/// Exponential decay applied once per epoch: lr = initial * decay^epoch.
struct LrSchedule {
  double initial = 1e-4;
  double decay = 0.95;

  double operator()(std::uint64_t epoch) const { return initial * std::pow(decay, static_cast<double>(epoch)); }
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const AdamHyper&) const = default;
};

struct OptimizerState {
  std::uint64_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  AdamHyper hyper;

  OptimizerState() = default;
  OptimizerState(const ParameterSet& params, AdamHyper h)
      : first_moment(params.size(), 0.0), second_moment(params.size(), 0.0), hyper(h) {}

  bool operator==(const OptimizerState&) const = default;
};

/// One bias-corrected Adam update at learning rate `lr`.
inline void adam_step(OptimizerState& state, ParameterSet& params, const ParameterSet& grads, double lr) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ShapeError("adam_step: parameter, gradient and moment sizes differ");
  }
  ++state.step;
  const auto& h = state.hyper;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  auto p = params.mutable_values();
  auto g = grads.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = h.beta1 * m + (1.0 - h.beta1) * g[i];
    v = h.beta2 * v + (1.0 - h.beta2) * g[i] * g[i];
    p[i] -= lr * (m / c1) / (std::sqrt(v / c2) + h.epsilon);
  }
}

}  // namespace dimension
