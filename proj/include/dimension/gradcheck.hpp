#pragma once

// Central finite-difference check of the tape gradients on the full
// multi-supervised loss. The finite differences only use forward
// evaluations, so they share no code with the backward rules.
//
// tloss(+h) - tloss(-h) is formed term by term (ploss, each kloss, each
// sloss) before weighting. Mathematically identical to differencing the
// totals, but the total is dominated by beta * sloss and its ulp alone
// (~2e-12 at 1e4) exceeds the signal of parameters that only reach ploss.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "dimension/dataset.hpp"
#include "dimension/loss.hpp"
#include "dimension/trainer.hpp"

namespace dimension {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  double denominator_floor = 1e-8;
};

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::vector<double> autodiff;
  std::vector<double> finite_difference;

  bool passed() const { return failures == 0 && checked > 0; }
};

inline double forward_tloss(const Example& ex, const ParameterSet& params, const ModelConfig& config) {
  const auto trace = dimension_forward(ex.kspace, ex.mask, params, config);
  return total_loss(trace, ex.image, fft2_frames(ex.image), config).tloss;
}

inline LossReport forward_loss_terms(const Example& ex, const ParameterSet& params, const ModelConfig& config) {
  const auto trace = dimension_forward(ex.kspace, ex.mask, params, config);
  return total_loss(trace, ex.image, fft2_frames(ex.image), config);
}

/// (tloss(up) - tloss(down)) accumulated as weighted per-term differences.
inline double tloss_difference(const LossReport& up, const LossReport& down, const ModelConfig& config) {
  double d = up.ploss - down.ploss;
  for (std::size_t m = 0; m < config.loss_alpha.size(); ++m)
    d += config.loss_alpha[m] * (up.kloss_terms[m] - down.kloss_terms[m]);
  for (std::size_t n = 0; n < config.loss_beta.size(); ++n)
    d += config.loss_beta[n] * (up.sloss_terms[n] - down.sloss_terms[n]);
  return d;
}

inline GradCheckResult gradient_check(const Example& ex, const ParameterSet& params, const ModelConfig& config,
                                      const GradCheckOptions& opt = {}) {
  GradCheckResult r;
  const auto eg = example_gradient(ex, params, config);
  const auto g = eg.grads.values();
  ParameterSet probe = params;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double orig = probe.values()[i];
    probe.mutable_values()[i] = orig + opt.step;
    const auto up = forward_loss_terms(ex, probe, config);
    probe.mutable_values()[i] = orig - opt.step;
    const auto down = forward_loss_terms(ex, probe, config);
    probe.mutable_values()[i] = orig;
    const double fd = tloss_difference(up, down, config) / (2.0 * opt.step);
    const double rel = std::abs(fd - g[i]) / std::max(std::abs(g[i]), opt.denominator_floor);
    r.autodiff.push_back(g[i]);
    r.finite_difference.push_back(fd);
    ++r.checked;
    if (!(rel < opt.tolerance)) ++r.failures;
    if (rel > r.max_relative_error || std::isnan(rel)) {
      r.max_relative_error = rel;
      r.worst_index = i;
    }
  }
  return r;
}

struct GradCheckProblem {
  ModelConfig config;
  ParameterSet params;
  Example example;
  int attempts = 0;
};

inline double interior_max_abs(const FeatureMap& f, bool smallest = false) {
  double m = smallest ? std::numeric_limits<double>::infinity() : 0.0;
  const Dims& d = f.grid.dims;
  for (std::size_t c = 0; c < f.channels; ++c)
    for (std::size_t x = 0; x < d.nx; ++x)
      for (std::size_t y = 0; y < d.ny; ++y)
        for (std::size_t t = 0; t < d.nt; ++t) {
          const double v = std::abs(f.at(c, x, y, t));
          m = smallest ? std::min(m, v) : std::max(m, v);
        }
  return m;
}

/// Smallest |pre-activation| over every ReLU input of one forward pass,
/// divided by max(1, largest feature magnitude): a step h on a weight moves
/// a pre-activation by at most about h times its input.
inline double relu_margin(const Example& ex, const ParameterSet& params, const ModelConfig& config) {
  Tape tape(params);
  record_forward(tape, ex.kspace, ex.mask, config, params);
  double margin = std::numeric_limits<double>::infinity(), scale = 1.0;
  for (Tape::Id i = 0; i < tape.size(); ++i) {
    if (!tape.is_feature(i)) continue;
    scale = std::max(scale, interior_max_abs(tape.feature(i)));
    if (i + 1 < tape.size() && tape.label(i + 1) == tape.label(i) + ".relu")
      margin = std::min(margin, interior_max_abs(tape.feature(i), true));
  }
  return margin / scale;
}

/// 8x8x2 phantom, M=1, N=2, L=2, 4 filters, alpha=0.1, beta=1e3, hard DC.
///
/// Drawn so that central differences are meaningful for every parameter:
/// biases are small random values and every ReLU input sits at least
/// `kink_margin` (relative, see relu_margin) from zero (a zero-bias net on zero-filled k-space puts many
/// FDN pre-activations exactly on the kink), and the mask has no ACS block
/// and skips the DC line in at least one frame (otherwise hard DC removes
/// the constant part of every image-domain block's last bias, leaving a
/// gradient of exactly zero that finite differences only see as round-off).
inline GradCheckProblem tiny_gradcheck_problem(std::uint64_t seed, double kink_margin = 5e-5) {
  GradCheckProblem p;
  p.config.m_blocks = 1;
  p.config.n_blocks = 2;
  p.config.layers_per_block = 2;
  p.config.filters = 4;
  p.config.loss_alpha = {0.1};
  p.config.loss_beta = {1e3};
  PhantomSpec ps;
  ps.nx = 8;
  ps.ny = 8;
  ps.nt = 2;
  ps.n_objects = 3;
  ps.motion_amplitude = 1.0;
  ps.period = 2.0;
  ps.seed = derive_seed(seed, 2);
  const auto image = generate_phantom(ps);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const auto a = static_cast<std::uint64_t>(attempt) << 8;
    auto mask = generate_mask(8, 2, 2.0, 0, derive_seed(seed, 3 + a));
    if (mask.line(4, 0) && mask.line(4, 1)) continue;
    ParameterSet params = he_initialized(p.config, derive_seed(seed, 1 + a));
    Rng rng(derive_seed(seed, 4 + a));
    for (std::size_t l = 0; l < params.layer_count(); ++l)
      for (double& b : params.bias(l)) b = 0.1 * rng.normal();
    Example ex = make_example(image, std::move(mask), 0.0, 0, Split::train);
    if (relu_margin(ex, params, p.config) < kink_margin) continue;
    p.params = std::move(params);
    p.example = std::move(ex);
    p.attempts = attempt + 1;
    return p;
  }
  throw Error("tiny_gradcheck_problem: no admissible draw");
}

}  // namespace dimension
