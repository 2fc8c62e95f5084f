#pragma once

// Multi-supervised loss. All terms are literal sums of squared differences
// over the two-channel real view:
//   ploss  = ||S - S_N||^2
//   kloss_m = ||K_f - K_dc_m||^2,      m = 1..M
//   sloss_n = ||S - S_n||^2,           n = 1..N-1
//   tloss  = ploss + sum alpha_m kloss_m + sum beta_n sloss_n

#include <vector>

#include "dimension/config.hpp"
#include "dimension/network.hpp"

namespace dimension {

struct LossReport {
  double ploss = 0.0;
  std::vector<double> kloss_terms;
  std::vector<double> sloss_terms;
  double tloss = 0.0;
};

inline double mse(const ComplexVolume& a, const ComplexVolume& b) {
  require_same(a.dims(), b.dims(), "mse");
  return sum_squared_difference(a.data(), b.data());
}

inline double mse(const RealVolume& a, const RealVolume& b) {
  require_same(a.dims(), b.dims(), "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

/// ploss + alpha . kloss + beta . sloss, accumulated in that order.
inline double compose_tloss(double ploss, const std::vector<double>& kloss, const std::vector<double>& alpha,
                            const std::vector<double>& sloss, const std::vector<double>& beta) {
  double t = ploss;
  for (std::size_t m = 0; m < kloss.size(); ++m) t += alpha[m] * kloss[m];
  for (std::size_t n = 0; n < sloss.size(); ++n) t += beta[n] * sloss[n];
  return t;
}

inline double kspace_loss(const ForwardTrace& trace, const ComplexVolume& k_f, const std::vector<double>& alpha) {
  if (alpha.size() != trace.fdn_dc_outputs.size()) throw ShapeError("kspace_loss: need one alpha per FDN block");
  double s = 0.0;
  for (std::size_t m = 0; m < alpha.size(); ++m) s += alpha[m] * mse(k_f, trace.fdn_dc_outputs[m]);
  return s;
}

inline double spatial_loss(const ForwardTrace& trace, const ComplexVolume& s_ref, const std::vector<double>& beta) {
  if (trace.sdn_stage_outputs.empty() || beta.size() != trace.sdn_stage_outputs.size() - 1) {
    throw ShapeError("spatial_loss: need one beta per intermediate SDN stage (N-1)");
  }
  double s = 0.0;
  for (std::size_t n = 0; n < beta.size(); ++n) s += beta[n] * mse(s_ref, trace.sdn_stage_outputs[n]);
  return s;
}

inline LossReport total_loss(const ForwardTrace& trace, const ComplexVolume& s_ref, const ComplexVolume& k_f,
                             const ModelConfig& config) {
  config.validate();
  if (trace.fdn_dc_outputs.size() != config.loss_alpha.size() ||
      trace.sdn_stage_outputs.size() != config.loss_beta.size() + 1) {
    throw ShapeError("total_loss: trace does not match the model config");
  }
  LossReport r;
  r.ploss = mse(s_ref, trace.final_image());
  for (const auto& k : trace.fdn_dc_outputs) r.kloss_terms.push_back(mse(k_f, k));
  for (std::size_t n = 0; n + 1 < trace.sdn_stage_outputs.size(); ++n)
    r.sloss_terms.push_back(mse(s_ref, trace.sdn_stage_outputs[n]));
  r.tloss = compose_tloss(r.ploss, r.kloss_terms, config.loss_alpha, r.sloss_terms, config.loss_beta);
  return r;
}

struct LossNodes {
  Tape::Id ploss;
  std::vector<Tape::Id> kloss;
  std::vector<Tape::Id> sloss;
  Tape::Id tloss;

  LossReport report(const Tape& tape) const {
    LossReport r;
    r.ploss = tape.scalar(ploss);
    for (auto id : kloss) r.kloss_terms.push_back(tape.scalar(id));
    for (auto id : sloss) r.sloss_terms.push_back(tape.scalar(id));
    r.tloss = tape.scalar(tloss);
    return r;
  }
};

/// Records the loss on top of a recorded forward pass.
inline LossNodes record_loss(Tape& tape, const TracedForward& tr, const ComplexVolume& s_ref,
                             const ComplexVolume& k_f, const ModelConfig& config) {
  const auto s_id = tape.constant(s_ref, "S");
  const auto kf_id = tape.constant(k_f, "K_f");
  LossNodes ln;
  ln.ploss = tape.squared_error(tr.final_image(), s_id, "ploss");
  std::vector<Tape::Id> terms;
  std::vector<double> weights;
  for (std::size_t m = 0; m < tr.fdn.size(); ++m) {
    ln.kloss.push_back(tape.squared_error(tr.fdn[m].output, kf_id, "kloss" + std::to_string(m + 1)));
    terms.push_back(ln.kloss.back());
    weights.push_back(config.loss_alpha[m]);
  }
  for (std::size_t n = 0; n + 1 < tr.sdn.size(); ++n) {
    ln.sloss.push_back(tape.squared_error(tr.sdn[n].output, s_id, "sloss" + std::to_string(n + 1)));
    terms.push_back(ln.sloss.back());
    weights.push_back(config.loss_beta[n]);
  }
  ln.tloss = tape.weighted_sum(ln.ploss, terms, weights, "tloss");
  return ln;
}

}  // namespace dimension
