#pragma once

// Cross-domain cascade: M frequency-domain blocks (conv stack + KDC) on
// k-space, an inverse FFT bridge, then N image-domain blocks (conv stack +
// residual + IDC). With M = 0 the bridge consumes the measurements directly.

#include <string>
#include <vector>

#include "dimension/config.hpp"
#include "dimension/params.hpp"
#include "dimension/tape.hpp"

namespace dimension {

/// Block outputs as tape nodes: `pre_dc` is the conv output (FDN) or the
/// residual sum (SDN); `output` follows data consistency.
struct BlockNodes {
  Tape::Id pre_dc;
  Tape::Id output;
};

struct TracedForward {
  Tape::Id measured;
  std::vector<BlockNodes> fdn;
  Tape::Id bridge;
  std::vector<BlockNodes> sdn;

  Tape::Id final_image() const { return sdn.back().output; }
};

/// Stored results of one forward pass.
struct ForwardTrace {
  std::vector<ComplexVolume> fdn_dc_outputs;
  ComplexVolume bridge_image;
  std::vector<ComplexVolume> sdn_stage_outputs;

  const ComplexVolume& final_image() const { return sdn_stage_outputs.back(); }
};

inline PaddedGrid model_grid(const ModelConfig& config, const Dims& dims) { return {dims, config.kernel}; }

/// pack -> (conv, relu) x (L-1) -> conv -> unpack.
inline Tape::Id record_conv_stack(Tape& tape, Tape::Id in, int block, const ModelConfig& config,
                                  const ParameterSet& params) {
  const std::string tag = "block" + std::to_string(block);
  const PaddedGrid grid = model_grid(config, tape.complex(in).dims());
  Tape::Id h = tape.pack(in, grid, tag + ".pack");
  for (int l = 0; l < config.layers_per_block; ++l) {
    const std::string name = tag + ".conv" + std::to_string(l);
    h = tape.conv3d(h, params.layer_index(block, l), config.temporal_padding, name);
    if (l + 1 < config.layers_per_block) h = tape.relu(h, name + ".relu");
  }
  return tape.unpack(h, tag + ".unpack");
}

inline BlockNodes record_fdn_block(Tape& tape, Tape::Id k_in, Tape::Id measured, const SamplingMask& mask, int block,
                                   const ModelConfig& config, const ParameterSet& params) {
  const Tape::Id net = record_conv_stack(tape, k_in, block, config, params);
  const Tape::Id dc =
      tape.kdc(net, measured, mask, config.lambda_for_block(block), "block" + std::to_string(block) + ".kdc");
  return {net, dc};
}

inline BlockNodes record_sdn_block(Tape& tape, Tape::Id s_in, Tape::Id measured, const SamplingMask& mask, int block,
                                   const ModelConfig& config, const ParameterSet& params) {
  const std::string tag = "block" + std::to_string(block);
  const Tape::Id net = record_conv_stack(tape, s_in, block, config, params);
  const Tape::Id residual = tape.add(s_in, net, tag + ".residual");
  const Tape::Id k = tape.fft(residual, tag + ".fft");
  const Tape::Id k_dc = tape.kdc(k, measured, mask, config.lambda_for_block(block), tag + ".idc");
  return {residual, tape.ifft(k_dc, tag + ".ifft")};
}

inline TracedForward record_forward(Tape& tape, const ComplexVolume& k_u, const SamplingMask& mask,
                                    const ModelConfig& config, const ParameterSet& params) {
  config.validate();
  require_mask_matches(mask, k_u.dims());
  TracedForward tr;
  tr.measured = tape.constant(k_u, "k_u");
  Tape::Id k = tr.measured;
  for (int m = 0; m < config.m_blocks; ++m) {
    tr.fdn.push_back(record_fdn_block(tape, k, tr.measured, mask, m, config, params));
    k = tr.fdn.back().output;
  }
  tr.bridge = tape.ifft(k, "bridge.ifft");
  Tape::Id s = tr.bridge;
  for (int n = 0; n < config.n_blocks; ++n) {
    tr.sdn.push_back(record_sdn_block(tape, s, tr.measured, mask, config.m_blocks + n, config, params));
    s = tr.sdn.back().output;
  }
  return tr;
}

inline ForwardTrace collect_trace(const Tape& tape, const TracedForward& tr) {
  ForwardTrace out;
  for (const auto& b : tr.fdn) out.fdn_dc_outputs.push_back(tape.complex(b.output));
  out.bridge_image = tape.complex(tr.bridge);
  for (const auto& b : tr.sdn) out.sdn_stage_outputs.push_back(tape.complex(b.output));
  return out;
}

inline ForwardTrace dimension_forward(const ComplexVolume& k_u, const SamplingMask& mask, const ParameterSet& params,
                                      const ModelConfig& config) {
  Tape tape(params);
  return collect_trace(tape, record_forward(tape, k_u, mask, config, params));
}

/// One frequency-domain block in isolation; `block` indexes the parameter set.
inline ComplexVolume fdn_block(const ComplexVolume& k_in, const ComplexVolume& k_u, const SamplingMask& mask,
                               const ParameterSet& params, const ModelConfig& config, int block = 0) {
  Tape tape(params);
  const auto in = tape.constant(k_in, "k_in");
  const auto meas = tape.constant(k_u, "k_u");
  return tape.complex(record_fdn_block(tape, in, meas, mask, block, config, params).output);
}

/// One image-domain block in isolation; `block` indexes the parameter set.
inline ComplexVolume sdn_block(const ComplexVolume& s_in, const ComplexVolume& k_u, const SamplingMask& mask,
                               const ParameterSet& params, const ModelConfig& config, int block) {
  Tape tape(params);
  const auto in = tape.constant(s_in, "s_in");
  const auto meas = tape.constant(k_u, "k_u");
  return tape.complex(record_sdn_block(tape, in, meas, mask, block, config, params).output);
}

}  // namespace dimension
