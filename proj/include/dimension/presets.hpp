#pragma once

// Ablation presets. All paper-scale presets use 64 filters, L = 5 and 3x3x3
// kernels, so d5c5 (M=0, N=5) and dimension (M=1, N=4) both hold 25 convs.

#include <string>
#include <vector>

#include "dimension/config.hpp"

namespace dimension {

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"d5c5", "model1", "model2", "model3", "dimension", "dimension-sloss2"};
  return names;
}

inline ModelConfig preset(const std::string& name) {
  ModelConfig c;
  c.layers_per_block = 5;
  c.filters = 64;
  c.m_blocks = 1;
  c.n_blocks = 4;
  c.loss_alpha = {0.0};
  c.loss_beta = {0.0, 0.0, 0.0};
  if (name == "d5c5") {
    c.m_blocks = 0;
    c.n_blocks = 5;
    c.loss_alpha = {};
    c.loss_beta = {0.0, 0.0, 0.0, 0.0};
  } else if (name == "model1") {
  } else if (name == "model2") {
    c.loss_alpha = {0.1};
  } else if (name == "model3") {
    c.loss_beta = {1e3, 1e3, 1e3};
  } else if (name == "dimension") {
    c.loss_alpha = {0.1};
    c.loss_beta = {1e3, 1e3, 1e3};
  } else if (name == "dimension-sloss2") {
    c.loss_alpha = {0.1};
    c.loss_beta = {1e5, 1e4, 1e3};
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return c;
}

}  // namespace dimension
