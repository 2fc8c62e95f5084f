#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "dimension/config.hpp"
#include "dimension/rng.hpp"

namespace dimension {

struct LayerLayout {
  int block = 0;
  int layer = 0;
  std::size_t in_ch = 0;
  std::size_t out_ch = 0;
  std::array<std::size_t, 3> kernel{3, 3, 3};
  std::size_t weight_offset = 0;  // (out, in, kx, ky, kt) row-major
  std::size_t bias_offset = 0;

  std::size_t taps() const { return kernel[0] * kernel[1] * kernel[2]; }
  std::size_t weight_count() const { return out_ch * in_ch * taps(); }
};

/// Read-only view of one convolution's weights and bias.
struct ConvWeights {
  std::size_t in_ch = 0;
  std::size_t out_ch = 0;
  std::array<std::size_t, 3> kernel{3, 3, 3};
  std::span<const double> weight;
  std::span<const double> bias;
};

/// All convolution weights and biases of a cascade, stored contiguously in
/// declaration order (block, layer, weight then bias). Gradients and Adam
/// moments reuse the same layout.
class ParameterSet {
 public:
  ParameterSet() = default;

  explicit ParameterSet(const ModelConfig& config) {
    config.validate();
    auto layout = std::make_shared<std::vector<LayerLayout>>();
    std::size_t offset = 0;
    const std::array<std::size_t, 3> k{static_cast<std::size_t>(config.kernel[0]),
                                       static_cast<std::size_t>(config.kernel[1]),
                                       static_cast<std::size_t>(config.kernel[2])};
    const auto width = static_cast<std::size_t>(config.filters);
    for (int b = 0; b < config.block_count(); ++b) {
      for (int l = 0; l < config.layers_per_block; ++l) {
        LayerLayout ll;
        ll.block = b;
        ll.layer = l;
        ll.in_ch = l == 0 ? 2 : width;
        ll.out_ch = l == config.layers_per_block - 1 ? 2 : width;
        ll.kernel = k;
        ll.weight_offset = offset;
        offset += ll.weight_count();
        ll.bias_offset = offset;
        offset += ll.out_ch;
        layout->push_back(ll);
      }
    }
    layers_per_block_ = static_cast<std::size_t>(config.layers_per_block);
    layout_ = std::move(layout);
    values_.assign(offset, 0.0);
  }

  /// Same layout, all zeros.
  ParameterSet zeros_like() const {
    ParameterSet p = *this;
    std::fill(p.values_.begin(), p.values_.end(), 0.0);
    p.version_ = 0;
    return p;
  }

  std::size_t size() const { return values_.size(); }
  std::size_t layer_count() const { return layout_ ? layout_->size() : 0; }
  const LayerLayout& layout(std::size_t i) const { return (*layout_)[i]; }
  std::size_t layer_index(int block, int layer) const {
    return static_cast<std::size_t>(block) * layers_per_block_ + static_cast<std::size_t>(layer);
  }

  ConvWeights conv(std::size_t i) const {
    const auto& l = layout(i);
    return {l.in_ch, l.out_ch, l.kernel, std::span<const double>(values_).subspan(l.weight_offset, l.weight_count()),
            std::span<const double>(values_).subspan(l.bias_offset, l.out_ch)};
  }

  std::span<const double> values() const { return values_; }

  /// Mutable access; bumps the version so tapes recorded earlier refuse backward.
  std::span<double> mutable_values() {
    ++version_;
    return values_;
  }
  std::span<double> weights(std::size_t i) {
    const auto& l = layout(i);
    return mutable_values().subspan(l.weight_offset, l.weight_count());
  }
  std::span<double> bias(std::size_t i) {
    const auto& l = layout(i);
    return mutable_values().subspan(l.bias_offset, l.out_ch);
  }

  std::uint64_t version() const { return version_; }

  bool same_layout(const ParameterSet& o) const {
    if (layer_count() != o.layer_count() || size() != o.size()) return false;
    for (std::size_t i = 0; i < layer_count(); ++i) {
      const auto &a = layout(i), &b = o.layout(i);
      if (a.in_ch != b.in_ch || a.out_ch != b.out_ch || a.kernel != b.kernel) return false;
    }
    return true;
  }

  bool all_finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const ParameterSet& o) const { return same_layout(o) && values_ == o.values_; }

 private:
  std::shared_ptr<const std::vector<LayerLayout>> layout_;
  std::size_t layers_per_block_ = 0;
  std::vector<double> values_;
  std::uint64_t version_ = 0;
};

/// He initialisation: weights ~ N(0, 2 / fan_in), fan_in = in_ch * taps; zero biases.
inline ParameterSet he_initialized(const ModelConfig& config, std::uint64_t seed) {
  ParameterSet p(config);
  Rng rng(seed);
  auto values = p.mutable_values();
  for (std::size_t i = 0; i < p.layer_count(); ++i) {
    const auto& l = p.layout(i);
    const double stddev = std::sqrt(2.0 / static_cast<double>(l.in_ch * l.taps()));
    for (std::size_t j = 0; j < l.weight_count(); ++j) values[l.weight_offset + j] = stddev * rng.normal();
  }
  return p;
}

}  // namespace dimension
