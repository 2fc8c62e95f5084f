#pragma once

// Reverse-mode differentiation for the cascade's fixed operator set.
//
// Every op appends a node holding its value and a backward rule. Nodes are
// appended in execution order, which is a topological order, and backward()
// walks them in exact reverse. Gradients are accumulated additively, so a
// value consumed by several ops (residual inputs, losses on intermediate
// stages) receives the sum of its consumers' contributions.
//
// Complex values are differentiated through their (re, im) pairs: the
// gradient of a real loss L w.r.t. z is stored as dL/dRe + i dL/dIm. Under
// that convention a C-linear map A back-propagates through its adjoint A^H;
// for the unitary FFT that is the inverse transform.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dimension/conv.hpp"
#include "dimension/error.hpp"
#include "dimension/fft.hpp"
#include "dimension/params.hpp"
#include "dimension/sampling.hpp"
#include "dimension/volume.hpp"

namespace dimension {

/// Measured-data blend at sampled k-space positions:
/// (pred + lambda * meas) / (1 + lambda); lambda = inf replaces outright.
inline cplx blend_measurement(cplx pred, cplx meas, double lambda) {
  if (std::isinf(lambda)) return meas;
  return (pred + lambda * meas) / (1.0 + lambda);
}

inline void require_lambda(double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("data-consistency lambda must be > 0 or inf");
}

/// k-space data consistency.
inline ComplexVolume kdc(const ComplexVolume& k_pred, const ComplexVolume& k_u, const SamplingMask& m, double lambda) {
  require_lambda(lambda);
  require_same(k_pred.dims(), k_u.dims(), "kdc");
  const Dims& d = k_pred.dims();
  require_mask_matches(m, d);
  ComplexVolume out = k_pred;
  for (std::size_t x = 0; x < d.nx; ++x)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t t = 0; t < d.nt; ++t)
        if (m.sampled_ky(y, t)) out(x, y, t) = blend_measurement(k_pred(x, y, t), k_u(x, y, t), lambda);
  return out;
}

/// Image-domain data consistency: FFT, k-space correction, IFFT.
inline ComplexVolume idc(const ComplexVolume& s_pred, const ComplexVolume& k_u, const SamplingMask& m, double lambda) {
  return ifft2_frames(kdc(fft2_frames(s_pred), k_u, m, lambda));
}

/// Sum of squared differences over the (re, im) view.
inline double sum_squared_difference(std::span<const cplx> a, std::span<const cplx> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double dr = a[i].real() - b[i].real();
    const double di = a[i].imag() - b[i].imag();
    s += dr * dr + di * di;
  }
  return s;
}

class Tape {
 public:
  using Id = std::size_t;
  using Value = std::variant<std::monostate, ComplexVolume, FeatureMap, double>;

  explicit Tape(const ParameterSet& params) : params_(&params), recorded_version_(params.version()) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const { return nodes_.size(); }
  const std::string& label(Id id) const { return nodes_.at(id).label; }

  bool is_feature(Id id) const { return std::holds_alternative<FeatureMap>(nodes_.at(id).value); }

  const ComplexVolume& complex(Id id) const { return std::get<ComplexVolume>(nodes_.at(id).value); }
  const FeatureMap& feature(Id id) const { return std::get<FeatureMap>(nodes_.at(id).value); }
  double scalar(Id id) const { return std::get<double>(nodes_.at(id).value); }

  /// Leaf that receives no gradient.
  Id constant(ComplexVolume v, std::string label) {
    return push(std::move(label), std::move(v), false, nullptr);
  }

  /// Leaf whose gradient is kept; read it with grad() after backward().
  Id variable(ComplexVolume v, std::string label) {
    return push(std::move(label), std::move(v), true, [](Tape&, Id) {});
  }

  Id pack(Id src, const PaddedGrid& grid, std::string label) {
    const auto& v = complex(src);
    require_same(grid.dims, v.dims(), "pack");
    FeatureMap m(grid, 2);
    const Dims& d = v.dims();
    for (std::size_t x = 0; x < d.nx; ++x)
      for (std::size_t y = 0; y < d.ny; ++y)
        for (std::size_t t = 0; t < d.nt; ++t) {
          const cplx z = v(x, y, t);
          m.at(0, x, y, t) = z.real();
          m.at(1, x, y, t) = z.imag();
        }
    return push(std::move(label), std::move(m), needs_grad(src), [src](Tape& tp, Id self) {
      const auto& g = tp.grad_feature(self);
      auto& gs = tp.grad_complex(src);
      const Dims& d = gs.dims();
      for (std::size_t x = 0; x < d.nx; ++x)
        for (std::size_t y = 0; y < d.ny; ++y)
          for (std::size_t t = 0; t < d.nt; ++t) gs(x, y, t) += cplx(g.at(0, x, y, t), g.at(1, x, y, t));
    });
  }

  Id unpack(Id src, std::string label) {
    const auto& m = feature(src);
    if (m.channels != 2) throw ShapeError("channel dim must be 2, got " + std::to_string(m.channels));
    const Dims& d = m.grid.dims;
    ComplexVolume v(d);
    for (std::size_t x = 0; x < d.nx; ++x)
      for (std::size_t y = 0; y < d.ny; ++y)
        for (std::size_t t = 0; t < d.nt; ++t) v(x, y, t) = cplx(m.at(0, x, y, t), m.at(1, x, y, t));
    return push(std::move(label), std::move(v), needs_grad(src), [src](Tape& tp, Id self) {
      const auto& g = tp.grad_complex(self);
      auto& gs = tp.grad_feature(src);
      const Dims& d = g.dims();
      for (std::size_t x = 0; x < d.nx; ++x)
        for (std::size_t y = 0; y < d.ny; ++y)
          for (std::size_t t = 0; t < d.nt; ++t) {
            gs.at(0, x, y, t) += g(x, y, t).real();
            gs.at(1, x, y, t) += g(x, y, t).imag();
          }
    });
  }

  /// Convolution with parameter layer `layer` of the tape's ParameterSet.
  Id conv3d(Id src, std::size_t layer, TemporalPadding padding, std::string label) {
    FeatureMap out = conv3d_forward(feature(src), params_->conv(layer), padding);
    const bool src_grad = needs_grad(src);
    return push(std::move(label), std::move(out), true, [src, layer, padding, src_grad](Tape& tp, Id self) {
      const auto& l = tp.params_->layout(layer);
      auto gw = std::span<double>(tp.param_grads_).subspan(l.weight_offset, l.weight_count());
      auto gb = std::span<double>(tp.param_grads_).subspan(l.bias_offset, l.out_ch);
      conv3d_backward(tp.feature(src), tp.params_->conv(layer), padding, tp.grad_feature(self),
                      src_grad ? &tp.grad_feature(src) : nullptr, gw, gb);
    });
  }

  Id relu(Id src, std::string label) {
    FeatureMap out = dimension::relu(feature(src));
    return push(std::move(label), std::move(out), needs_grad(src), [src](Tape& tp, Id self) {
      const auto& y = tp.feature(self);
      const auto& g = tp.grad_feature(self);
      auto& gs = tp.grad_feature(src);
      for (std::size_t i = 0; i < g.data.size(); ++i)
        if (y.data[i] > 0.0) gs.data[i] += g.data[i];
    });
  }

  Id add(Id a, Id b, std::string label) {
    const auto& va = complex(a);
    const auto& vb = complex(b);
    require_same(va.dims(), vb.dims(), "add");
    ComplexVolume out(va.dims());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
    return push(std::move(label), std::move(out), needs_grad(a) || needs_grad(b), [a, b](Tape& tp, Id self) {
      const auto& g = tp.grad_complex(self);
      for (Id s : {a, b}) {
        if (!tp.needs_grad(s)) continue;
        auto& gs = tp.grad_complex(s);
        for (std::size_t i = 0; i < g.size(); ++i) gs[i] += g[i];
      }
    });
  }

  Id fft(Id src, std::string label) {
    return push(std::move(label), fft2_frames(complex(src)), needs_grad(src), [src](Tape& tp, Id self) {
      tp.accumulate(src, ifft2_frames(tp.grad_complex(self)));
    });
  }

  Id ifft(Id src, std::string label) {
    return push(std::move(label), ifft2_frames(complex(src)), needs_grad(src), [src](Tape& tp, Id self) {
      tp.accumulate(src, fft2_frames(tp.grad_complex(self)));
    });
  }

  /// Data consistency against constant measurements `measured`; gradient reaches `pred` only.
  Id kdc(Id pred, Id measured, const SamplingMask& mask, double lambda, std::string label) {
    ComplexVolume out = dimension::kdc(complex(pred), complex(measured), mask, lambda);
    return push(std::move(label), std::move(out), needs_grad(pred), [pred, mask, lambda](Tape& tp, Id self) {
      const auto& g = tp.grad_complex(self);
      auto& gs = tp.grad_complex(pred);
      const Dims& d = g.dims();
      const double pass = std::isinf(lambda) ? 0.0 : 1.0 / (1.0 + lambda);
      for (std::size_t x = 0; x < d.nx; ++x)
        for (std::size_t y = 0; y < d.ny; ++y)
          for (std::size_t t = 0; t < d.nt; ++t)
            gs(x, y, t) += mask.sampled_ky(y, t) ? pass * g(x, y, t) : g(x, y, t);
    });
  }

  /// ||a - ref||^2 with `ref` a constant node.
  Id squared_error(Id a, Id ref, std::string label) {
    const auto& va = complex(a);
    const auto& vr = complex(ref);
    require_same(vr.dims(), va.dims(), "squared_error");
    const double s = sum_squared_difference(va.data(), vr.data());
    return push(std::move(label), s, needs_grad(a), [a, ref](Tape& tp, Id self) {
      const double g = tp.grad_scalar(self);
      const auto& va = tp.complex(a);
      const auto& vr = tp.complex(ref);
      auto& gs = tp.grad_complex(a);
      for (std::size_t i = 0; i < gs.size(); ++i) gs[i] += 2.0 * g * (va[i] - vr[i]);
    });
  }

  /// base + sum_i weights[i] * terms[i], accumulated left to right.
  Id weighted_sum(Id base, std::vector<Id> terms, std::vector<double> weights, std::string label) {
    if (terms.size() != weights.size()) throw ShapeError("weighted_sum: terms and weights differ in length");
    double s = scalar(base);
    bool grad = needs_grad(base);
    for (std::size_t i = 0; i < terms.size(); ++i) {
      s += weights[i] * scalar(terms[i]);
      grad = grad || needs_grad(terms[i]);
    }
    return push(std::move(label), s, grad, [base, terms, weights](Tape& tp, Id self) {
      const double g = tp.grad_scalar(self);
      if (tp.needs_grad(base)) tp.grad_scalar(base) += g;
      for (std::size_t i = 0; i < terms.size(); ++i)
        if (tp.needs_grad(terms[i])) tp.grad_scalar(terms[i]) += weights[i] * g;
    });
  }

  /// Runs the recorded graph backwards from scalar `root` and returns
  /// parameter gradients in the ParameterSet layout.
  ParameterSet backward(Id root, double seed_grad = 1.0) {
    if (params_->version() != recorded_version_) {
      throw TapeError("parameters were modified after this tape was recorded; record a new forward pass");
    }
    if (consumed_) throw TapeError("backward already ran on this tape");
    consumed_ = true;
    if (!std::holds_alternative<double>(nodes_.at(root).value)) throw TapeError("backward root must be a scalar");

    param_grads_.assign(params_->size(), 0.0);
    grads_.assign(nodes_.size(), Value{});
    grads_[root] = seed_grad;
    for (Id i = root + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.backward || std::holds_alternative<std::monostate>(grads_[i])) continue;
      n.backward(*this, i);
    }
    ParameterSet out = params_->zeros_like();
    auto dst = out.mutable_values();
    std::copy(param_grads_.begin(), param_grads_.end(), dst.begin());
    return out;
  }

  /// Gradient reached by node `id` during the last backward(), if any.
  const Value& grad(Id id) const { return grads_.at(id); }

  /// Label of the first recorded value holding NaN or Inf.
  std::optional<std::string> first_non_finite() const {
    for (const auto& n : nodes_) {
      bool ok = true;
      if (auto* c = std::get_if<ComplexVolume>(&n.value)) ok = all_finite(*c);
      if (auto* f = std::get_if<FeatureMap>(&n.value))
        ok = std::all_of(f->data.begin(), f->data.end(), [](double v) { return std::isfinite(v); });
      if (auto* s = std::get_if<double>(&n.value)) ok = std::isfinite(*s);
      if (!ok) return n.label;
    }
    return std::nullopt;
  }

 private:
  struct Node {
    std::string label;
    Value value;
    bool requires_grad = false;
    std::function<void(Tape&, Id)> backward;
  };

  Id push(std::string label, Value v, bool requires_grad, std::function<void(Tape&, Id)> bw) {
    nodes_.push_back({std::move(label), std::move(v), requires_grad, requires_grad ? std::move(bw) : nullptr});
    return nodes_.size() - 1;
  }

  bool needs_grad(Id id) const { return nodes_.at(id).requires_grad; }

  ComplexVolume& grad_complex(Id id) {
    auto& g = grads_[id];
    if (std::holds_alternative<std::monostate>(g)) g = ComplexVolume(complex(id).dims());
    return std::get<ComplexVolume>(g);
  }
  FeatureMap& grad_feature(Id id) {
    auto& g = grads_[id];
    if (std::holds_alternative<std::monostate>(g)) {
      const auto& f = feature(id);
      g = FeatureMap(f.grid, f.channels);
    }
    return std::get<FeatureMap>(g);
  }
  double& grad_scalar(Id id) {
    auto& g = grads_[id];
    if (std::holds_alternative<std::monostate>(g)) g = 0.0;
    return std::get<double>(g);
  }
  void accumulate(Id id, const ComplexVolume& delta) {
    auto& g = grad_complex(id);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
  }

  const ParameterSet* params_;
  std::uint64_t recorded_version_;
  bool consumed_ = false;
  std::vector<Node> nodes_;
  std::vector<Value> grads_;
  std::vector<double> param_grads_;
};

}  // namespace dimension
