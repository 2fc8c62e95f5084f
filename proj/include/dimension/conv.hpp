#pragma once

// 3-D same-size convolution (cross-correlation, stride 1) over feature maps in
// a zero-halo layout.
//
// A FeatureMap stores each channel on a grid padded by the kernel half-width
// on every axis. With that layout a kernel tap (dx, dy, dt) is a constant
// offset in the flattened channel, so one tap over every output voxel and all
// channel pairs is a single (voxels x in) * (in x out) matrix product. Rows
// that land on halo voxels produce garbage which is cleared afterwards; halos
// of every stored map and gradient are kept at zero.

#include <Eigen/Core>

#include <algorithm>
#include <span>
#include <vector>

#include "dimension/config.hpp"
#include "dimension/error.hpp"
#include "dimension/params.hpp"
#include "dimension/volume.hpp"

namespace dimension {

struct PaddedGrid {
  Dims dims;
  std::size_t hx = 1, hy = 1, ht = 1;

  PaddedGrid() = default;
  PaddedGrid(Dims d, std::array<int, 3> kernel)
      : dims(d),
        hx(static_cast<std::size_t>(kernel[0] / 2)),
        hy(static_cast<std::size_t>(kernel[1] / 2)),
        ht(static_cast<std::size_t>(kernel[2] / 2)) {}

  std::size_t px() const { return dims.nx + 2 * hx; }
  std::size_t py() const { return dims.ny + 2 * hy; }
  std::size_t pt() const { return dims.nt + 2 * ht; }
  std::size_t stride_x() const { return py() * pt(); }
  std::size_t stride_y() const { return pt(); }
  std::size_t channel_size() const { return px() * stride_x(); }

  /// Flat index of interior voxel (x, y, t).
  std::size_t at(std::size_t x, std::size_t y, std::size_t t) const {
    return (x + hx) * stride_x() + (y + hy) * stride_y() + (t + ht);
  }
  /// First and one-past-last flat index touched by interior voxels.
  std::size_t span_begin() const { return at(0, 0, 0); }
  std::size_t span_end() const { return at(dims.nx - 1, dims.ny - 1, dims.nt - 1) + 1; }

  bool operator==(const PaddedGrid&) const = default;
};

struct FeatureMap {
  PaddedGrid grid;
  std::size_t channels = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(const PaddedGrid& g, std::size_t c) : grid(g), channels(c), data(c * g.channel_size(), 0.0) {}

  double* channel(std::size_t c) { return data.data() + c * grid.channel_size(); }
  const double* channel(std::size_t c) const { return data.data() + c * grid.channel_size(); }
  double& at(std::size_t c, std::size_t x, std::size_t y, std::size_t t) { return channel(c)[grid.at(x, y, t)]; }
  double at(std::size_t c, std::size_t x, std::size_t y, std::size_t t) const {
    return channel(c)[grid.at(x, y, t)];
  }
};

namespace detail {

template <typename F>
void for_each_halo(const PaddedGrid& g, F&& f) {
  for (std::size_t x = 0; x < g.px(); ++x) {
    const bool xin = x >= g.hx && x < g.hx + g.dims.nx;
    for (std::size_t y = 0; y < g.py(); ++y) {
      const bool yin = y >= g.hy && y < g.hy + g.dims.ny;
      const std::size_t row = x * g.stride_x() + y * g.stride_y();
      if (!(xin && yin)) {
        for (std::size_t t = 0; t < g.pt(); ++t) f(row + t);
        continue;
      }
      for (std::size_t t = 0; t < g.ht; ++t) f(row + t);
      for (std::size_t t = g.ht + g.dims.nt; t < g.pt(); ++t) f(row + t);
    }
  }
}

inline void zero_halo(FeatureMap& m) {
  for (std::size_t c = 0; c < m.channels; ++c) {
    double* p = m.channel(c);
    for_each_halo(m.grid, [p](std::size_t i) { p[i] = 0.0; });
  }
}

/// Copies the wrapped interior frames into the temporal halo (circular padding in t).
inline void fill_temporal_halo(FeatureMap& m) {
  const auto& g = m.grid;
  if (g.ht > g.dims.nt) throw ShapeError("circular temporal padding needs nt >= kernel half-width");
  for (std::size_t c = 0; c < m.channels; ++c)
    for (std::size_t x = 0; x < g.dims.nx; ++x)
      for (std::size_t y = 0; y < g.dims.ny; ++y) {
        double* row = m.channel(c) + g.at(x, y, 0) - g.ht;
        for (std::size_t k = 0; k < g.ht; ++k) {
          row[k] = row[g.ht + g.dims.nt - g.ht + k];
          row[g.ht + g.dims.nt + k] = row[g.ht + k];
        }
      }
}

/// Adjoint of fill_temporal_halo: folds halo values onto their sources and clears the halo.
inline void fold_temporal_halo(FeatureMap& m) {
  const auto& g = m.grid;
  for (std::size_t c = 0; c < m.channels; ++c)
    for (std::size_t x = 0; x < g.dims.nx; ++x)
      for (std::size_t y = 0; y < g.dims.ny; ++y) {
        double* row = m.channel(c) + g.at(x, y, 0) - g.ht;
        for (std::size_t k = 0; k < g.ht; ++k) {
          row[g.ht + g.dims.nt - g.ht + k] += row[k];
          row[g.ht + k] += row[g.ht + g.dims.nt + k];
          row[k] = 0.0;
          row[g.ht + g.dims.nt + k] = 0.0;
        }
      }
}

inline std::ptrdiff_t tap_offset(const PaddedGrid& g, std::size_t dx, std::size_t dy, std::size_t dt) {
  return (static_cast<std::ptrdiff_t>(dx) - static_cast<std::ptrdiff_t>(g.hx)) *
             static_cast<std::ptrdiff_t>(g.stride_x()) +
         (static_cast<std::ptrdiff_t>(dy) - static_cast<std::ptrdiff_t>(g.hy)) *
             static_cast<std::ptrdiff_t>(g.stride_y()) +
         (static_cast<std::ptrdiff_t>(dt) - static_cast<std::ptrdiff_t>(g.ht));
}

/// Weights regrouped per tap as column-major (in x out) blocks.
inline std::vector<double> weights_per_tap(const ConvWeights& w) {
  const std::size_t taps = w.kernel[0] * w.kernel[1] * w.kernel[2];
  std::vector<double> out(taps * w.in_ch * w.out_ch);
  for (std::size_t co = 0; co < w.out_ch; ++co)
    for (std::size_t ci = 0; ci < w.in_ch; ++ci)
      for (std::size_t k = 0; k < taps; ++k)
        out[k * w.in_ch * w.out_ch + co * w.in_ch + ci] = w.weight[(co * w.in_ch + ci) * taps + k];
  return out;
}

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;
using StridedMap = Eigen::Map<Mat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const Mat, 0, Eigen::OuterStride<>>;
using ConstBlockMap = Eigen::Map<const Mat>;
using BlockMap = Eigen::Map<Mat>;

inline void check_conv_shapes(const FeatureMap& in, const ConvWeights& w) {
  if (in.channels != w.in_ch) {
    throw ShapeError("conv3d: weights expect " + std::to_string(w.in_ch) + " input channels, got " +
                     std::to_string(in.channels));
  }
  if (in.grid.hx != w.kernel[0] / 2 || in.grid.hy != w.kernel[1] / 2 || in.grid.ht != w.kernel[2] / 2) {
    throw ShapeError("conv3d: feature-map halo does not match the kernel size");
  }
}

}  // namespace detail

/// out = W (*) in + b with zero padding (or circular padding along t).
inline FeatureMap conv3d_forward(const FeatureMap& in, const ConvWeights& w, TemporalPadding padding) {
  detail::check_conv_shapes(in, w);
  const PaddedGrid& g = in.grid;
  FeatureMap padded_copy;
  const FeatureMap* src = &in;
  if (padding == TemporalPadding::circular) {
    padded_copy = in;
    detail::fill_temporal_halo(padded_copy);
    src = &padded_copy;
  }

  FeatureMap out(g, w.out_ch);
  const auto begin = static_cast<std::ptrdiff_t>(g.span_begin());
  const auto rows = static_cast<Eigen::Index>(g.span_end() - g.span_begin());
  const auto cs = static_cast<Eigen::Index>(g.channel_size());
  const auto per_tap = detail::weights_per_tap(w);
  const auto cin = static_cast<Eigen::Index>(w.in_ch), cout = static_cast<Eigen::Index>(w.out_ch);

  detail::StridedMap o(out.data.data() + begin, rows, cout, Eigen::OuterStride<>(cs));
  std::size_t k = 0;
  for (std::size_t dx = 0; dx < w.kernel[0]; ++dx)
    for (std::size_t dy = 0; dy < w.kernel[1]; ++dy)
      for (std::size_t dt = 0; dt < w.kernel[2]; ++dt, ++k) {
        const auto off = detail::tap_offset(g, dx, dy, dt);
        detail::ConstStridedMap a(src->data.data() + begin + off, rows, cin, Eigen::OuterStride<>(cs));
        detail::ConstBlockMap wk(per_tap.data() + k * w.in_ch * w.out_ch, cin, cout);
        o.noalias() += a * wk;
      }

  detail::zero_halo(out);
  for (std::size_t co = 0; co < w.out_ch; ++co) {
    double* p = out.channel(co);
    const double b = w.bias[co];
    for (std::size_t x = 0; x < g.dims.nx; ++x)
      for (std::size_t y = 0; y < g.dims.ny; ++y) {
        double* row = p + g.at(x, y, 0);
        for (std::size_t t = 0; t < g.dims.nt; ++t) row[t] += b;
      }
  }
  return out;
}

/// Accumulates d(loss)/d(in) into grad_in (may be null) and d(loss)/d(W, b)
/// into grad_weight / grad_bias, given grad_out with a zero halo.
inline void conv3d_backward(const FeatureMap& in, const ConvWeights& w, TemporalPadding padding,
                            const FeatureMap& grad_out, FeatureMap* grad_in, std::span<double> grad_weight,
                            std::span<double> grad_bias) {
  detail::check_conv_shapes(in, w);
  const PaddedGrid& g = in.grid;
  FeatureMap padded_copy;
  const FeatureMap* src = &in;
  if (padding == TemporalPadding::circular) {
    padded_copy = in;
    detail::fill_temporal_halo(padded_copy);
    src = &padded_copy;
  }

  const auto begin = static_cast<std::ptrdiff_t>(g.span_begin());
  const auto rows = static_cast<Eigen::Index>(g.span_end() - g.span_begin());
  const auto cs = static_cast<Eigen::Index>(g.channel_size());
  const auto cin = static_cast<Eigen::Index>(w.in_ch), cout = static_cast<Eigen::Index>(w.out_ch);
  const std::size_t taps = w.kernel[0] * w.kernel[1] * w.kernel[2];
  const auto per_tap = detail::weights_per_tap(w);

  for (std::size_t co = 0; co < w.out_ch; ++co) {
    const double* p = grad_out.channel(co);
    double s = 0.0;
    for (std::size_t i = 0; i < g.channel_size(); ++i) s += p[i];
    grad_bias[co] += s;
  }

  FeatureMap grad_padded;
  if (grad_in) grad_padded = FeatureMap(g, w.in_ch);

  detail::ConstStridedMap go(grad_out.data.data() + begin, rows, cout, Eigen::OuterStride<>(cs));
  detail::Mat gw(cin, cout);
  std::size_t k = 0;
  for (std::size_t dx = 0; dx < w.kernel[0]; ++dx)
    for (std::size_t dy = 0; dy < w.kernel[1]; ++dy)
      for (std::size_t dt = 0; dt < w.kernel[2]; ++dt, ++k) {
        const auto off = detail::tap_offset(g, dx, dy, dt);
        detail::ConstStridedMap a(src->data.data() + begin + off, rows, cin, Eigen::OuterStride<>(cs));
        gw.noalias() = a.transpose() * go;
        for (std::size_t co = 0; co < w.out_ch; ++co)
          for (std::size_t ci = 0; ci < w.in_ch; ++ci)
            grad_weight[(co * w.in_ch + ci) * taps + k] +=
                gw(static_cast<Eigen::Index>(ci), static_cast<Eigen::Index>(co));
        if (grad_in) {
          detail::ConstBlockMap wk(per_tap.data() + k * w.in_ch * w.out_ch, cin, cout);
          detail::StridedMap gi(grad_padded.data.data() + begin + off, rows, cin, Eigen::OuterStride<>(cs));
          gi.noalias() += go * wk.transpose();
        }
      }

  if (grad_in) {
    if (padding == TemporalPadding::circular) detail::fold_temporal_halo(grad_padded);
    detail::zero_halo(grad_padded);
    for (std::size_t i = 0; i < grad_padded.data.size(); ++i) grad_in->data[i] += grad_padded.data[i];
  }
}

inline FeatureMap relu(const FeatureMap& in) {
  FeatureMap out = in;
  for (double& v : out.data) v = std::max(v, 0.0);
  return out;
}

// ---------------------------------------------------------------------------
// Plain (c, x, y, t) tensors in and out of the padded layout.

inline FeatureMap to_feature_map(const Tensor4& t, const PaddedGrid& grid) {
  require_same(grid.dims, t.dims(), "to_feature_map");
  FeatureMap m(grid, t.channels());
  const Dims d = t.dims();
  for (std::size_t c = 0; c < t.channels(); ++c)
    for (std::size_t x = 0; x < d.nx; ++x)
      for (std::size_t y = 0; y < d.ny; ++y)
        for (std::size_t z = 0; z < d.nt; ++z) m.at(c, x, y, z) = t(c, x, y, z);
  return m;
}

inline Tensor4 to_tensor(const FeatureMap& m) {
  Tensor4 t(m.channels, m.grid.dims);
  const Dims d = m.grid.dims;
  for (std::size_t c = 0; c < m.channels; ++c)
    for (std::size_t x = 0; x < d.nx; ++x)
      for (std::size_t y = 0; y < d.ny; ++y)
        for (std::size_t z = 0; z < d.nt; ++z) t(c, x, y, z) = m.at(c, x, y, z);
  return t;
}

/// Same-size 3-D cross-correlation with per-output-channel bias.
inline Tensor4 conv3d(const Tensor4& input, const ConvWeights& w,
                      TemporalPadding padding = TemporalPadding::zero) {
  if (input.channels() != w.in_ch) {
    throw ShapeError("conv3d: weights expect " + std::to_string(w.in_ch) + " input channels, got " +
                     std::to_string(input.channels()));
  }
  const PaddedGrid grid(input.dims(), {static_cast<int>(w.kernel[0]), static_cast<int>(w.kernel[1]),
                                       static_cast<int>(w.kernel[2])});
  return to_tensor(conv3d_forward(to_feature_map(input, grid), w, padding));
}

inline Tensor4 relu(const Tensor4& in) {
  std::vector<double> v(in.data().begin(), in.data().end());
  for (double& x : v) x = std::max(x, 0.0);
  return Tensor4(in.shape(), std::move(v));
}

}  // namespace dimension
