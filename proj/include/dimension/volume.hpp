#pragma once

// Dynamic (x, y, t) volumes. Samples are stored row-major with t fastest:
// index(x, y, t) = (x * ny + y) * nt + t. Complex samples are std::complex,
// i.e. interleaved (re, im) pairs in memory.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dimension/error.hpp"

namespace dimension {

using cplx = std::complex<double>;

struct Dims {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nt = 0;

  std::size_t count() const { return nx * ny * nt; }
  std::size_t index(std::size_t x, std::size_t y, std::size_t t) const { return (x * ny + y) * nt + t; }
  bool operator==(const Dims&) const = default;

  std::string str() const {
    return std::to_string(nx) + "x" + std::to_string(ny) + "x" + std::to_string(nt);
  }
};

inline void require_valid(const Dims& d) {
  if (d.nx < 1 || d.ny < 1 || d.nt < 1) {
    throw ShapeError("volume dims must all be >= 1, got " + d.str());
  }
}

inline void require_same(const Dims& expected, const Dims& got, const char* what) {
  if (!(expected == got)) {
    throw ShapeError(std::string(what) + ": expected dims " + expected.str() + ", got " + got.str());
  }
}

/// Dense (x, y, t) volume of samples of type T.
template <typename T>
class Volume {
 public:
  Volume() = default;
  explicit Volume(Dims dims) : dims_(dims), data_(dims.count()) { require_valid(dims); }
  Volume(Dims dims, std::vector<T> data) : dims_(dims), data_(std::move(data)) {
    require_valid(dims);
    if (data_.size() != dims.count()) {
      throw ShapeError("volume " + dims.str() + " needs " + std::to_string(dims.count()) + " samples, got " +
                       std::to_string(data_.size()));
    }
  }

  const Dims& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t x, std::size_t y, std::size_t t) { return data_[dims_.index(x, y, t)]; }
  const T& operator()(std::size_t x, std::size_t y, std::size_t t) const { return data_[dims_.index(x, y, t)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  bool operator==(const Volume&) const = default;

 private:
  Dims dims_;
  std::vector<T> data_;
};

using ComplexVolume = Volume<cplx>;
using RealVolume = Volume<double>;

inline double norm2(const ComplexVolume& v) {
  double s = 0.0;
  for (const auto& z : v.data()) s += std::norm(z);
  return std::sqrt(s);
}

inline double norm2(const RealVolume& v) {
  double s = 0.0;
  for (double r : v.data()) s += r * r;
  return std::sqrt(s);
}

inline bool all_finite(const ComplexVolume& v) {
  for (const auto& z : v.data()) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

/// Real 4-D array with shape (channels, nx, ny, nt), row-major.
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(std::size_t channels, Dims dims)
      : shape_{channels, dims.nx, dims.ny, dims.nt}, data_(channels * dims.count()) {}
  Tensor4(std::array<std::size_t, 4> shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape[0] * shape[1] * shape[2] * shape[3]) {
      throw ShapeError("tensor data length does not match its shape");
    }
  }

  const std::array<std::size_t, 4>& shape() const { return shape_; }
  std::size_t channels() const { return shape_[0]; }
  Dims dims() const { return {shape_[1], shape_[2], shape_[3]}; }

  double& operator()(std::size_t c, std::size_t x, std::size_t y, std::size_t t) {
    return data_[((c * shape_[1] + x) * shape_[2] + y) * shape_[3] + t];
  }
  double operator()(std::size_t c, std::size_t x, std::size_t y, std::size_t t) const {
    return data_[((c * shape_[1] + x) * shape_[2] + y) * shape_[3] + t];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool operator==(const Tensor4&) const = default;

 private:
  std::array<std::size_t, 4> shape_{0, 0, 0, 0};
  std::vector<double> data_;
};

/// Network I/O view of a complex volume: channel 0 real, channel 1 imaginary.
using TwoChannelVolume = Tensor4;

inline TwoChannelVolume pack_channels(const ComplexVolume& v) {
  TwoChannelVolume out(2, v.dims());
  const std::size_t n = v.size();
  auto dst = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    dst[i] = v[i].real();
    dst[n + i] = v[i].imag();
  }
  return out;
}

inline ComplexVolume unpack_channels(const TwoChannelVolume& t) {
  if (t.channels() != 2) {
    throw ShapeError("channel dim must be 2, got " + std::to_string(t.channels()));
  }
  ComplexVolume out(t.dims());
  const std::size_t n = out.size();
  auto src = t.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = cplx(src[i], src[n + i]);
  return out;
}

inline RealVolume magnitude(const ComplexVolume& v) {
  RealVolume out(v.dims());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::abs(v[i]);
  return out;
}

}  // namespace dimension
