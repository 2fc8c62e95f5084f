#pragma once

// Image-quality metrics on magnitude volumes, plus the 8-bit images used for
// visual inspection (error maps, y-t extractions, mask patterns).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <vector>

#include "dimension/error.hpp"
#include "dimension/sampling.hpp"
#include "dimension/volume.hpp"

namespace dimension {

/// Per-voxel mean of squared differences.
inline double mean_squared_error(const RealVolume& ref, const RealVolume& rec) {
  require_same(ref.dims(), rec.dims(), "mean_squared_error");
  double s = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double d = ref[i] - rec[i];
    s += d * d;
  }
  return s / static_cast<double>(ref.size());
}

/// 20 log10(max(ref) sqrt(N) / ||ref - rec||); +inf when rec == ref.
inline double psnr(const RealVolume& ref, const RealVolume& rec) {
  require_same(ref.dims(), rec.dims(), "psnr");
  double peak = 0.0, err = 0.0;
  bool nonzero = false;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    peak = std::max(peak, ref[i]);
    nonzero = nonzero || ref[i] != 0.0;
    const double d = ref[i] - rec[i];
    err += d * d;
  }
  if (!nonzero) throw ShapeError("psnr: reference volume is all zero");
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(peak * std::sqrt(static_cast<double>(ref.size())) / std::sqrt(err));
}

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

namespace detail {

inline std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  double s = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - c;
    k[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    s += k[static_cast<std::size_t>(i)];
  }
  for (double& v : k) v /= s;
  return k;
}

/// Separable "valid" filtering of an nx x ny image (row-major, y fastest).
inline std::vector<double> filter_valid(const std::vector<double>& img, std::size_t nx, std::size_t ny,
                                        const std::vector<double>& k) {
  const std::size_t w = k.size();
  const std::size_t ox = nx - w + 1, oy = ny - w + 1;
  std::vector<double> tmp(nx * oy, 0.0);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < oy; ++y) {
      double s = 0.0;
      for (std::size_t j = 0; j < w; ++j) s += k[j] * img[x * ny + y + j];
      tmp[x * oy + y] = s;
    }
  std::vector<double> out(ox * oy, 0.0);
  for (std::size_t x = 0; x < ox; ++x)
    for (std::size_t y = 0; y < oy; ++y) {
      double s = 0.0;
      for (std::size_t i = 0; i < w; ++i) s += k[i] * tmp[(x + i) * oy + y];
      out[x * oy + y] = s;
    }
  return out;
}

}  // namespace detail

/// Mean SSIM over all valid Gaussian windows of every frame.
inline double ssim(const RealVolume& ref, const RealVolume& rec, const SsimOptions& opt = {}) {
  require_same(ref.dims(), rec.dims(), "ssim");
  const Dims& d = ref.dims();
  const auto w = static_cast<std::size_t>(opt.window);
  if (d.nx < w || d.ny < w) {
    throw ShapeError("ssim: frames " + std::to_string(d.nx) + "x" + std::to_string(d.ny) + " smaller than the " +
                     std::to_string(w) + "x" + std::to_string(w) + " window");
  }
  const auto k = detail::gaussian_kernel(opt.window, opt.sigma);
  const double c1 = (opt.k1 * opt.dynamic_range) * (opt.k1 * opt.dynamic_range);
  const double c2 = (opt.k2 * opt.dynamic_range) * (opt.k2 * opt.dynamic_range);
  const std::size_t n = d.nx * d.ny;

  double total = 0.0;
  std::size_t windows = 0;
  std::vector<double> a(n), b(n), aa(n), bb(n), ab(n);
  for (std::size_t t = 0; t < d.nt; ++t) {
    for (std::size_t x = 0; x < d.nx; ++x)
      for (std::size_t y = 0; y < d.ny; ++y) {
        const double p = ref(x, y, t), q = rec(x, y, t);
        const std::size_t i = x * d.ny + y;
        a[i] = p;
        b[i] = q;
        aa[i] = p * p;
        bb[i] = q * q;
        ab[i] = p * q;
      }
    const auto mu_a = detail::filter_valid(a, d.nx, d.ny, k);
    const auto mu_b = detail::filter_valid(b, d.nx, d.ny, k);
    const auto e_aa = detail::filter_valid(aa, d.nx, d.ny, k);
    const auto e_bb = detail::filter_valid(bb, d.nx, d.ny, k);
    const auto e_ab = detail::filter_valid(ab, d.nx, d.ny, k);
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double va = e_aa[i] - mu_a[i] * mu_a[i];
      const double vb = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      total += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
               ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
    }
    windows += mu_a.size();
  }
  return total / static_cast<double>(windows);
}

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, height rows of width

  std::uint8_t at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

/// Linear map of [lo, hi] to 0..255 with clipping; round half away from zero.
inline std::uint8_t to_gray(double v, double lo, double hi) {
  const double u = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(u * 255.0));
}

/// |ref - rec| clipped to [0, display_max], one image per frame (rows x, columns y).
inline std::vector<GrayImage> error_map(const RealVolume& ref, const RealVolume& rec, double display_max = 0.07) {
  require_same(ref.dims(), rec.dims(), "error_map");
  if (!(display_max > 0.0)) throw ConfigError("error_map: display_max must be positive");
  const Dims& d = ref.dims();
  std::vector<GrayImage> frames;
  for (std::size_t t = 0; t < d.nt; ++t) {
    GrayImage img{d.ny, d.nx, std::vector<std::uint8_t>(d.nx * d.ny)};
    for (std::size_t x = 0; x < d.nx; ++x)
      for (std::size_t y = 0; y < d.ny; ++y)
        img.pixels[x * d.ny + y] = to_gray(std::abs(ref(x, y, t) - rec(x, y, t)), 0.0, display_max);
    frames.push_back(std::move(img));
  }
  return frames;
}

/// Plain 2-D real image, rows x columns.
struct RealImage {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// Fixed-x slice across all frames: rows y, columns t.
inline RealImage yt_extract(const RealVolume& v, std::size_t x_index) {
  const Dims& d = v.dims();
  if (x_index >= d.nx) {
    throw ShapeError("yt_extract: x index " + std::to_string(x_index) + " out of range [0, " +
                     std::to_string(d.nx) + ")");
  }
  RealImage img{d.ny, d.nt, std::vector<double>(d.ny * d.nt)};
  for (std::size_t y = 0; y < d.ny; ++y)
    for (std::size_t t = 0; t < d.nt; ++t) img.values[y * d.nt + t] = v(x_index, y, t);
  return img;
}

inline GrayImage to_gray(const RealImage& img, double lo, double hi) {
  GrayImage g{img.cols, img.rows, std::vector<std::uint8_t>(img.values.size())};
  for (std::size_t i = 0; i < img.values.size(); ++i) g.pixels[i] = to_gray(img.values[i], lo, hi);
  return g;
}

/// Frame t of a magnitude volume (rows x, columns y).
inline GrayImage frame_image(const RealVolume& v, std::size_t t, double lo = 0.0, double hi = 1.0) {
  const Dims& d = v.dims();
  GrayImage g{d.ny, d.nx, std::vector<std::uint8_t>(d.nx * d.ny)};
  for (std::size_t x = 0; x < d.nx; ++x)
    for (std::size_t y = 0; y < d.ny; ++y) g.pixels[x * d.ny + y] = to_gray(v(x, y, t), lo, hi);
  return g;
}

/// Mask pattern as an image: rows are centered ky lines, columns frames.
inline GrayImage mask_image(const SamplingMask& m) {
  GrayImage g{m.nt(), m.ny(), std::vector<std::uint8_t>(m.ny() * m.nt())};
  for (std::size_t c = 0; c < m.ny(); ++c)
    for (std::size_t t = 0; t < m.nt(); ++t) g.pixels[c * m.nt() + t] = m.line(c, t) ? 255 : 0;
  return g;
}

/// Binary graymap (P5).
inline void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
}

}  // namespace dimension
