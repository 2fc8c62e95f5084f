#pragma once

// Synthetic cine phantoms: a large static-ish "body" ellipse plus smaller
// ellipses that translate and contract periodically in time, with soft
// edges, normalised to unit peak magnitude and modulated by a smooth static
// phase map.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "dimension/error.hpp"
#include "dimension/fft.hpp"
#include "dimension/rng.hpp"
#include "dimension/sampling.hpp"
#include "dimension/volume.hpp"

namespace dimension {

struct PhantomSpec {
  std::size_t nx = 64;
  std::size_t ny = 64;
  std::size_t nt = 6;
  int n_objects = 5;
  double motion_amplitude = 2.0;  // pixels
  double period = 6.0;            // frames
  double contrast_min = 0.2;
  double contrast_max = 1.0;
  double phase_amplitude = 0.5;  // radians
  double phase_frequency = 1.0;  // cycles per field of view
  double noise_std = 0.0;
  std::uint64_t seed = 0;

  Dims dims() const { return {nx, ny, nt}; }

  void validate() const {
    require_valid(dims());
    if (n_objects < 0) throw ConfigError("phantom object count must be >= 0");
    if (!(period > 0.0)) throw ConfigError("phantom motion period must be positive");
    if (!(contrast_min >= 0.0 && contrast_max >= contrast_min)) throw ConfigError("phantom contrast range invalid");
    if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
  }
};

namespace detail {

struct Ellipse {
  double cx, cy, a, b, angle, intensity, contraction, amplitude, direction, phase;
};

inline std::vector<Ellipse> draw_ellipses(const PhantomSpec& s, Rng& rng) {
  const double nx = static_cast<double>(s.nx), ny = static_cast<double>(s.ny);
  std::vector<Ellipse> out;
  for (int k = 0; k < s.n_objects; ++k) {
    Ellipse e{};
    if (k == 0) {
      e.cx = nx / 2 + rng.uniform(-0.04, 0.04) * nx;
      e.cy = ny / 2 + rng.uniform(-0.04, 0.04) * ny;
      e.a = rng.uniform(0.34, 0.42) * nx;
      e.b = rng.uniform(0.30, 0.40) * ny;
      e.intensity = rng.uniform(s.contrast_min, 0.5 * (s.contrast_min + s.contrast_max));
      e.contraction = rng.uniform(0.0, 0.03);
      e.amplitude = 0.25 * s.motion_amplitude;
    } else {
      e.cx = nx / 2 + rng.uniform(-0.2, 0.2) * nx;
      e.cy = ny / 2 + rng.uniform(-0.2, 0.2) * ny;
      e.a = rng.uniform(0.06, 0.15) * nx;
      e.b = rng.uniform(0.06, 0.15) * ny;
      e.intensity = rng.uniform(s.contrast_min, s.contrast_max);
      e.contraction = rng.uniform(0.05, 0.2);
      e.amplitude = s.motion_amplitude;
    }
    e.angle = rng.uniform(0.0, std::numbers::pi);
    e.direction = rng.uniform(0.0, 2.0 * std::numbers::pi);
    e.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    out.push_back(e);
  }
  return out;
}

}  // namespace detail

inline ComplexVolume generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const Dims d = spec.dims();
  ComplexVolume out(d);
  if (spec.n_objects == 0) return out;

  Rng rng(spec.seed);
  const auto ellipses = detail::draw_ellipses(spec, rng);

  RealVolume mag(d);
  constexpr double edge_width = 0.6;  // pixels
  for (std::size_t t = 0; t < d.nt; ++t) {
    for (const auto& e : ellipses) {
      const double s = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / spec.period + e.phase);
      const double cx = e.cx + e.amplitude * s * std::cos(e.direction);
      const double cy = e.cy + e.amplitude * s * std::sin(e.direction);
      const double scale = 1.0 - e.contraction * (0.5 + 0.5 * s);
      const double a = e.a * scale, b = e.b * scale;
      const double ca = std::cos(e.angle), sa = std::sin(e.angle);
      const double sharp = std::min(a, b) / edge_width;
      for (std::size_t x = 0; x < d.nx; ++x)
        for (std::size_t y = 0; y < d.ny; ++y) {
          const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
          const double u = (ca * dx + sa * dy) / a;
          const double v = (-sa * dx + ca * dy) / b;
          const double r = std::sqrt(u * u + v * v);
          const double z = (r - 1.0) * sharp;
          if (z > 30.0) continue;
          mag(x, y, t) += e.intensity / (1.0 + std::exp(z));
        }
    }
  }

  double peak = 0.0;
  for (double m : mag.data()) peak = std::max(peak, m);
  if (peak > 0.0)
    for (double& m : mag.data()) m /= peak;

  std::array<double, 4> p{};
  for (auto& v : p) v = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double f = spec.phase_frequency;
  for (std::size_t x = 0; x < d.nx; ++x)
    for (std::size_t y = 0; y < d.ny; ++y) {
      const double fx = static_cast<double>(x) / static_cast<double>(d.nx);
      const double fy = static_cast<double>(y) / static_cast<double>(d.ny);
      const double w1 = std::sin(2.0 * std::numbers::pi * f * (fx * std::cos(p[0]) + fy * std::sin(p[0])) + p[1]);
      const double w2 = std::sin(2.0 * std::numbers::pi * 0.5 * f * (fx * std::cos(p[2]) + fy * std::sin(p[2])) + p[3]);
      const double phi = spec.phase_amplitude * (w1 + 0.5 * w2) / 1.5;
      const cplx rot = std::polar(1.0, phi);
      for (std::size_t t = 0; t < d.nt; ++t) out(x, y, t) = mag(x, y, t) * rot;
    }
  return out;
}

/// K_u = mask(FFT(S) + e), e complex Gaussian with per-component std noise_std,
/// drawn only at sampled positions in (x, y, t) order.
inline ComplexVolume simulate_acquisition(const ComplexVolume& image, const SamplingMask& mask, double noise_std,
                                          std::uint64_t seed) {
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
  require_mask_matches(mask, image.dims());
  ComplexVolume k = fft2_frames(image);
  if (noise_std > 0.0) {
    Rng rng(seed);
    const Dims& d = k.dims();
    for (std::size_t x = 0; x < d.nx; ++x)
      for (std::size_t y = 0; y < d.ny; ++y)
        for (std::size_t t = 0; t < d.nt; ++t)
          if (mask.sampled_ky(y, t)) {
            const double re = rng.normal() * noise_std;
            const double im = rng.normal() * noise_std;
            k(x, y, t) += cplx(re, im);
          }
  }
  return apply_mask(k, mask);
}

/// Axis-aligned crops of size `patch` on the `stride` lattice, x slowest.
inline std::vector<ComplexVolume> shear_patches(const ComplexVolume& v, const Dims& patch,
                                                std::array<std::size_t, 3> stride) {
  const Dims& d = v.dims();
  require_valid(patch);
  if (patch.nx > d.nx || patch.ny > d.ny || patch.nt > d.nt) {
    throw ShapeError("patch " + patch.str() + " larger than volume " + d.str());
  }
  for (auto s : stride)
    if (s < 1) throw ConfigError("patch stride must be >= 1");
  std::vector<ComplexVolume> out;
  for (std::size_t x0 = 0; x0 + patch.nx <= d.nx; x0 += stride[0])
    for (std::size_t y0 = 0; y0 + patch.ny <= d.ny; y0 += stride[1])
      for (std::size_t t0 = 0; t0 + patch.nt <= d.nt; t0 += stride[2]) {
        ComplexVolume p(patch);
        for (std::size_t x = 0; x < patch.nx; ++x)
          for (std::size_t y = 0; y < patch.ny; ++y)
            for (std::size_t t = 0; t < patch.nt; ++t) p(x, y, t) = v(x0 + x, y0 + y, t0 + t);
        out.push_back(std::move(p));
      }
  return out;
}

}  // namespace dimension
