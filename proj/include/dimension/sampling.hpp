#pragma once

// Retrospective Cartesian undersampling along the phase-encode axis (y).
//
// Mask lines are indexed in centered k-space coordinates: line c is the
// phase-encode with frequency c - floor(ny/2), so the ACS block sits in the
// middle of the (ny x nt) pattern as it does on a display. The FFT keeps DC at
// bin 0; ky bin k maps to centered line (k + floor(ny/2)) mod ny.

#include <cmath>
#include <cstdint>
#include <vector>

#include "dimension/error.hpp"
#include "dimension/fft.hpp"
#include "dimension/rng.hpp"
#include "dimension/volume.hpp"

namespace dimension {

class SamplingMask {
 public:
  SamplingMask() = default;
  SamplingMask(std::size_t ny, std::size_t nt, std::size_t acs, double accel)
      : ny_(ny), nt_(nt), acs_(acs), accel_(accel), lines_(ny * nt, 0) {}

  std::size_t ny() const { return ny_; }
  std::size_t nt() const { return nt_; }
  std::size_t acs() const { return acs_; }
  double accel() const { return accel_; }

  /// Centered line c in frame t.
  bool line(std::size_t c, std::size_t t) const { return lines_[c * nt_ + t] != 0; }
  void set_line(std::size_t c, std::size_t t, bool on) { lines_[c * nt_ + t] = on ? 1 : 0; }

  /// FFT bin ky (DC at 0) in frame t.
  bool sampled_ky(std::size_t ky, std::size_t t) const { return line((ky + ny_ / 2) % ny_, t); }

  std::size_t count(std::size_t t) const {
    std::size_t n = 0;
    for (std::size_t c = 0; c < ny_; ++c) n += line(c, t) ? 1 : 0;
    return n;
  }

  std::size_t acs_first() const { return ny_ / 2 - acs_ / 2; }

  bool operator==(const SamplingMask&) const = default;

 private:
  std::size_t ny_ = 0;
  std::size_t nt_ = 0;
  std::size_t acs_ = 0;
  double accel_ = 1.0;
  std::vector<std::uint8_t> lines_;
};

/// Lines per frame for a given acceleration: round(ny / accel), halves away from zero.
inline std::size_t line_budget(std::size_t ny, double accel) {
  return static_cast<std::size_t>(std::lround(static_cast<double>(ny) / accel));
}

/// Variable-density mask: per frame the `acs` central lines plus lines drawn
/// without replacement with weights exp(-d^2 / (2 sigma^2)), d the centered
/// offset and sigma = sigma_fraction * ny. Frames are drawn in order from one
/// stream seeded with `seed`.
inline SamplingMask generate_mask(std::size_t ny, std::size_t nt, double accel, std::size_t acs, std::uint64_t seed,
                                  double sigma_fraction = 1.0 / 6.0) {
  if (ny < 1 || nt < 1) throw ConfigError("mask needs ny >= 1 and nt >= 1");
  if (!(accel >= 1.0)) throw ConfigError("acceleration factor must be >= 1, got " + std::to_string(accel));
  if (!(sigma_fraction > 0.0)) throw ConfigError("sampling sigma must be positive");
  const std::size_t budget = line_budget(ny, accel);
  if (acs > budget) {
    throw ConfigError("ACS exceeds line budget (" + std::to_string(acs) + " > " + std::to_string(budget) + ")");
  }

  SamplingMask mask(ny, nt, acs, accel);
  const double center = static_cast<double>(ny / 2);
  const double sigma = sigma_fraction * static_cast<double>(ny);
  std::vector<double> density(ny);
  for (std::size_t c = 0; c < ny; ++c) {
    const double d = static_cast<double>(c) - center;
    density[c] = std::exp(-d * d / (2.0 * sigma * sigma));
  }

  Rng rng(seed);
  std::vector<double> weight(ny);
  for (std::size_t t = 0; t < nt; ++t) {
    weight = density;
    for (std::size_t c = mask.acs_first(); c < mask.acs_first() + acs; ++c) {
      mask.set_line(c, t, true);
      weight[c] = 0.0;
    }
    for (std::size_t drawn = acs; drawn < budget; ++drawn) {
      double total = 0.0;
      for (double w : weight) total += w;
      std::size_t pick = ny;
      if (total > 0.0) {
        const double target = rng.uniform() * total;
        double acc = 0.0;
        for (std::size_t c = 0; c < ny; ++c) {
          if (weight[c] == 0.0) continue;
          acc += weight[c];
          pick = c;
          if (target < acc) break;
        }
      } else {
        // Density underflowed for every remaining line: fall back to uniform.
        std::vector<std::size_t> free;
        for (std::size_t c = 0; c < ny; ++c)
          if (!mask.line(c, t)) free.push_back(c);
        pick = free[rng.below(free.size())];
      }
      mask.set_line(pick, t, true);
      weight[pick] = 0.0;
    }
  }
  return mask;
}

inline void require_mask_matches(const SamplingMask& m, const Dims& d) {
  if (m.ny() != d.ny || m.nt() != d.nt) {
    throw ShapeError("mask is " + std::to_string(m.ny()) + "x" + std::to_string(m.nt()) + " (ny x nt), volume is " +
                     d.str());
  }
}

/// Keeps sampled phase-encode lines; every other sample becomes exactly zero.
inline ComplexVolume apply_mask(const ComplexVolume& k, const SamplingMask& m) {
  const Dims& d = k.dims();
  require_mask_matches(m, d);
  ComplexVolume out(d);
  for (std::size_t x = 0; x < d.nx; ++x)
    for (std::size_t y = 0; y < d.ny; ++y)
      for (std::size_t t = 0; t < d.nt; ++t)
        if (m.sampled_ky(y, t)) out(x, y, t) = k(x, y, t);
  return out;
}

inline ComplexVolume zero_filled_recon(const ComplexVolume& k_u) { return ifft2_frames(k_u); }

}  // namespace dimension
