#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include "dimension/dimension.hpp"

namespace testing_support {

using dimension::ComplexVolume;
using dimension::cplx;
using dimension::Dims;
using dimension::RealVolume;

inline ComplexVolume random_volume(const Dims& d, std::uint64_t seed, double scale = 1.0) {
  dimension::Rng rng(seed);
  ComplexVolume v(d);
  for (auto& z : v.data()) z = cplx(scale * rng.normal(), scale * rng.normal());
  return v;
}

inline RealVolume random_real(const Dims& d, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  dimension::Rng rng(seed);
  RealVolume v(d);
  for (auto& r : v.data()) r = rng.uniform(lo, hi);
  return v;
}

/// Direct O(N^2) DFT per frame, unitary scaling, DC at (0, 0).
inline ComplexVolume naive_dft(const ComplexVolume& v, int sign) {
  const Dims& d = v.dims();
  ComplexVolume out(d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d.nx * d.ny));
  for (std::size_t t = 0; t < d.nt; ++t)
    for (std::size_t u = 0; u < d.nx; ++u)
      for (std::size_t w = 0; w < d.ny; ++w) {
        cplx s = 0.0;
        for (std::size_t x = 0; x < d.nx; ++x)
          for (std::size_t y = 0; y < d.ny; ++y) {
            const double ph = sign * 2.0 * std::numbers::pi *
                              (static_cast<double>(u * x) / static_cast<double>(d.nx) +
                               static_cast<double>(w * y) / static_cast<double>(d.ny));
            s += v(x, y, t) * std::polar(1.0, ph);
          }
        out(u, w, t) = s * scale;
      }
  return out;
}

inline double max_abs_diff(const ComplexVolume& a, const ComplexVolume& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs_diff(const RealVolume& a, const RealVolume& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Real inner product of the two-channel views.
inline double inner(const ComplexVolume& a, const ComplexVolume& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
  return s;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("dimension_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

struct CenterBias {
  std::vector<double> frequency;  // per centered line
  bool acs_always = true;
  bool peak_next_to_acs = true;
  bool binned_monotone = true;
  double spearman = 0.0;  // rank correlation of |offset| with frequency, non-ACS lines

  bool passed() const { return acs_always && peak_next_to_acs && binned_monotone && spearman < -0.9; }
};

namespace detail {

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = 0.5 * static_cast<double>(i + j);
    i = j + 1;
  }
  return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i] / n, mb += b[i] / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace detail

/// Empirical per-line sampling frequency over `seeds` masks, then rank-based
/// checks: ACS lines always on, the most frequent non-ACS line borders the
/// ACS block, 4-line bin means never increase moving outward on either side,
/// and frequency is strongly anti-correlated (Spearman) with distance.
inline CenterBias center_bias(std::size_t ny, std::size_t nt, double accel, std::size_t acs, std::size_t seeds) {
  CenterBias r;
  r.frequency.assign(ny, 0.0);
  for (std::size_t s = 0; s < seeds; ++s) {
    const auto m = dimension::generate_mask(ny, nt, accel, acs, 1000 + s);
    for (std::size_t c = 0; c < ny; ++c)
      for (std::size_t t = 0; t < nt; ++t) r.frequency[c] += m.line(c, t) ? 1.0 : 0.0;
  }
  for (double& f : r.frequency) f /= static_cast<double>(seeds * nt);
  const std::size_t a0 = ny / 2 - acs / 2, a1 = a0 + acs;  // ACS = [a0, a1)
  for (std::size_t c = a0; c < a1; ++c) r.acs_always = r.acs_always && r.frequency[c] == 1.0;

  std::size_t best = a1 < ny ? a1 : a0 - 1;
  for (std::size_t c = 0; c < ny; ++c)
    if ((c < a0 || c >= a1) && r.frequency[c] > r.frequency[best]) best = c;
  r.peak_next_to_acs = (best + 2 >= a0 && best < a0) || (best >= a1 && best <= a1 + 1);

  auto side = [&](std::vector<double> prof) {
    std::vector<double> bins;
    for (std::size_t i = 0; i + 4 <= prof.size(); i += 4) bins.push_back((prof[i] + prof[i + 1] + prof[i + 2] + prof[i + 3]) / 4);
    for (std::size_t i = 1; i < bins.size(); ++i)
      if (bins[i] > bins[i - 1]) return false;
    return true;
  };
  std::vector<double> right(r.frequency.begin() + static_cast<std::ptrdiff_t>(a1), r.frequency.end());
  std::vector<double> left;
  for (std::size_t c = a0; c-- > 0;) left.push_back(r.frequency[c]);
  r.binned_monotone = side(right) && side(left);

  std::vector<double> dist, freq;
  const double center = static_cast<double>(ny / 2);
  for (std::size_t c = 0; c < ny; ++c) {
    if (c >= a0 && c < a1) continue;
    dist.push_back(std::abs(static_cast<double>(c) - center));
    freq.push_back(r.frequency[c]);
  }
  r.spearman = detail::pearson(detail::ranks(dist), detail::ranks(freq));
  return r;
}

}  // namespace testing_support
