#pragma once

// Per-frame 2-D DFT over (x, y) with orthonormal scaling: both directions are
// multiplied by 1/sqrt(nx*ny), so the transform is unitary and its adjoint is
// its inverse. DC sits at bin (0, 0); no shifting is done here.

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "dimension/volume.hpp"

namespace dimension {

namespace detail {

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(const Dims& d, int sign) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(d.nx, d.ny, d.nt, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;

    // FFTW_ESTIMATE never touches the arrays; they only fix in/out-of-place.
    std::vector<cplx> a(d.count()), b(d.count());
    int n[2] = {static_cast<int>(d.nx), static_cast<int>(d.ny)};
    const int stride = static_cast<int>(d.nt);
    fftw_plan p = fftw_plan_many_dft(2, n, static_cast<int>(d.nt), reinterpret_cast<fftw_complex*>(a.data()),
                                     n, stride, 1, reinterpret_cast<fftw_complex*>(b.data()), n, stride, 1, sign,
                                     FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, p);
    return p;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::tuple<std::size_t, std::size_t, std::size_t, int>, fftw_plan> plans_;
};

inline ComplexVolume transform_frames(const ComplexVolume& v, int sign) {
  ComplexVolume out(v.dims());
  fftw_plan plan = PlanCache::instance().get(v.dims(), sign);
  // fftw_execute_dft does not write its input for out-of-place complex plans.
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(v.data().data())),
                   reinterpret_cast<fftw_complex*>(out.data().data()));
  const double scale = 1.0 / std::sqrt(static_cast<double>(v.dims().nx * v.dims().ny));
  for (auto& z : out.data()) z *= scale;
  return out;
}

}  // namespace detail

inline ComplexVolume fft2_frames(const ComplexVolume& v) { return detail::transform_frames(v, FFTW_FORWARD); }

inline ComplexVolume ifft2_frames(const ComplexVolume& v) { return detail::transform_frames(v, FFTW_BACKWARD); }

}  // namespace dimension
