#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>

#include <fftw3.h>

#include "twoscale/errors.hpp"

namespace twoscale {

namespace detail {
// FFTW's planner is not re-entrant; execution with the new-array API is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Real-to-complex transform of fixed length. Plans are created once and
/// executed on caller buffers, so one instance can be shared by threads.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    if (n == 0) throw DimensionError("RealFft: zero length");
    std::lock_guard lock(detail::fftw_planner_mutex());
    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, flags);
    inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), out, in, flags);
    fftw_free(in);
    fftw_free(out);
    if (forward_ == nullptr || inverse_ == nullptr) throw NumericalError("RealFft: planning failed");
  }

  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  ~RealFft() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
  }

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  void forward(std::span<const double> in, std::span<std::complex<double>> out) const {
    require_dim(in.size(), n_, "RealFft::forward input");
    require_dim(out.size(), bins(), "RealFft::forward output");
    // r2c leaves its input untouched.
    fftw_execute_dft_r2c(forward_, const_cast<double*>(in.data()),
                         reinterpret_cast<fftw_complex*>(out.data()));
  }

  /// Unnormalized inverse; the spectrum is used as scratch and overwritten.
  void inverse(std::span<std::complex<double>> spectrum, std::span<double> out) const {
    require_dim(spectrum.size(), bins(), "RealFft::inverse input");
    require_dim(out.size(), n_, "RealFft::inverse output");
    fftw_execute_dft_c2r(inverse_, reinterpret_cast<fftw_complex*>(spectrum.data()), out.data());
  }

 private:
  std::size_t n_;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

/// Shared transform for length n; instances are cached for the process lifetime.
inline std::shared_ptr<const RealFft> real_fft(std::size_t n) {
  // The planner mutex must outlive the cache, so construct it first.
  (void)detail::fftw_planner_mutex();
  static std::mutex m;
  static std::map<std::size_t, std::shared_ptr<const RealFft>> cache;
  std::lock_guard lock(m);
  auto& slot = cache[n];
  if (!slot) slot = std::make_shared<const RealFft>(n);
  return slot;
}

}  // namespace twoscale
