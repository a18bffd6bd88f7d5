#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "twoscale/errors.hpp"

namespace twoscale {

using Vector = std::vector<double>;

/// Absolute tolerance on the per-site average of a vector flagged mean-zero.
inline constexpr double kMeanTol = 1e-9;
/// Relative residual accepted from the spectral inverse of A.
inline constexpr double kSolveTol = 1e-10;

inline double sum(std::span<const double> x) {
  // Kahan-compensated.
  double s = 0.0, c = 0.0;
  for (double v : x) {
    const double y = v - c;
    const double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s;
}

inline double mean(std::span<const double> x) { return x.empty() ? 0.0 : sum(x) / double(x.size()); }

inline double dot(std::span<const double> a, std::span<const double> b) {
  require_dim(b.size(), a.size(), "dot");
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

inline bool is_mean_zero(std::span<const double> x, double tol = kMeanTol) {
  return std::abs(sum(x)) <= double(x.size()) * tol;
}

inline void require_mean_zero(std::span<const double> x, const char* what) {
  if (!is_mean_zero(x)) {
    throw DomainError(std::string(what) + ": input is not mean-zero (average " +
                      std::to_string(mean(x)) + ")");
  }
}

inline Vector centered(std::span<const double> x) {
  const double m = mean(x);
  Vector out(x.begin(), x.end());
  for (double& v : out) v -= m;
  return out;
}

inline Vector axpy(double a, std::span<const double> x, std::span<const double> y) {
  require_dim(y.size(), x.size(), "axpy");
  Vector out(y.begin(), y.end());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] += a * x[i];
  return out;
}

inline Vector subtract(std::span<const double> x, std::span<const double> y) { return axpy(-1.0, y, x); }

inline bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace twoscale
