#pragma once

// Microscopic linear algebra on the periodic lattice of n sites:
//   (Ax)_i = n^2 (2x_i - x_{i+1} - x_{i-1})      scaled discrete Laplacian
//   (Jx)_i = (n/2) (x_{i+1} - x_{i-1})           scaled discrete derivative
//   (Dx)_i = n (x_i - x_{i+1}),  A = D D^T,  J = (D^T - D) / 2
// All three are circulant; inverses act on the mean-zero subspace.

#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "twoscale/errors.hpp"
#include "twoscale/fft.hpp"
#include "twoscale/vector_ops.hpp"

namespace twoscale {

/// Number of lattice sites. n = 2 is rejected: J vanishes identically there.
class LatticeDim {
 public:
  explicit LatticeDim(std::size_t n) : n_(n) {
    if (n < 3) throw DomainError("LatticeDim: need at least 3 sites, got " + std::to_string(n));
  }
  std::size_t size() const { return n_; }
  friend bool operator==(LatticeDim, LatticeDim) = default;

 private:
  std::size_t n_;
};

/// Eigenvalue of A on Fourier mode k: 4 n^2 sin^2(pi k / n).
inline double laplacian_eigenvalue(std::size_t n, std::size_t k) {
  const double s = std::sin(std::numbers::pi * double(k) / double(n));
  return 4.0 * double(n) * double(n) * s * s;
}

/// Eigenvalue of A + J on the mode exp(2 pi i k j / n).
inline std::complex<double> generator_eigenvalue(std::size_t n, std::size_t k) {
  const double theta = 2.0 * std::numbers::pi * double(k) / double(n);
  return {laplacian_eigenvalue(n, k), double(n) * std::sin(theta)};
}

class CirculantOps {
 public:
  explicit CirculantOps(LatticeDim dim) : n_(dim.size()), fft_(real_fft(dim.size())), inv_eig_(n_ / 2 + 1) {
    for (std::size_t k = 1; k < inv_eig_.size(); ++k) inv_eig_[k] = 1.0 / laplacian_eigenvalue(n_, k);
  }

  std::size_t size() const { return n_; }
  LatticeDim dim() const { return LatticeDim(n_); }
  const RealFft& fft() const { return *fft_; }

  Vector apply_A(std::span<const double> x) const {
    check(x, "apply_A");
    const double s = double(n_) * double(n_);
    Vector y(n_);
    for (std::size_t i = 0; i < n_; ++i) y[i] = s * (2.0 * x[i] - x[next(i)] - x[prev(i)]);
    return y;
  }

  Vector apply_J(std::span<const double> x) const {
    check(x, "apply_J");
    const double s = 0.5 * double(n_);
    Vector y(n_);
    for (std::size_t i = 0; i < n_; ++i) y[i] = s * (x[next(i)] - x[prev(i)]);
    return y;
  }

  Vector apply_D(std::span<const double> x) const {
    check(x, "apply_D");
    Vector y(n_);
    for (std::size_t i = 0; i < n_; ++i) y[i] = double(n_) * (x[i] - x[next(i)]);
    return y;
  }

  Vector apply_Dt(std::span<const double> x) const {
    check(x, "apply_Dt");
    Vector y(n_);
    for (std::size_t i = 0; i < n_; ++i) y[i] = double(n_) * (x[i] - x[prev(i)]);
    return y;
  }

  /// A^{-1} on mean-zero vectors; the result is mean-zero.
  Vector solve_A_inv(std::span<const double> x) const {
    check(x, "solve_A_inv");
    require_mean_zero(x, "solve_A_inv");
    return pinv_A(x);
  }

  /// Moore-Penrose inverse of A: the mean of x is discarded first.
  Vector pinv_A(std::span<const double> x) const {
    check(x, "pinv_A");
    return apply_real_multiplier(x, [this](std::size_t k) { return k == 0 ? 0.0 : inv_eig_[k]; });
  }

  /// J A^{-1} x via JA^{-1} = (D^{-1} - (D^T)^{-1}) / 2, each inverse a
  /// cumulative sum taken mean-zero.
  Vector apply_JAinv(std::span<const double> x) const {
    check(x, "apply_JAinv");
    require_mean_zero(x, "apply_JAinv");
    const double inv_n = 1.0 / double(n_);
    Vector d_inv(n_), dt_inv(n_);
    double run = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      d_inv[i] = -inv_n * run;  // y_{i+1} = y_i - x_i / n
      run += x[i];
      dt_inv[i] = inv_n * run;  // z_i = z_{i-1} + x_i / n
    }
    const double md = mean(d_inv), mt = mean(dt_inv);
    Vector out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = 0.5 * ((d_inv[i] - md) - (dt_inv[i] - mt));
    return out;
  }

  /// (1/n) <A^{-1} x, x> for mean-zero x.
  double quad_form_Ainv(std::span<const double> x) const {
    const Vector y = solve_A_inv(x);
    return std::max(0.0, dot(y, x)) / double(n_);
  }

  /// Smallest nonzero eigenvalue of A.
  double spectral_gap() const { return laplacian_eigenvalue(n_, 1); }

  /// Applies the circulant operator with a real, k <-> n-k symmetric spectrum.
  template <class Multiplier>
  Vector apply_real_multiplier(std::span<const double> x, Multiplier&& mult) const {
    std::vector<std::complex<double>> spec(fft_->bins());
    fft_->forward(x, spec);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= mult(k) / double(n_);
    Vector out(n_);
    fft_->inverse(spec, out);
    return out;
  }

  /// Applies the circulant operator whose eigenvalue on exp(2 pi i k j/n) is mult(k),
  /// for 0 <= k <= n/2 (the remaining modes are conjugates).
  template <class Multiplier>
  Vector apply_complex_multiplier(std::span<const double> x, Multiplier&& mult) const {
    std::vector<std::complex<double>> spec(fft_->bins());
    fft_->forward(x, spec);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= std::complex<double>(mult(k)) / double(n_);
    Vector out(n_);
    fft_->inverse(spec, out);
    return out;
  }

 private:
  std::size_t next(std::size_t i) const { return i + 1 == n_ ? 0 : i + 1; }
  std::size_t prev(std::size_t i) const { return i == 0 ? n_ - 1 : i - 1; }
  void check(std::span<const double> x, const char* what) const { require_dim(x.size(), n_, what); }

  std::size_t n_;
  std::shared_ptr<const RealFft> fft_;
  std::vector<double> inv_eig_;
};

/// Outcome of the executable checks on assumptions (viii)-(x) for one n.
struct AssumptionReport {
  std::size_t n = 0;
  bool j_antisymmetric = false;     // J^T == -J entrywise, exactly
  double commutator_max = 0.0;      // max |(AJ - JA)_{ij}|
  double commutator_tol = 0.0;      // 1e-9 n^2
  double factorization_rel = 0.0;   // max |(DD^T - A)_{ij}| / max |A_{ij}|
  double weak_asym_max_ratio = 0.0; // max <-J^2 x, x> / <Ax, x> over the batch
  std::size_t weak_asym_violations = 0;
  std::size_t batch = 0;
  double spectral_gap = 0.0;        // tau = 4 n^2 sin^2(pi/n)
  double spectral_gap_limit = 4.0 * std::numbers::pi * std::numbers::pi;

  bool commutes() const { return commutator_max <= commutator_tol; }
  bool factorizes() const { return factorization_rel <= 1e-12; }
  bool weakly_asymmetric() const { return weak_asym_violations == 0; }
  bool all_pass() const { return j_antisymmetric && commutes() && factorizes() && weakly_asymmetric(); }
};

/// Column-by-column evaluation of J^T = -J, AJ = JA and A = DD^T (exact
/// matrices, built from the stencils), plus <-J^2x,x> <= <Ax,x> on `batch`
/// random vectors.
inline AssumptionReport check_assumptions(LatticeDim dim, std::size_t batch = 1000, std::uint64_t seed = 1) {
  const CirculantOps ops(dim);
  const std::size_t n = dim.size();
  AssumptionReport r;
  r.n = n;
  r.batch = batch;
  r.commutator_tol = 1e-9 * double(n) * double(n);
  r.spectral_gap = ops.spectral_gap();

  std::vector<Vector> jcols(n);
  double a_max = 0.0, fact_max = 0.0;
  Vector e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    const Vector ae = ops.apply_A(e);
    jcols[j] = ops.apply_J(e);
    const Vector ajx = ops.apply_A(jcols[j]);
    const Vector jax = ops.apply_J(ae);
    const Vector ddt = ops.apply_D(ops.apply_Dt(e));
    for (std::size_t i = 0; i < n; ++i) {
      r.commutator_max = std::max(r.commutator_max, std::abs(ajx[i] - jax[i]));
      fact_max = std::max(fact_max, std::abs(ddt[i] - ae[i]));
      a_max = std::max(a_max, std::abs(ae[i]));
    }
    e[j] = 0.0;
  }
  r.factorization_rel = fact_max / a_max;

  r.j_antisymmetric = true;
  for (std::size_t i = 0; i < n && r.j_antisymmetric; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (jcols[j][i] != -jcols[i][j]) {
        r.j_antisymmetric = false;
        break;
      }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector x(n);
  for (std::size_t b = 0; b < batch; ++b) {
    for (double& v : x) v = normal(rng);
    const Vector jx = ops.apply_J(x);
    const double lhs = dot(jx, jx);  // <-J^2 x, x> = |Jx|^2
    const double rhs = dot(ops.apply_A(x), x);
    r.weak_asym_max_ratio = std::max(r.weak_asym_max_ratio, lhs / rhs);
    if (lhs > rhs) ++r.weak_asym_violations;
  }
  return r;
}

}  // namespace twoscale
