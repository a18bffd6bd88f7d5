#pragma once

// Ground truth at desk scale.
//  * A finite-volume Fokker-Planck solver for d_t(f mu) = div[mu (A + sJ) grad f]
//    at n = 3, on the two mean-zero coordinates.
//  * Exact Gaussian moments of the linear (Ornstein-Uhlenbeck) dynamics at any n.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "twoscale/errors.hpp"
#include "twoscale/operators.hpp"
#include "twoscale/thermo.hpp"
#include "twoscale/vector_ops.hpp"

namespace twoscale {

// ---- n = 3 Fokker-Planck ---------------------------------------------------------

/// Orthonormal basis of the mean-zero plane in R^3 (the two real Fourier modes).
inline Eigen::Matrix<double, 3, 2> mean_zero_basis3() {
  Eigen::Matrix<double, 3, 2> q;
  const double s = std::sqrt(2.0 / 3.0);
  for (int j = 0; j < 3; ++j) {
    const double th = 2.0 * std::numbers::pi * j / 3.0;
    q(j, 0) = s * std::cos(th);
    q(j, 1) = s * std::sin(th);
  }
  return q;
}

/// Dense n x n matrices of A and J, assembled from the stencils.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> dense_AJ(std::size_t n) {
  const CirculantOps ops{LatticeDim(n)};
  Eigen::MatrixXd a{Eigen::Index(n), Eigen::Index(n)}, j{Eigen::Index(n), Eigen::Index(n)};
  Vector e(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    e[c] = 1.0;
    const Vector ac = ops.apply_A(e), jc = ops.apply_J(e);
    for (std::size_t r = 0; r < n; ++r) {
      a(Eigen::Index(r), Eigen::Index(c)) = ac[r];
      j(Eigen::Index(r), Eigen::Index(c)) = jc[r];
    }
    e[c] = 0.0;
  }
  return {a, j};
}

struct FpOptions {
  double radius = 6.0;      // box [-radius, radius]^2
  double h = 1.0 / 16.0;    // mesh; 2 radius / h must be an integer
  double j_scale = 1.0;     // s in A + sJ
  double cfl = 0.9;
};

/// Cell-centred grid holding f (the density with respect to mu) and the
/// discrete reference measure mu_c h^2, normalized to total mass one.
///
/// Fluxes. Symmetric part: across every interior face, a mu_face (f_j - f_i)
/// with a the (isotropic) restriction of A and mu_face = mu at the face
/// midpoint. Antisymmetric part: div(mu J grad f) = -div(f u) with
/// u = J grad mu = rot(beta mu). Face fluxes of u are differences of the
/// stream function beta mu at the face corners (zero on the boundary), so the
/// discrete field is divergence-free and the boundary is impermeable. The
/// transported value of f on a face is the logarithmic mean of its neighbours,
/// which makes the antisymmetric part exactly entropy-neutral.
class FokkerPlanck3 {
 public:
  FokkerPlanck3(const Potential& psi, FpOptions opt = {}) : psi_(psi), opt_(opt) {
    const double cells = 2.0 * opt.radius / opt.h;
    nc_ = std::size_t(std::llround(cells));
    if (nc_ < 4 || std::abs(cells - double(nc_)) > 1e-9 * cells) throw DomainError("FokkerPlanck3: h must divide the box");
    const auto [a, j] = dense_AJ(3);
    const Eigen::Matrix<double, 3, 2> q = mean_zero_basis3();
    const Eigen::Matrix2d ar = q.transpose() * a * q, jr = q.transpose() * j * q;
    if (std::abs(ar(0, 1)) > 1e-10 || std::abs(ar(0, 0) - ar(1, 1)) > 1e-10 * ar(0, 0)) {
      throw NumericalError("FokkerPlanck3: restricted A is not isotropic");
    }
    a_ = ar(0, 0);
    beta_ = opt.j_scale * jr(0, 1);
    basis_ = q;

    // Cell and face weights.
    const std::size_t n = nc_;
    mu_.assign(n * n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        mu_[i * n + k] = raw_mu(coord(i), coord(k));
        total += mu_[i * n + k];
      }
    norm_ = 1.0 / (total * opt.h * opt.h);
    for (double& v : mu_) v *= norm_;
    // x-faces: between (i,k) and (i+1,k); y-faces: between (i,k) and (i,k+1).
    dx_.assign((n - 1) * n, 0.0);
    dy_.assign(n * (n - 1), 0.0);
    ux_.assign((n - 1) * n, 0.0);
    uy_.assign(n * (n - 1), 0.0);
    auto corner = [&](std::size_t ci, std::size_t ck) {  // stream function at corner (ci, ck), 0..n
      if (ci == 0 || ck == 0 || ci == n || ck == n) return 0.0;
      return beta_ * norm_ * raw_mu(edge(ci), edge(ck));
    };
    for (std::size_t i = 0; i + 1 < n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        dx_[i * n + k] = a_ * norm_ * raw_mu(edge(i + 1), coord(k));
        // flux of u = (d2 s, -d1 s) through the face x = edge(i+1) in +x direction
        ux_[i * n + k] = corner(i + 1, k + 1) - corner(i + 1, k);
      }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k + 1 < n; ++k) {
        dy_[i * (n - 1) + k] = a_ * norm_ * raw_mu(coord(i), edge(k + 1));
        uy_[i * (n - 1) + k] = -(corner(i + 1, k + 1) - corner(i, k + 1));
      }
    // Explicit stability: sum of off-diagonal rates below 1/dt.
    double rate = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        double r = 0.0;
        if (i > 0) r += dx_[(i - 1) * n + k] + std::abs(ux_[(i - 1) * n + k]);
        if (i + 1 < n) r += dx_[i * n + k] + std::abs(ux_[i * n + k]);
        if (k > 0) r += dy_[i * (n - 1) + k - 1] + std::abs(uy_[i * (n - 1) + k - 1]);
        if (k + 1 < n) r += dy_[i * (n - 1) + k] + std::abs(uy_[i * (n - 1) + k]);
        rate = std::max(rate, r / (mu_[i * n + k] * opt.h * opt.h));
      }
    dt_max_ = opt.cfl / rate;
  }

  std::size_t cells_per_axis() const { return nc_; }
  double mesh() const { return opt_.h; }
  double dt_max() const { return dt_max_; }
  double a_restricted() const { return a_; }
  double beta() const { return beta_; }
  double coord(std::size_t i) const { return -opt_.radius + (double(i) + 0.5) * opt_.h; }
  const Vector& mu() const { return mu_; }
  const Eigen::Matrix<double, 3, 2>& basis() const { return basis_; }

  /// f sampled from a function of the plane coordinates.
  template <class F>
  Vector sample(F&& fn) const {
    Vector f(nc_ * nc_);
    for (std::size_t i = 0; i < nc_; ++i)
      for (std::size_t k = 0; k < nc_; ++k) f[i * nc_ + k] = fn(coord(i), coord(k));
    return f;
  }

  /// Sum f mu_c h^2.
  double mass(std::span<const double> f) const {
    double acc = 0.0;
    for (std::size_t c = 0; c < f.size(); ++c) acc += f[c] * mu_[c];
    return acc * opt_.h * opt_.h;
  }

  /// Rescales f to unit mass.
  Vector normalized(Vector f) const {
    const double s = 1.0 / mass(f);
    for (double& v : f) v *= s;
    return f;
  }

  /// d f / dt of the semi-discrete scheme.
  Vector rate(std::span<const double> f) const {
    const std::size_t n = nc_;
    require_dim(f.size(), n * n, "FokkerPlanck3::rate");
    Vector dm(n * n, 0.0);  // d(mass)/dt per cell
    for (std::size_t i = 0; i + 1 < n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t p = i * n + k, q = (i + 1) * n + k;
        const double flux = dx_[i * n + k] * (f[q] - f[p]) - ux_[i * n + k] * log_mean(f[p], f[q]);
        dm[p] += flux;
        dm[q] -= flux;
      }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k + 1 < n; ++k) {
        const std::size_t p = i * n + k, q = i * n + k + 1;
        const double flux = dy_[i * (n - 1) + k] * (f[q] - f[p]) - uy_[i * (n - 1) + k] * log_mean(f[p], f[q]);
        dm[p] += flux;
        dm[q] -= flux;
      }
    const double inv_area = 1.0 / (opt_.h * opt_.h);
    for (std::size_t c = 0; c < dm.size(); ++c) dm[c] *= inv_area / mu_[c];
    return dm;
  }

  /// One explicit Euler step; aborts if dt exceeds the stability bound or f
  /// loses positivity.
  /// Three-stage SSP Runge-Kutta (Shu-Osher). Every stage is a convex
  /// combination of forward Euler steps, so mass and positivity carry over
  /// from the Euler bound.
  Vector step(std::span<const double> f, double dt) const {
    if (dt > dt_max_ * (1.0 + 1e-12)) throw DomainError("fp_step: dt above the stability bound");
    const Vector f1 = euler(f, dt);
    const Vector e1 = euler(f1, dt);
    Vector f2(f.size());
    for (std::size_t c = 0; c < f2.size(); ++c) f2[c] = 0.75 * f[c] + 0.25 * e1[c];
    const Vector e2 = euler(f2, dt);
    Vector out(f.size());
    for (std::size_t c = 0; c < out.size(); ++c) {
      out[c] = f[c] / 3.0 + 2.0 * e2[c] / 3.0;
      if (!(out[c] > 0.0)) throw NumericalError("fp_step: density lost positivity");
    }
    return out;
  }

  Vector euler(std::span<const double> f, double dt) const {
    const Vector r = rate(f);
    Vector out(f.begin(), f.end());
    for (std::size_t c = 0; c < out.size(); ++c) {
      out[c] += dt * r[c];
      if (!(out[c] > 0.0)) throw NumericalError("fp_step: density lost positivity");
    }
    return out;
  }

  /// S = sum Phi(f) mu_c h^2 with Phi(f) = f log f.
  double entropy(std::span<const double> f) const {
    double acc = 0.0;
    for (std::size_t c = 0; c < f.size(); ++c) acc += f[c] * std::log(f[c]) * mu_[c];
    return acc * opt_.h * opt_.h;
  }

  /// Discrete I_A = sum over faces a mu_face (f_j - f_i)(log f_j - log f_i).
  double fisher_A(std::span<const double> f) const {
    const std::size_t n = nc_;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        const double fp = f[i * n + k], fq = f[(i + 1) * n + k];
        acc += dx_[i * n + k] * (fq - fp) * (std::log(fq) - std::log(fp));
      }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k + 1 < n; ++k) {
        const double fp = f[i * n + k], fq = f[i * n + k + 1];
        acc += dy_[i * (n - 1) + k] * (fq - fp) * (std::log(fq) - std::log(fp));
      }
    return acc;
  }

  /// Mean and covariance of the plane coordinates under f mu.
  std::pair<Eigen::Vector2d, Eigen::Matrix2d> moments(std::span<const double> f) const {
    Eigen::Vector2d m = Eigen::Vector2d::Zero();
    Eigen::Matrix2d s = Eigen::Matrix2d::Zero();
    const double w = opt_.h * opt_.h;
    for (std::size_t i = 0; i < nc_; ++i)
      for (std::size_t k = 0; k < nc_; ++k) m += f[i * nc_ + k] * mu_[i * nc_ + k] * w * Eigen::Vector2d(coord(i), coord(k));
    for (std::size_t i = 0; i < nc_; ++i)
      for (std::size_t k = 0; k < nc_; ++k) {
        const Eigen::Vector2d d = Eigen::Vector2d(coord(i), coord(k)) - m;
        s += f[i * nc_ + k] * mu_[i * nc_ + k] * w * d * d.transpose();
      }
    return {m, s};
  }

 private:
  static double log_mean(double a, double b) {
    const double r = b / a - 1.0;
    if (std::abs(r) < 1e-4) return a * (1.0 + r * (0.5 + r * (-1.0 / 12.0 + r / 24.0)));
    return (b - a) / std::log1p(r);
  }

  double edge(std::size_t i) const { return -opt_.radius + double(i) * opt_.h; }

  double raw_mu(double u, double v) const {
    double e = 0.0;
    for (int j = 0; j < 3; ++j) e += psi_.value(basis_(j, 0) * u + basis_(j, 1) * v);
    return std::exp(-e);
  }

  Potential psi_;
  FpOptions opt_;
  std::size_t nc_ = 0;
  double a_ = 0.0, beta_ = 0.0, norm_ = 1.0, dt_max_ = 0.0;
  Eigen::Matrix<double, 3, 2> basis_;
  Vector mu_, dx_, dy_, ux_, uy_;
};

struct EntropySeries {
  Vector times, entropy, fisher;
  double max_identity_residual = 0.0;  // max |dS/dt + I_A| at interior times
  bool monotone = true;                // S non-increasing at every step
};

/// Runs `steps` SSP-RK3 steps and records S and I_A; dS/dt is the centred
/// difference at interior steps.
inline EntropySeries fp_entropy_series(const FokkerPlanck3& fp, Vector f, double dt, std::size_t steps) {
  EntropySeries s;
  for (std::size_t k = 0; k <= steps; ++k) {
    s.times.push_back(double(k) * dt);
    s.entropy.push_back(fp.entropy(f));
    s.fisher.push_back(fp.fisher_A(f));
    if (k < steps) f = fp.step(f, dt);
  }
  for (std::size_t k = 1; k < s.entropy.size(); ++k) {
    if (s.entropy[k] > s.entropy[k - 1]) s.monotone = false;
    if (k + 1 < s.entropy.size()) {
      const double ds = (s.entropy[k + 1] - s.entropy[k - 1]) / (2.0 * dt);
      s.max_identity_residual = std::max(s.max_identity_residual, std::abs(ds + s.fisher[k]));
    }
  }
  return s;
}

// ---- Ornstein-Uhlenbeck moments -------------------------------------------------------

struct OuMoments {
  Vector mean;
  Eigen::MatrixXd cov;
  double time = 0.0;
};

/// Projector onto the mean-zero subspace.
inline Eigen::MatrixXd mean_zero_projector(std::size_t n) {
  const auto k = Eigen::Index(n);
  return Eigen::MatrixXd::Identity(k, k) - Eigen::MatrixXd::Constant(k, k, 1.0 / double(n));
}

/// e^{-(A+J)t} x.
inline Vector ou_propagator_apply(const CirculantOps& ops, std::span<const double> x, double t) {
  const std::size_t n = ops.size();
  return ops.apply_complex_multiplier(x, [&](std::size_t k) { return std::exp(-generator_eigenvalue(n, k) * t); });
}

/// Mean and covariance at time t of dX = -(A+J)X dt + sqrt(2A) dW:
///   m(t) = E m0,  Sigma(t) = E (Sigma0 - Pi) E^T + Pi,  E = e^{-(A+J)t},
/// exact because the identity on the mean-zero subspace is invariant.
inline OuMoments ou_propagate(const CirculantOps& ops, std::span<const double> m0, const Eigen::MatrixXd& s0, double t) {
  const std::size_t n = ops.size();
  require_dim(m0.size(), n, "ou_propagate");
  const auto k = Eigen::Index(n);
  if (s0.rows() != k || s0.cols() != k) throw DimensionError("ou_propagate: covariance shape");
  OuMoments out;
  out.time = t;
  out.mean = ou_propagator_apply(ops, m0, t);
  const Eigen::MatrixXd pi = mean_zero_projector(n);
  Eigen::MatrixXd d = s0 - pi;
  auto apply_cols = [&](const Eigen::MatrixXd& in) {
    Eigen::MatrixXd res(k, k);
    Vector col(n);
    for (Eigen::Index c = 0; c < k; ++c) {
      for (Eigen::Index r = 0; r < k; ++r) col[std::size_t(r)] = in(r, c);
      const Vector v = ou_propagator_apply(ops, col, t);
      for (Eigen::Index r = 0; r < k; ++r) res(r, c) = v[std::size_t(r)];
    }
    return res;
  };
  const Eigen::MatrixXd ed = apply_cols(d);                       // E D
  const Eigen::MatrixXd ede = apply_cols(ed.transpose().eval());  // E (E D)^T = E D E^T
  out.cov = ede + pi;
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

/// Theta(t) for a Gaussian law: (1/2n)[Tr(A^+ Sigma) + (m - NP^t eta)^T A^+ (m - NP^t eta)].
inline double ou_theta_exact(const CirculantOps& ops, const OuMoments& mom, std::span<const double> lifted_eta) {
  const std::size_t n = ops.size();
  require_dim(lifted_eta.size(), n, "ou_theta_exact");
  double trace = 0.0;
  Vector col(n);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t r = 0; r < n; ++r) col[r] = mom.cov(Eigen::Index(r), Eigen::Index(c));
    trace += ops.pinv_A(col)[c];
  }
  const Vector d = subtract(mom.mean, lifted_eta);
  const double quad = dot(ops.pinv_A(d), d);
  return 0.5 * (trace + quad) / double(n);
}

/// (1/2n) sum_{k != 0} 1 / (4 n^2 sin^2(pi k / n)): Theta of the stationary law around a flat profile.
inline double stationary_theta(std::size_t n) {
  double acc = 0.0;
  for (std::size_t k = 1; k < n; ++k) acc += 1.0 / laplacian_eigenvalue(n, k);
  return 0.5 * acc / double(n);
}

}  // namespace twoscale
