#pragma once

// Macroscopic dynamics:
//   eta' = -Abar (I + P A^{-1} J N P^t) grad Hbar(eta)     (coarse-grained ODE)
//   zeta_t = (phi'(zeta))_thth + adv * (phi'(zeta))_th     (limiting PDE)
// With the drift -(A+J) grad H of the lattice, the microscopic mean profile
// is transported by zeta_t = ... - (phi'(zeta))_th, i.e. adv = -1; the
// default adv = +1 follows the textbook form of the limiting equation.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "twoscale/coarse_grain.hpp"
#include "twoscale/errors.hpp"
#include "twoscale/fft.hpp"
#include "twoscale/metrics.hpp"
#include "twoscale/thermo.hpp"
#include "twoscale/vector_ops.hpp"

namespace twoscale {

// ---- macroscopic ODE ---------------------------------------------------------

inline Vector macro_rhs(const CoarseGraining& cg, std::span<const double> eta, const PsiKTable& table) {
  const Vector w = macro_grad_H(eta, table);
  const Vector tw = cg.apply_PAinvJNPt(w);
  Vector u(w.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = w[i] + tw[i];
  Vector out = cg.macro_A(centered(u));
  for (double& v : out) v = -v;
  return out;
}

/// Dense Jacobian of macro_rhs: -Abar (I + T) Pi diag(psi_K''(eta)).
inline Eigen::MatrixXd macro_jacobian(const CoarseGraining& cg, std::span<const double> eta, const PsiKTable& table) {
  const auto m = Eigen::Index(eta.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) d(i, i) = table.d2(eta[std::size_t(i)]);
  const Eigen::MatrixXd pi = Eigen::MatrixXd::Identity(m, m) - Eigen::MatrixXd::Constant(m, m, 1.0 / double(m));
  const Eigen::MatrixXd t = cg.pajn_matrix();
  return -cg.abar_matrix() * (Eigen::MatrixXd::Identity(m, m) + t) * pi * d;
}

struct MacroOptions {
  double rtol = 1e-8;
  double atol = 1e-12;
  double h0 = 0.0;  // initial step; 0 picks one from the rhs size
  std::size_t max_steps = 1000000;
};

struct MacroTrajectory {
  Vector times;
  std::vector<Vector> profiles;
  std::size_t accepted = 0, rejected = 0;
  double max_mean_drift = 0.0;
  // A posteriori energy estimate Hbar_rel(t) <= e^{Ct}(Hbar_rel(0) + 1), C = c Lambda^2/lambda.
  Vector hbar;
  double energy_constant = 0.0;
  bool energy_bound_holds = true;
};

/// Rosenbrock (2,3) integration with the coefficients of Shampine and
/// Reichelt's ode23s, local error control on max_i |err_i| / (atol + rtol |y_i|).
/// Steps are clipped to land on every output time.
inline MacroTrajectory integrate_macro(const CoarseGraining& cg, std::span<const double> eta0, std::span<const double> times,
                                       const PsiKTable& table, MacroOptions opt = {}, double c = 1.0) {
  require_dim(eta0.size(), cg.blocks(), "integrate_macro");
  if (!std::is_sorted(times.begin(), times.end()) || (!times.empty() && times.front() < 0.0)) {
    throw DomainError("integrate_macro: output times must be sorted and non-negative");
  }
  const std::size_t m = cg.blocks();
  const double d = 1.0 / (2.0 + std::sqrt(2.0)), e32 = 6.0 + std::sqrt(2.0);
  const ConvexityBounds cb = convexity_bounds(table);

  MacroTrajectory tr;
  tr.energy_constant = cb.lambda > 0.0 ? c * cb.Lambda * cb.Lambda / cb.lambda : std::numeric_limits<double>::infinity();
  Vector y(eta0.begin(), eta0.end());
  const double m0 = mean(y);
  const double h_rel0 = hbar_relative(y, table);
  double t = 0.0;
  Vector f0 = macro_rhs(cg, y, table);
  double h = opt.h0 > 0.0 ? opt.h0 : std::min(1e-3, 0.1 / std::max(1.0, max_abs(f0) / std::max(1e-3, max_abs(y))));

  auto record = [&](double at) {
    tr.times.push_back(at);
    tr.profiles.push_back(y);
    tr.max_mean_drift = std::max(tr.max_mean_drift, std::abs(mean(y) - m0));
    const double hr = hbar_relative(y, table);
    tr.hbar.push_back(hr);
    if (hr > std::exp(tr.energy_constant * at) * (h_rel0 + 1.0)) tr.energy_bound_holds = false;
  };

  const auto mi = Eigen::Index(m);
  auto as_eigen = [](const Vector& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size())); };

  for (double target : times) {
    while (t < target) {
      if (tr.accepted + tr.rejected > opt.max_steps) throw NumericalError("integrate_macro: step budget exhausted");
      const bool last = t + h >= target * (1.0 - 1e-14);
      const double hs = last ? target - t : h;
      if (hs < 1e-14 * std::max(1.0, t)) {
        std::string dump;
        for (std::size_t i = 0; i < std::min<std::size_t>(m, 8); ++i) dump += " " + std::to_string(y[i]);
        throw NumericalError("integrate_macro: step size underflow at t = " + std::to_string(t) + "; eta[0..]:" + dump);
      }
      const Eigen::MatrixXd jac = macro_jacobian(cg, y, table);
      const Eigen::PartialPivLU<Eigen::MatrixXd> w(Eigen::MatrixXd::Identity(mi, mi) - hs * d * jac);
      const Eigen::VectorXd F0 = as_eigen(f0);
      const Eigen::VectorXd k1 = w.solve(F0);
      Vector y1(m);
      for (std::size_t i = 0; i < m; ++i) y1[i] = y[i] + 0.5 * hs * k1(Eigen::Index(i));
      Eigen::VectorXd F1, k2, F2, k3;
      Vector ynew(m), f2;
      bool in_range = true;
      try {
        F1 = as_eigen(macro_rhs(cg, y1, table));
        k2 = w.solve(F1 - k1) + k1;
        for (std::size_t i = 0; i < m; ++i) ynew[i] = y[i] + hs * k2(Eigen::Index(i));
        f2 = macro_rhs(cg, ynew, table);
        F2 = as_eigen(f2);
      } catch (const DomainError&) {
        // A trial stage left the table; retry with a smaller step. A genuine
        // blow-up ends in step size underflow.
        in_range = false;
      }
      double err = std::numeric_limits<double>::infinity();
      if (in_range) {
        k3 = w.solve(F2 - e32 * (k2 - F1) - 2.0 * (k1 - F0));
        err = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const auto ii = Eigen::Index(i);
          const double e = hs / 6.0 * std::abs(k1(ii) - 2.0 * k2(ii) + k3(ii));
          const double scale = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
          err = std::max(err, e / scale);
        }
      }
      if (err <= 1.0) {
        t = last ? target : t + hs;
        y = ynew;
        f0 = f2;
        ++tr.accepted;
        if (!last) h = hs * std::min(5.0, std::max(0.2, 0.8 * std::pow(std::max(err, 1e-12), -1.0 / 3.0)));
      } else {
        ++tr.rejected;
        h = hs * (std::isfinite(err) ? std::max(0.1, 0.8 * std::pow(err, -1.0 / 3.0)) : 0.25);
      }
    }
    record(target);
  }
  return tr;
}

// ---- limiting PDE --------------------------------------------------------------

/// Flux phi' of the limiting equation: the identity (Gaussian model) or a Cramer table.
struct Flux {
  const CramerTable* table = nullptr;

  double d1(double z) const { return table != nullptr ? table->dphi(z) : z; }
  double max_d2() const { return table != nullptr ? table->phi.max_second() : 1.0; }
  double min_d2() const { return table != nullptr ? table->phi.min_second() : 1.0; }
  double max_abs_d2_dev() const { return std::max(std::abs(max_d2() - 1.0), std::abs(min_d2() - 1.0)); }
};

/// D2 u + adv D1 u with u = phi'(zeta) on the periodic mesh 1/m (nodes at cell centres).
inline Vector pde_rhs(std::span<const double> zeta, const Flux& flux, double adv = 1.0) {
  const std::size_t m = zeta.size();
  if (m < 3) throw DimensionError("pde_rhs: need at least 3 nodes");
  Vector u(m), out(m);
  for (std::size_t j = 0; j < m; ++j) {
    if (flux.table != nullptr && !flux.table->phi.contains(zeta[j])) {
      throw DomainError("pde_rhs: zeta = " + std::to_string(zeta[j]) + " leaves the Cramer table");
    }
    u[j] = flux.d1(zeta[j]);
  }
  const double mm = double(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double up = u[j + 1 == m ? 0 : j + 1], um = u[j == 0 ? m - 1 : j - 1];
    out[j] = mm * mm * (up - 2.0 * u[j] + um) + adv * 0.5 * mm * (up - um);
  }
  return out;
}

struct PdeOptions {
  double adv = 1.0;
  double dt = 0.0;  // 0 selects 0.25 mesh^2 / max phi''
};

struct PdeGridSolution {
  std::size_t m = 0;
  double dt = 0.0;
  Vector times;
  std::vector<Vector> profiles;
  double max_mass_drift = 0.0;  // max |(1/m) sum zeta(t) - (1/m) sum zeta(0)|
};

/// Method of lines with semi-implicit Euler: the diffusion is split as
/// kappa D2 zeta (implicit, kappa = max phi'') plus D2 (u - kappa zeta) and the
/// advection (explicit). The implicit solve is diagonal in Fourier space and
/// leaves the zero mode, hence the mass, untouched.
inline PdeGridSolution solve_pde(std::span<const double> zeta0, std::span<const double> times, const Flux& flux,
                                 PdeOptions opt = {}) {
  const std::size_t m = zeta0.size();
  if (m < 3) throw DimensionError("solve_pde: need at least 3 nodes");
  if (!std::is_sorted(times.begin(), times.end())) throw DomainError("solve_pde: output times must be sorted");
  const double mesh = 1.0 / double(m);
  const double kappa = flux.max_d2();
  const double dt = opt.dt > 0.0 ? opt.dt : 0.25 * mesh * mesh / kappa;
  const auto fft = real_fft(m);
  const std::size_t bins = fft->bins();

  PdeGridSolution sol;
  sol.m = m;
  sol.dt = dt;
  Vector z(zeta0.begin(), zeta0.end());
  const double mass0 = mean(z);
  std::vector<std::complex<double>> spec(bins), zspec(bins);
  auto factor = [&](double h) {
    Vector f(bins);
    for (std::size_t k = 0; k < bins; ++k) {
      const double s = std::sin(std::numbers::pi * double(k) / double(m));
      f[k] = 1.0 / (1.0 + h * kappa * 4.0 * double(m) * double(m) * s * s);
    }
    return f;
  };
  const Vector full = factor(dt);

  auto advance = [&](double h, const Vector& inv) {
    Vector r = pde_rhs(z, flux, opt.adv);
    // Remove the implicit part from the explicit remainder: D2(u - kappa z).
    const double mm = double(m);
    for (std::size_t j = 0; j < m; ++j) {
      const double zp = z[j + 1 == m ? 0 : j + 1], zm = z[j == 0 ? m - 1 : j - 1];
      r[j] -= kappa * mm * mm * (zp - 2.0 * z[j] + zm);
    }
    Vector rhs(m);
    for (std::size_t j = 0; j < m; ++j) rhs[j] = z[j] + h * r[j];
    fft->forward(z, zspec);
    fft->forward(rhs, spec);
    for (std::size_t k = 0; k < bins; ++k) spec[k] *= inv[k] / double(m);
    spec[0] = zspec[0] / double(m);
    fft->inverse(spec, z);
    if (!all_finite(z)) throw NumericalError("solve_pde: non-finite state (instability)");
  };

  double t = 0.0;
  for (double target : times) {
    const double len = target - t;
    if (len > 0.0) {
      const auto steps = std::size_t(std::ceil(len / dt - 1e-9));
      const double h = len / double(steps);
      const Vector inv = std::abs(h - dt) <= 1e-15 * dt ? full : factor(h);
      for (std::size_t s = 0; s < steps; ++s) advance(h, inv);
      t = target;
    }
    sol.times.push_back(target);
    sol.profiles.push_back(z);
    sol.max_mass_drift = std::max(sol.max_mass_drift, std::abs(mean(z) - mass0));
  }
  return sol;
}

/// zeta(theta) = mean + sum_k Re(c_k e^{2 pi i k theta}), k >= 1.
struct FourierProfile {
  double mean = 0.0;
  std::vector<std::complex<double>> coeffs;  // coeffs[k-1] is the mode k coefficient

  double value(double theta) const {
    double v = mean;
    for (std::size_t k = 1; k <= coeffs.size(); ++k)
      v += (coeffs[k - 1] * std::exp(std::complex<double>(0.0, 2.0 * std::numbers::pi * double(k) * theta))).real();
    return v;
  }

  /// Values at the cell centres (j + 1/2)/m.
  Vector nodes(std::size_t m) const {
    Vector out(m);
    for (std::size_t j = 0; j < m; ++j) out[j] = value((double(j) + 0.5) / double(m));
    return out;
  }

  /// Exact averages over the cells [j/m, (j+1)/m).
  Vector cell_averages(std::size_t m) const {
    Vector out(m, mean);
    for (std::size_t k = 1; k <= coeffs.size(); ++k) {
      const double w = 2.0 * std::numbers::pi * double(k);
      for (std::size_t j = 0; j < m; ++j) {
        const double a = double(j) / double(m), b = double(j + 1) / double(m);
        // (1/h) int_a^b e^{i w theta} dtheta
        const std::complex<double> avg =
            (std::exp(std::complex<double>(0.0, w * b)) - std::exp(std::complex<double>(0.0, w * a))) /
            std::complex<double>(0.0, w * (b - a));
        out[j] += (coeffs[k - 1] * avg).real();
      }
    }
    return out;
  }
};

/// Exact solution of zeta_t = zeta_thth + adv zeta_th: mode k is multiplied by
/// exp((-4 pi^2 k^2 + 2 pi i k adv) t).
inline FourierProfile gaussian_exact_pde(const FourierProfile& zeta0, double t, double adv = 1.0) {
  FourierProfile out = zeta0;
  for (std::size_t k = 1; k <= out.coeffs.size(); ++k) {
    const double w = 2.0 * std::numbers::pi * double(k);
    out.coeffs[k - 1] *= std::exp(std::complex<double>(-w * w * t, w * adv * t));
  }
  return out;
}

struct ContractionReport {
  Vector times;
  Vector F;      // (1/2) ||zeta1 - zeta2||^2_{H^{-1}}
  Vector bound;  // F(0) e^{C t}
  double C = 0.0;
  bool holds = true;
};

/// Monitors F(t) = (1/2) ||zeta1(t) - zeta2(t)||^2_{H^{-1}} against F(0) e^{Ct}
/// with C = sup phi'' / inf phi''.
inline ContractionReport pde_uniqueness_contraction(const PdeGridSolution& s1, const PdeGridSolution& s2,
                                                    const Flux& flux) {
  if (s1.m != s2.m || s1.times != s2.times) throw DimensionError("pde_uniqueness_contraction: grids differ");
  ContractionReport r;
  r.C = flux.max_d2() / flux.min_d2();
  r.times = s1.times;
  for (std::size_t i = 0; i < s1.times.size(); ++i) {
    r.F.push_back(0.5 * h_minus1_dist_sq(s1.profiles[i], s2.profiles[i]));
  }
  const double t0 = r.times.empty() ? 0.0 : r.times.front();
  for (std::size_t i = 0; i < r.F.size(); ++i) {
    r.bound.push_back(r.F.front() * std::exp(r.C * (r.times[i] - t0)));
    // Relative slack for rounding in the H^{-1} evaluation.
    if (r.F[i] > r.bound[i] * (1.0 + 1e-9) + 1e-300) r.holds = false;
  }
  return r;
}

}  // namespace twoscale
