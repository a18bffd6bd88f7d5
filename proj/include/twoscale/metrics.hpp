#pragma once

// Yardsticks: the H^{-1} norm of step functions, Monte Carlo estimators of
// Theta and the hydrodynamic gap, the error functional E(T, M, N) and the
// Gaussian relative entropies.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "twoscale/coarse_grain.hpp"
#include "twoscale/errors.hpp"
#include "twoscale/operators.hpp"
#include "twoscale/vector_ops.hpp"

namespace twoscale {

/// ||w||^2_{H^{-1}} for the step function w(theta) = w_i on [i/n, (i+1)/n):
/// the integral of g^2 for the mean-zero primitive g, which is piecewise
/// linear, integrated exactly.
inline double h_minus1_sq(std::span<const double> w) {
  const std::size_t n = w.size();
  if (n == 0) return 0.0;
  require_mean_zero(w, "h_minus1_sq");
  const double h = 1.0 / double(n);
  const double drift = mean(w);  // rounding-level; removed so g closes up
  double g = 0.0, int_g = 0.0, int_g2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double g1 = g + h * (w[i] - drift);
    int_g += 0.5 * h * (g + g1);
    int_g2 += h / 3.0 * (g * g + g * g1 + g1 * g1);
    g = g1;
  }
  return std::max(0.0, int_g2 - int_g * int_g);
}

/// Repeats every value `factor` times (restriction of a step function to a finer mesh).
inline Vector refine_steps(std::span<const double> v, std::size_t factor) {
  Vector out(v.size() * factor);
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = 0; j < factor; ++j) out[i * factor + j] = v[i];
  return out;
}

/// ||a - b||^2_{H^{-1}} for step functions on meshes 1/size, compared on the
/// common refinement. The two must carry the same mass.
inline double h_minus1_dist_sq(std::span<const double> a, std::span<const double> b) {
  const std::size_t l = std::lcm(a.size(), b.size());
  const Vector ra = refine_steps(a, l / a.size()), rb = refine_steps(b, l / b.size());
  Vector d = subtract(ra, rb);
  if (std::abs(mean(d)) > 1e-8) {
    throw DomainError("h_minus1_dist_sq: profiles carry different mass (" + std::to_string(mean(d)) + ")");
  }
  return h_minus1_sq(centered(d));
}

struct Estimate {
  double value = 0.0;
  double stderr = 0.0;
};

/// Sample mean and its standard error.
inline Estimate mc_estimate(std::span<const double> samples) {
  Estimate e;
  const std::size_t r = samples.size();
  if (r == 0) return e;
  e.value = mean(samples);
  if (r > 1) {
    double acc = 0.0;
    for (double s : samples) acc += (s - e.value) * (s - e.value);
    e.stderr = std::sqrt(acc / double(r - 1) / double(r));
  }
  return e;
}

/// (1/2n) <A^{-1} d, d> with d = x - NP^t eta: one sample of the Theta estimator.
inline double theta_sample(const CoarseGraining& cg, std::span<const double> x, std::span<const double> eta) {
  const Vector d = subtract(x, lift_NPt(cg.scheme(), eta));
  return 0.5 * cg.ops().quad_form_Ainv(d);
}

inline Estimate theta_estimate(const CoarseGraining& cg, const std::vector<Vector>& states,
                               std::span<const double> eta) {
  Vector s;
  s.reserve(states.size());
  for (const auto& x : states) s.push_back(theta_sample(cg, x, eta));
  return mc_estimate(s);
}

/// ||xbar - zeta||^2_{H^{-1}} for one state; zeta is a step function on its own mesh.
inline double hydro_gap_sample(std::span<const double> x, std::span<const double> zeta) {
  return h_minus1_dist_sq(x, zeta);
}

inline Estimate hydro_gap(const std::vector<Vector>& states, std::span<const double> zeta) {
  Vector s;
  s.reserve(states.size());
  for (const auto& x : states) s.push_back(hydro_gap_sample(x, zeta));
  return mc_estimate(s);
}

/// |Px - eta|^2_Y for one state.
inline double macro_gap_sample(const BlockScheme& s, std::span<const double> x, std::span<const double> eta) {
  return norm_Y_sq(subtract(project_P(s, x), eta));
}

// ---- error functional ------------------------------------------------------

struct TheoremConstants {
  double c = 1.0;
  double lambda = 1.0, Lambda = 1.0;
  double tau = 1.0;
  double gamma = 1.0;
  double kappa = 0.0;
  double rho = 1.0;  // LSI constant of mu(dx|y); not computable here
  double alpha = 1.0;
  double C1 = 1.0;
  double T = 0.0;
  double M = 1.0, N = 1.0;
  double hbar0 = 0.0;      // Hbar(eta_0), relative to the constant profile
  double delta_hbar = 0.0; // Hbar(eta_0) - Hbar(eta_T)
  bool rho_assumed = true;
  bool C1_assumed = true;

  /// Gronwall constant of the macroscopic energy estimate: c Lambda^2 / lambda.
  double energy_constant() const { return c * Lambda * Lambda / lambda; }
};

/// rho_hat = (s - sqrt(s^2 - 4 rho lambda)) / 2 with s = rho + lambda + kappa^2/rho,
/// in the cancellation-free form 2 rho lambda / (s + sqrt(...)). The
/// discriminant is never negative.
inline double rho_hat(double rho, double lambda, double kappa) {
  if (!(rho > 0.0) || !(lambda > 0.0)) throw DomainError("rho_hat: rho and lambda must be positive");
  const double q = kappa * kappa / rho;
  const double s = rho + lambda + q;
  // s^2 - 4 rho lambda expanded so no subtraction of close numbers is left
  const double disc = (rho - lambda) * (rho - lambda) + 2.0 * q * (rho + lambda) + q * q;
  return 2.0 * rho * lambda / (s + std::sqrt(disc));
}

struct ErrorFunctional {
  double rho_hat = 0.0;
  std::vector<std::pair<std::string, double>> terms;
  double total = 0.0;
};

inline ErrorFunctional error_functional_E(const TheoremConstants& k) {
  const double vals[] = {k.c, k.lambda, k.Lambda, k.tau, k.gamma, k.rho, k.alpha, k.M, k.N};
  for (double v : vals)
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("error_functional_E: constants must be positive");
  if (k.T < 0.0 || k.C1 < 0.0 || k.kappa < 0.0 || k.hbar0 < 0.0) {
    throw DomainError("error_functional_E: T, C1, kappa, Hbar(eta_0) must be non-negative");
  }
  ErrorFunctional e;
  e.rho_hat = rho_hat(k.rho, k.lambda, k.kappa);
  const double a_term = k.alpha + 2.0 * k.C1 / e.rho_hat;
  const double k2 = k.kappa * k.kappa, r2 = k.rho * k.rho;
  const double sq_ct = std::sqrt(k.c / k.tau);
  const double pre = std::sqrt(2.0 * k.T * k.gamma) * std::sqrt(a_term) / k.M;
  const double cl = k.energy_constant();
  e.terms = {
      {"T*M/N", k.T * k.M / k.N},
      {"fluctuation/M", 4.0 * k.c * k.gamma * k.Lambda * k.Lambda * k.T / k.lambda * a_term / k.M},
      {"commutator/M^2", k.C1 *
                             (k.gamma * k2 / (2.0 * k.lambda * r2) + 2.0 * k.c * k.gamma * k2 / (k.tau * k.lambda * r2) +
                              4.0 * k.gamma * k.c / (k.lambda * k.tau)) /
                             (k.M * k.M)},
      {"cross:entropy", pre * (1.0 + sq_ct + std::sqrt(2.0 * k.c * k.gamma) / k.M) * std::sqrt(k.C1)},
      {"cross:energy", pre * std::sqrt(2.0) * (1.0 + sq_ct) * std::max(0.0, k.delta_hbar)},
      {"cross:gronwall", pre * cl * k.T * std::sqrt(1.0 + std::exp(cl * k.T) * k.hbar0)},
  };
  for (const auto& [name, v] : e.terms) e.total += v;
  return e;
}

struct BoundReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  // rhs - lhs
  double mc_stderr = 0.0;
  double sup_theta = 0.0;
  double gap_integral = 0.0;  // (lambda/8) * int gap dt
  bool holds = false;
};

/// Checks max(sup Theta, (lambda/8) int E|Px - eta|^2_Y dt) <= e^{8 c Lambda^2 T / lambda} (Theta(0) + E).
/// The time integral uses the trapezoid rule over `times`.
inline BoundReport theorem1_bound_check(std::span<const double> times, std::span<const Estimate> theta,
                                        std::span<const Estimate> gap, const TheoremConstants& k, double E) {
  require_dim(theta.size(), times.size(), "theorem1_bound_check theta");
  require_dim(gap.size(), times.size(), "theorem1_bound_check gap");
  BoundReport r;
  if (times.empty()) return r;
  double sup_err = 0.0;
  for (const auto& t : theta)
    if (t.value >= r.sup_theta) {
      r.sup_theta = t.value;
      sup_err = t.stderr;
    }
  double integral = 0.0, var = 0.0;
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double h = times[i] - times[i - 1];
    integral += 0.5 * h * (gap[i].value + gap[i - 1].value);
    var += 0.25 * h * h * (gap[i].stderr * gap[i].stderr + gap[i - 1].stderr * gap[i - 1].stderr);
  }
  r.gap_integral = k.lambda / 8.0 * integral;
  const double gap_err = k.lambda / 8.0 * std::sqrt(var);
  const bool theta_wins = r.sup_theta >= r.gap_integral;
  r.lhs = theta_wins ? r.sup_theta : r.gap_integral;
  r.mc_stderr = theta_wins ? sup_err : gap_err;
  r.rhs = std::exp(8.0 * k.c * k.Lambda * k.Lambda * k.T / k.lambda) * (theta.front().value + E);
  r.margin = r.rhs - r.lhs;
  r.holds = r.lhs <= r.rhs;
  return r;
}

inline nlohmann::json to_json(const BoundReport& r) {
  return {{"lhs", r.lhs}, {"rhs", r.rhs}, {"margin", r.margin}, {"mc_stderr", r.mc_stderr}};
}

// ---- Gaussian entropies ------------------------------------------------------

/// KL( N(m1, S1) || N(m2, S2) ) for laws on one hyperplane {mean x = const};
/// covariances act on the mean-zero subspace. Adding the projector onto
/// constants makes both full rank without changing the divergence.
inline double gaussian_relative_entropy(std::span<const double> m1, const Eigen::MatrixXd& s1,
                                        std::span<const double> m2, const Eigen::MatrixXd& s2) {
  const auto n = Eigen::Index(m1.size());
  require_dim(m2.size(), m1.size(), "gaussian_relative_entropy");
  if (s1.rows() != n || s1.cols() != n || s2.rows() != n || s2.cols() != n) {
    throw DimensionError("gaussian_relative_entropy: covariance shape");
  }
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Constant(n, n, 1.0 / double(n));
  const Eigen::LLT<Eigen::MatrixXd> l1(s1 + ones), l2(s2 + ones);
  if (l1.info() != Eigen::Success || l2.info() != Eigen::Success) {
    throw DomainError("gaussian_relative_entropy: covariance not positive definite on the mean-zero subspace");
  }
  const Vector d = centered(subtract(m1, m2));
  const Eigen::Map<const Eigen::VectorXd> dv(d.data(), n);
  const Eigen::MatrixXd lower1 = l1.matrixL(), lower2 = l2.matrixL();
  const auto tri2 = lower2.triangularView<Eigen::Lower>();
  const double trace = tri2.solve(lower1).squaredNorm();  // tr(S2^{-1} S1)
  const double quad = tri2.solve(dv).squaredNorm();
  double logdet1 = 0.0, logdet2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    logdet1 += 2.0 * std::log(lower1(i, i));
    logdet2 += 2.0 * std::log(lower2(i, i));
  }
  return std::max(0.0, 0.5 * (trace - double(n) + quad + logdet2 - logdet1));
}

/// |(1/n) KL(f_t || mu) - (int phi(zeta) - phi(int zeta))| in the Gaussian
/// model, where phi(m) = m^2/2 (matched constants) and mu = N(mean, Pi) on the
/// hyperplane of f_t. zeta is a step function on its own mesh.
inline double free_energy_gap_gaussian(std::span<const double> mean_t, const Eigen::MatrixXd& cov_t,
                                       std::span<const double> zeta) {
  const std::size_t n = mean_t.size();
  const Vector base(n, mean(mean_t));
  const Eigen::MatrixXd pi = Eigen::MatrixXd::Identity(Eigen::Index(n), Eigen::Index(n)) -
                             Eigen::MatrixXd::Constant(Eigen::Index(n), Eigen::Index(n), 1.0 / double(n));
  const double kl = gaussian_relative_entropy(mean_t, cov_t, base, pi);
  const Vector zc = centered(zeta);
  const double free = 0.5 * dot(zc, zc) / double(zeta.size());
  return std::abs(kl / double(n) - free);
}

// ---- fits --------------------------------------------------------------------

/// Least-squares slope of log(y) against log(x).
inline double fit_log_slope(std::span<const double> x, std::span<const double> y) {
  require_dim(y.size(), x.size(), "fit_log_slope");
  if (x.size() < 2) throw DomainError("fit_log_slope: need two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double k = double(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("fit_log_slope: non-positive data");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

}  // namespace twoscale
