#pragma once

// Reference implementations for the tests. Dense matrices are built from
// index formulas, never from the library stencils; integrals use plain
// composite rules on fine grids.

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace oracle {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline Eigen::Index wrap(long i, long n) { return Eigen::Index(((i % n) + n) % n); }

inline Mat laplacian(long n) {
  Mat a = Mat::Zero(n, n);
  const double s = double(n) * double(n);
  for (long i = 0; i < n; ++i) {
    a(i, i) += 2.0 * s;
    a(i, wrap(i + 1, n)) -= s;
    a(i, wrap(i - 1, n)) -= s;
  }
  return a;
}

inline Mat derivative(long n) {
  Mat j = Mat::Zero(n, n);
  for (long i = 0; i < n; ++i) {
    j(i, wrap(i + 1, n)) += 0.5 * double(n);
    j(i, wrap(i - 1, n)) -= 0.5 * double(n);
  }
  return j;
}

inline Mat forward_difference(long n) {
  Mat d = Mat::Zero(n, n);
  for (long i = 0; i < n; ++i) {
    d(i, i) += double(n);
    d(i, wrap(i + 1, n)) -= double(n);
  }
  return d;
}

/// Moore-Penrose inverse through the symmetric eigendecomposition.
inline Mat pinv_sym(const Mat& a, double rel_cut = 1e-10) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  const Vec ev = es.eigenvalues();
  const double cut = rel_cut * ev.cwiseAbs().maxCoeff();
  Vec inv(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) inv(i) = std::abs(ev(i)) > cut ? 1.0 / ev(i) : 0.0;
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

/// n x m block averaging matrix P (rows: blocks).
inline Mat projection(long n, long m) {
  const long k = n / m;
  Mat p = Mat::Zero(m, n);
  for (long b = 0; b < m; ++b)
    for (long j = 0; j < k; ++j) p(b, b * k + j) = 1.0 / double(k);
  return p;
}

/// The lift N P^t.
inline Mat lift(long n, long m) { return double(n) / double(m) * projection(n, m).transpose(); }

inline Mat centering(long n) { return Mat::Identity(n, n) - Mat::Constant(n, n, 1.0 / double(n)); }

inline Vec to_eigen(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), Eigen::Index(v.size())); }
inline std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

inline std::vector<double> gaussian_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

inline std::vector<double> mean_zero_vector(std::size_t n, std::mt19937_64& rng) {
  auto v = gaussian_vector(n, rng);
  double s = 0.0;
  for (double x : v) s += x;
  for (double& x : v) x -= s / double(n);
  return v;
}

/// Composite trapezoid rule with `cells` equal cells.
inline double trapezoid(const std::function<double(double)>& f, double a, double b, std::size_t cells) {
  const double h = (b - a) / double(cells);
  double acc = 0.5 * (f(a) + f(b));
  for (std::size_t i = 1; i < cells; ++i) acc += f(a + h * double(i));
  return acc * h;
}

inline Mat trapezoid_matrix(const std::function<Mat(double)>& f, double a, double b, std::size_t cells) {
  const double h = (b - a) / double(cells);
  Mat acc = 0.5 * (f(a) + f(b));
  for (std::size_t i = 1; i < cells; ++i) acc += f(a + h * double(i));
  return acc * h;
}

/// Squared H^{-1}(T) norm of a mean-zero function given on a fine uniform
/// grid of cell values: mean-zero primitive by cumulative sums, then the
/// average of its square.
inline double h_minus1_sq_fine(const std::vector<double>& w) {
  const std::size_t n = w.size();
  const double h = 1.0 / double(n);
  std::vector<double> g(n);
  double run = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    run += h * w[i];
    g[i] = run - 0.5 * h * w[i];  // value at the cell midpoint
  }
  double mg = 0.0;
  for (double v : g) mg += v / double(n);
  double acc = 0.0;
  for (double v : g) acc += (v - mg) * (v - mg) / double(n);
  return acc;
}

}  // namespace oracle
