#pragma once

// Block averaging P: R^n -> R^m over blocks of k = n/m sites, the lift
// NP^t (each macroscopic value repeated k times), and the macroscopic
// operators Abar^{-1} = P A^{-1} N P^t and P A^{-1} J N P^t.
//
// Macroscopic vectors hold plain coordinates. The weighted product
// <y, z>_Y = (1/m) sum y_i z_i appears only in inner_Y / norm_Y_sq.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

#include <Eigen/Dense>

#include "twoscale/errors.hpp"
#include "twoscale/operators.hpp"
#include "twoscale/vector_ops.hpp"

namespace twoscale {

class BlockScheme {
 public:
  BlockScheme(std::size_t n, std::size_t m) : n_(n), m_(m), k_(m == 0 ? 0 : n / m) {
    if (m < 3) throw DomainError("BlockScheme: need at least 3 blocks, got " + std::to_string(m));
    if (n % m != 0) {
      throw DomainError("BlockScheme: " + std::to_string(m) + " blocks do not divide " + std::to_string(n) +
                        " sites");
    }
  }
  std::size_t sites() const { return n_; }
  std::size_t blocks() const { return m_; }
  std::size_t block_size() const { return k_; }
  LatticeDim dim() const { return LatticeDim(n_); }
  friend bool operator==(const BlockScheme&, const BlockScheme&) = default;

 private:
  std::size_t n_, m_, k_;
};

inline double inner_Y(std::span<const double> y, std::span<const double> z) {
  return dot(y, z) / double(y.size());
}
inline double norm_Y_sq(std::span<const double> y) { return inner_Y(y, y); }

inline Vector project_P(const BlockScheme& s, std::span<const double> x) {
  require_dim(x.size(), s.sites(), "project_P");
  const std::size_t k = s.block_size();
  Vector y(s.blocks(), 0.0);
  for (std::size_t b = 0; b < s.blocks(); ++b) {
    // shifted by the first entry so a constant block comes back bit-exact
    const double x0 = x[b * k];
    double acc = 0.0;
    for (std::size_t j = 1; j < k; ++j) acc += x[b * k + j] - x0;
    y[b] = x0 + acc / double(k);
  }
  return y;
}

inline Vector lift_NPt(const BlockScheme& s, std::span<const double> y) {
  require_dim(y.size(), s.blocks(), "lift_NPt");
  const std::size_t k = s.block_size();
  Vector x(s.sites());
  for (std::size_t b = 0; b < s.blocks(); ++b)
    for (std::size_t j = 0; j < k; ++j) x[b * k + j] = y[b];
  return x;
}

/// x - NP^t P x: zero average inside every block.
inline Vector fluctuation(const BlockScheme& s, std::span<const double> x) {
  const Vector avg = project_P(s, x);
  const std::size_t k = s.block_size();
  Vector out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= avg[i / k];
  return out;
}

/// Macroscopic operators for one scheme. Construction assembles the dense
/// m x m matrix of Abar^{-1} and factors it once; afterwards the object is
/// immutable and may be shared across threads.
class CoarseGraining {
 public:
  explicit CoarseGraining(const BlockScheme& scheme) : scheme_(scheme), ops_(scheme.dim()) {
    const std::size_t m = scheme.blocks();
    abar_inv_.resize(Eigen::Index(m), Eigen::Index(m));
    Vector e(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      e[j] = 1.0;
      // A^+ discards the constant part of the lifted basis vector, so every
      // column is mean-zero and constants lie in the kernel.
      const Vector col = project_P(scheme, ops_.pinv_A(lift_NPt(scheme, e)));
      for (std::size_t i = 0; i < m; ++i) abar_inv_(Eigen::Index(i), Eigen::Index(j)) = col[i];
      e[j] = 0.0;
    }
    abar_inv_ = 0.5 * (abar_inv_ + abar_inv_.transpose()).eval();
    // Adding the projector onto constants makes the matrix SPD on all of R^m
    // while leaving its action on mean-zero vectors unchanged.
    const Eigen::MatrixXd ones = Eigen::MatrixXd::Constant(Eigen::Index(m), Eigen::Index(m), 1.0 / double(m));
    llt_.compute(abar_inv_ + ones);
    if (llt_.info() != Eigen::Success) throw NumericalError("CoarseGraining: factorization of Abar^{-1} failed");
    abar_ = llt_.solve(Eigen::MatrixXd::Identity(Eigen::Index(m), Eigen::Index(m))) - ones;
    abar_ = 0.5 * (abar_ + abar_.transpose()).eval();
  }

  const BlockScheme& scheme() const { return scheme_; }
  const CirculantOps& ops() const { return ops_; }
  std::size_t blocks() const { return scheme_.blocks(); }

  /// Abar^{-1} y = P A^{-1} (N P^t y) for mean-zero y.
  Vector macro_Ainv(std::span<const double> y) const {
    require_dim(y.size(), blocks(), "macro_Ainv");
    require_mean_zero(y, "macro_Ainv");
    return project_P(scheme_, ops_.solve_A_inv(lift_NPt(scheme_, y)));
  }

  /// Abar y: the mean-zero z with macro_Ainv(z) = y.
  Vector macro_A(std::span<const double> y) const {
    require_dim(y.size(), blocks(), "macro_A");
    require_mean_zero(y, "macro_A");
    const Eigen::Map<const Eigen::VectorXd> v(y.data(), Eigen::Index(y.size()));
    Eigen::VectorXd z = llt_.solve(v);
    Vector out(z.data(), z.data() + z.size());
    return centered(out);
  }

  /// P A^{-1} J N P^t xi from the cumulative-sum identity
  ///   -P A^{-1} J N P^t xi = (1/m) cumsum(xi) - xi / (2m)   (up to a constant),
  /// taken mean-zero.
  Vector apply_PAinvJNPt(std::span<const double> xi) const {
    require_dim(xi.size(), blocks(), "apply_PAinvJNPt");
    require_mean_zero(xi, "apply_PAinvJNPt");
    return cumsum_form(xi);
  }

  /// Dense Abar^{-1} (constants in the kernel).
  const Eigen::MatrixXd& abar_inv_matrix() const { return abar_inv_; }
  /// Dense Abar (constants in the kernel).
  const Eigen::MatrixXd& abar_matrix() const { return abar_; }

  /// Dense matrix of P A^{-1} J N P^t composed with the mean-zero projector.
  Eigen::MatrixXd pajn_matrix() const {
    const std::size_t m = blocks();
    Eigen::MatrixXd t{Eigen::Index(m), Eigen::Index(m)};
    for (std::size_t j = 0; j < m; ++j) {
      Vector e(m, -1.0 / double(m));
      e[j] += 1.0;
      const Vector col = cumsum_form(e);
      for (std::size_t i = 0; i < m; ++i) t(Eigen::Index(i), Eigen::Index(j)) = col[i];
    }
    return t;
  }

 private:
  Vector cumsum_form(std::span<const double> xi) const {
    const double inv_m = 1.0 / double(blocks());
    Vector out(xi.size());
    double run = 0.0;
    for (std::size_t i = 0; i < xi.size(); ++i) {
      run += xi[i];
      out[i] = -inv_m * run + 0.5 * inv_m * xi[i];
    }
    return centered(out);
  }

  BlockScheme scheme_;
  CirculantOps ops_;
  Eigen::MatrixXd abar_inv_;
  Eigen::MatrixXd abar_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

/// Measured constant of assumption (vi):
///   gamma = m^2 sup_x |x - NP^tPx|^2 / <x, Ax>,
/// the top eigenvalue of F A^+ F (F the fluctuation projector) by power iteration.
inline double fluctuation_constant(const CoarseGraining& cg, std::size_t iterations = 400, std::uint64_t seed = 7) {
  const BlockScheme& s = cg.scheme();
  if (s.block_size() == 1) return 0.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector v(s.sites());
  for (double& x : v) x = normal(rng);
  v = fluctuation(s, v);
  double lambda = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    const double nv = norm2(v);
    for (double& x : v) x /= nv;
    Vector w = fluctuation(s, cg.ops().pinv_A(v));
    lambda = dot(w, v);
    v = std::move(w);
  }
  const double m = double(s.blocks());
  return m * m * lambda;
}

}  // namespace twoscale
