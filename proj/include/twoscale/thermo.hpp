#pragma once

// Single-site thermodynamics: the potential psi(x) = x^2/2 + a cos(bx), its
// tilted partition function, the Cramer transform
//   phi(m) = sup_s { s m - log int exp(s x - psi(x)) dx },
// the block free energy psi_K, and the coarse-grained Hamiltonian gradient.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "json.hpp"
#include "twoscale/coarse_grain.hpp"
#include "twoscale/errors.hpp"
#include "twoscale/fft.hpp"
#include "twoscale/vector_ops.hpp"

namespace twoscale {

/// psi(x) = x^2/2 + a cos(bx). |a| b^2 < 1 keeps psi'' > 0 everywhere.
class Potential {
 public:
  Potential() = default;
  Potential(double a, double b) : a_(a), b_(b) {
    if (!std::isfinite(a) || !std::isfinite(b)) throw DomainError("Potential: non-finite parameters");
    if (std::abs(a) * b * b >= 1.0) {
      throw DomainError("Potential: |a| b^2 must be < 1 for a convex single-site potential");
    }
  }

  static Potential gaussian() { return {}; }

  double a() const { return a_; }
  double b() const { return b_; }
  bool is_gaussian() const { return a_ == 0.0; }

  double value(double x) const { return 0.5 * x * x + a_ * std::cos(b_ * x); }
  double d1(double x) const { return x - a_ * b_ * std::sin(b_ * x); }
  double d2(double x) const { return 1.0 - a_ * b_ * b_ * std::cos(b_ * x); }
  /// delta psi' alone, the bounded part of the drift.
  double perturbation_d1(double x) const { return -a_ * b_ * std::sin(b_ * x); }

  double sup_delta() const { return std::abs(a_); }
  double sup_delta_d1() const { return std::abs(a_ * b_); }
  double sup_delta_d2() const { return std::abs(a_ * b_ * b_); }
  double max_d2() const { return 1.0 + sup_delta_d2(); }
  double min_d2() const { return 1.0 - sup_delta_d2(); }

  friend bool operator==(const Potential&, const Potential&) = default;

 private:
  double a_ = 0.0;
  double b_ = 1.0;
};

/// Moments of the tilted single-site law exp(s x - psi(x)) / Z(s).
struct TiltedMoments {
  double log_z = 0.0;
  double mean = 0.0;
  double var = 0.0;
};

namespace detail {
inline constexpr double kTiltWindow = 13.0;  // tail mass below 1e-30 of the bulk
inline constexpr double kQuadTol = 1e-14;
}  // namespace detail

/// Adaptive Gauss-Kronrod evaluation of the tilted moments. The window is
/// centred on the tilt, where the integrand concentrates.
inline TiltedMoments tilted_moments(const Potential& psi, double sigma) {
  using Quad = boost::math::quadrature::gauss_kronrod<double, 61>;
  const double shift = 0.5 * sigma * sigma;
  const double lo = sigma - detail::kTiltWindow, hi = sigma + detail::kTiltWindow;
  auto weight = [&](double x) { return std::exp(sigma * x - psi.value(x) - shift); };
  double err = 0.0;
  const double i0 = Quad::integrate(weight, lo, hi, 15, detail::kQuadTol, &err);
  const double i1 = Quad::integrate([&](double x) { return (x - sigma) * weight(x); }, lo, hi, 15,
                                    detail::kQuadTol, &err);
  const double i2 = Quad::integrate([&](double x) { return (x - sigma) * (x - sigma) * weight(x); }, lo, hi,
                                    15, detail::kQuadTol, &err);
  if (!(i0 > 0.0) || !std::isfinite(i0) || !std::isfinite(i1) || !std::isfinite(i2)) {
    throw NumericalError("tilted_moments: quadrature failed at sigma = " + std::to_string(sigma));
  }
  TiltedMoments t;
  t.log_z = std::log(i0) + shift;
  const double c1 = i1 / i0;
  t.mean = sigma + c1;
  t.var = i2 / i0 - c1 * c1;
  return t;
}

/// log int exp(sigma x - psi(x)) dx.
inline double log_partition(const Potential& psi, double sigma) { return tilted_moments(psi, sigma).log_z; }

struct CramerPoint {
  double m = 0.0;
  double sigma = 0.0;  // phi'(m), the tilt with tilted mean m
  double phi = 0.0;
  double dphi = 0.0;
  double d2phi = 0.0;  // 1 / Var under the tilt
  double var = 0.0;
  double log_z = 0.0;
  double residual = 0.0;  // |tilted_mean(sigma) - m|
};

/// Solves tilted_mean(sigma) = m by Newton's method with a bisection
/// safeguard and returns phi, phi', phi'' at m.
inline CramerPoint cramer(const Potential& psi, double m, double sigma_guess = std::numeric_limits<double>::quiet_NaN()) {
  if (!std::isfinite(m)) throw DomainError("cramer: non-finite m");
  double sigma = std::isfinite(sigma_guess) ? sigma_guess : m;
  TiltedMoments t = tilted_moments(psi, sigma);

  // Bracket the root; the tilted mean is increasing in sigma.
  double lo = sigma, hi = sigma;
  double step = 1.0;
  if (t.mean < m) {
    while (tilted_moments(psi, hi).mean < m) {
      lo = hi;
      hi += step;
      step *= 2.0;
      if (step > 1e6) throw NumericalError("cramer: cannot bracket tilt for m = " + std::to_string(m));
    }
  } else {
    while (tilted_moments(psi, lo).mean > m) {
      hi = lo;
      lo -= step;
      step *= 2.0;
      if (step > 1e6) throw NumericalError("cramer: cannot bracket tilt for m = " + std::to_string(m));
    }
  }

  const double tol = 1e-13 * std::max(1.0, std::abs(m));
  for (int it = 0; it < 200; ++it) {
    const double g = t.mean - m;
    if (std::abs(g) <= tol) {
      CramerPoint p;
      p.m = m;
      p.sigma = sigma;
      p.log_z = t.log_z;
      p.phi = sigma * m - t.log_z;
      p.dphi = sigma;
      p.var = t.var;
      p.d2phi = 1.0 / t.var;
      p.residual = std::abs(g);
      return p;
    }
    if (g < 0.0) lo = std::max(lo, sigma);
    else hi = std::min(hi, sigma);
    double next = sigma - g / t.var;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo < 1e-15 * std::max(1.0, std::abs(sigma))) next = 0.5 * (lo + hi);
    sigma = next;
    t = tilted_moments(psi, sigma);
  }
  throw NumericalError("cramer: Newton/bisection did not converge for m = " + std::to_string(m));
}

/// Uniform-grid table of f, f', f'' with piecewise cubic Hermite evaluation.
class TabulatedFunction {
 public:
  TabulatedFunction() = default;
  TabulatedFunction(double lo, double h, Vector f, Vector df, Vector d2f)
      : lo_(lo), h_(h), f_(std::move(f)), df_(std::move(df)), d2f_(std::move(d2f)) {
    if (f_.size() < 2 || df_.size() != f_.size() || d2f_.size() != f_.size() || !(h_ > 0.0)) {
      throw DimensionError("TabulatedFunction: inconsistent table");
    }
  }

  double lo() const { return lo_; }
  double hi() const { return lo_ + h_ * double(f_.size() - 1); }
  double step() const { return h_; }
  std::size_t nodes() const { return f_.size(); }
  double node(std::size_t j) const { return lo_ + h_ * double(j); }
  const Vector& f() const { return f_; }
  const Vector& df() const { return df_; }
  const Vector& d2f() const { return d2f_; }

  bool contains(double x) const {
    const double slack = 1e-12 * std::max(1.0, std::abs(x));
    return x >= lo_ - slack && x <= hi() + slack;
  }

  double value(double x) const { return hermite(x, f_, df_); }
  double first(double x) const { return hermite(x, df_, d2f_); }
  double second(double x) const {
    const auto [j, t] = locate(x);
    const double s0 = slope(d2f_, j), s1 = slope(d2f_, j + 1);
    return blend(t, d2f_[j], s0, d2f_[j + 1], s1);
  }

  double min_second() const { return *std::min_element(d2f_.begin(), d2f_.end()); }
  double max_second() const { return *std::max_element(d2f_.begin(), d2f_.end()); }

 private:
  std::pair<std::size_t, double> locate(double x) const {
    if (!contains(x)) {
      throw DomainError("TabulatedFunction: " + std::to_string(x) + " outside [" + std::to_string(lo_) + ", " +
                        std::to_string(hi()) + "]");
    }
    const double u = std::clamp((x - lo_) / h_, 0.0, double(f_.size() - 1));
    std::size_t j = std::min<std::size_t>(std::size_t(u), f_.size() - 2);
    return {j, u - double(j)};
  }

  double blend(double t, double y0, double s0, double y1, double s1) const {
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h_ * s0 + (-2 * t3 + 3 * t2) * y1 +
           (t3 - t2) * h_ * s1;
  }

  double hermite(double x, const Vector& y, const Vector& dy) const {
    const auto [j, t] = locate(x);
    return blend(t, y[j], dy[j], y[j + 1], dy[j + 1]);
  }

  double slope(const Vector& y, std::size_t j) const {
    const std::size_t last = y.size() - 1;
    if (j == 0) return (y[1] - y[0]) / h_;
    if (j == last) return (y[last] - y[last - 1]) / h_;
    return (y[j + 1] - y[j - 1]) / (2 * h_);
  }

  double lo_ = 0.0, h_ = 1.0;
  Vector f_, df_, d2f_;
};

/// Working interval [-m_max, m_max] with mesh h.
struct TableGrid {
  double m_max = 2.5;
  double h = 1.0 / 64.0;

  std::size_t intervals() const {
    const double r = 2.0 * m_max / h;
    const auto n = std::size_t(std::llround(r));
    if (n < 2 || std::abs(r - double(n)) > 1e-9 * r) throw DomainError("TableGrid: h must divide 2 m_max");
    return n;
  }
};

/// phi, phi', phi'' tabulated on the working interval.
struct CramerTable {
  Potential potential;
  TableGrid grid;
  TabulatedFunction phi;
  double max_residual = 0.0;

  double dphi(double m) const { return phi.first(m); }
  double d2phi(double m) const { return phi.second(m); }
};

inline CramerTable build_cramer_table(const Potential& psi, TableGrid grid = {}) {
  const std::size_t n = grid.intervals() + 1;
  Vector f(n), df(n), d2f(n);
  CramerTable t{psi, grid, {}, 0.0};
  double guess = -grid.m_max;
  for (std::size_t j = 0; j < n; ++j) {
    const double m = -grid.m_max + grid.h * double(j);
    const CramerPoint p = cramer(psi, m, guess);
    guess = p.sigma;
    f[j] = p.phi;
    df[j] = p.dphi;
    d2f[j] = p.d2phi;
    t.max_residual = std::max(t.max_residual, p.residual);
  }
  t.phi = TabulatedFunction(-grid.m_max, grid.h, std::move(f), std::move(df), std::move(d2f));
  return t;
}

/// psi_K and its derivatives. psi_K is fixed only up to an additive constant;
/// only differences and derivatives are meaningful.
struct PsiKTable {
  Potential potential;
  std::size_t k = 1;
  TableGrid grid;
  TabulatedFunction psi;
  double conv_mesh = 1.0 / 64.0;  // mesh of the convolution grid actually used
  double max_mass_error = 0.0;

  double d1(double m) const { return psi.first(m); }
  double d2(double m) const { return psi.second(m); }
  double value(double m) const { return psi.value(m); }
};

namespace detail {

inline std::size_t next_pow2(std::size_t v) {
  std::size_t p = 1;
  while (p < v) p <<= 1;
  return p;
}

/// log of the k-fold self-convolution of the tilted density q(u), u = x - m,
/// evaluated at u = 0 (the density of the block mean at m, up to the factor
/// exp(-k (phi(m) - ...))). The k-th power is taken in Fourier space.
inline double log_tilted_convolution_at_mean(const Potential& psi, const CramerPoint& p, std::size_t k,
                                             double& mesh, double& mass_error) {
  const double sd = std::sqrt(p.var);
  for (int refine = 0; refine < 4; ++refine, mesh *= 0.5) {
    const double half_width = 14.0 * sd * (std::sqrt(double(k)) + 1.0);
    const std::size_t len = next_pow2(std::size_t(std::ceil(2.0 * half_width / mesh)));
    std::vector<double> q(len);
    double mass = 0.0;
    for (std::size_t l = 0; l < len; ++l) {
      const double u = (l < len / 2 ? double(l) : double(l) - double(len)) * mesh;
      const double x = p.m + u;
      q[l] = std::exp(p.sigma * x - psi.value(x) - p.log_z);
      mass += q[l];
    }
    mass *= mesh;
    const double err = std::abs(mass - 1.0);
    // A k-fold convolution amplifies a relative mass defect k times.
    if (err * double(k) > 1e-10) continue;
    mass_error = std::max(mass_error, std::abs(std::pow(mass, double(k)) - 1.0));

    const auto fft = real_fft(len);
    std::vector<std::complex<double>> spec(fft->bins());
    fft->forward(q, spec);
    // Renormalize so the zero mode is exactly one; each power then has unit mass.
    const std::complex<double> q0 = spec[0];
    std::complex<double> acc = 0.0;
    for (std::size_t j = 0; j < spec.size(); ++j) {
      const std::complex<double> z = std::pow(spec[j] / q0, double(k));
      const bool paired = j != 0 && !(len % 2 == 0 && j == len / 2);
      acc += paired ? 2.0 * std::complex<double>(z.real(), 0.0) : z;
    }
    const double value = acc.real() / (double(len) * mesh);
    if (!(value > 0.0)) throw NumericalError("build_psi_k: non-positive convolved density");
    return std::log(value);
  }
  throw NumericalError("build_psi_k: convolution grid under-resolved (mass loss above 1e-10)");
}

}  // namespace detail

/// Builds psi_K on the working interval. For each node m the single-site law
/// is exponentially tilted to have mean m; the block-mean density at m then
/// factorizes as exp(-k phi(m)) times the k-fold convolution of the tilted
/// density at its own mean, which is evaluated by FFT on a grid with mesh
/// `conv_mesh`. Derivatives of the convolution term come from fourth-order
/// central differences over the node grid.
inline PsiKTable build_psi_k(const Potential& psi, std::size_t k, TableGrid grid = {}, double conv_mesh = 1.0 / 64.0) {
  if (k == 0) throw DomainError("build_psi_k: block size must be positive");
  const std::size_t n = grid.intervals() + 1;
  const std::size_t pad = 2;
  const std::size_t total = n + 2 * pad;

  std::vector<CramerPoint> pts(total);
  Vector ell(total);
  double guess = -grid.m_max - double(pad) * grid.h;
  double mesh_used = conv_mesh, mass_error = 0.0;
  for (std::size_t j = 0; j < total; ++j) {
    const double m = -grid.m_max + grid.h * (double(j) - double(pad));
    pts[j] = cramer(psi, m, guess);
    guess = pts[j].sigma;
    if (k == 1) {
      ell[j] = pts[j].sigma * m - psi.value(m) - pts[j].log_z;
    } else {
      double mesh = conv_mesh;
      ell[j] = detail::log_tilted_convolution_at_mean(psi, pts[j], k, mesh, mass_error);
      mesh_used = std::min(mesh_used, mesh);
    }
  }

  const double h = grid.h, kk = double(k);
  Vector f(n), df(n), d2f(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + pad;
    const double l1 = (-ell[j + 2] + 8 * ell[j + 1] - 8 * ell[j - 1] + ell[j - 2]) / (12 * h);
    const double l2 = (-ell[j + 2] + 16 * ell[j + 1] - 30 * ell[j] + 16 * ell[j - 1] - ell[j - 2]) / (12 * h * h);
    f[i] = pts[j].phi - ell[j] / kk;
    df[i] = pts[j].dphi - l1 / kk;
    d2f[i] = pts[j].d2phi - l2 / kk;
  }
  PsiKTable t;
  t.potential = psi;
  t.k = k;
  t.grid = grid;
  t.conv_mesh = mesh_used;
  t.max_mass_error = mass_error;
  t.psi = TabulatedFunction(-grid.m_max, h, std::move(f), std::move(df), std::move(d2f));
  return t;
}

/// Y-gradient of Hbar(y) = (1/M) sum psi_K(y_i): psi_K'(y_i), projected mean-zero.
inline Vector macro_grad_H(std::span<const double> y, const PsiKTable& table) {
  Vector g(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!table.psi.contains(y[i])) {
      throw DomainError("macro_grad_H: component " + std::to_string(i) + " = " + std::to_string(y[i]) +
                        " leaves the psi_K table");
    }
    g[i] = table.d1(y[i]);
  }
  return centered(g);
}

/// Hbar relative to the constant profile with the same mean:
///   (1/M) sum [psi_K(y_i) - psi_K(ybar) - psi_K'(ybar)(y_i - ybar)] >= 0.
/// On Y_{M,m} this differs from Hbar by a constant.
inline double hbar_relative(std::span<const double> y, const PsiKTable& table) {
  const double ybar = mean(y);
  const double p0 = table.value(ybar), d0 = table.d1(ybar);
  double acc = 0.0;
  for (double v : y) acc += table.value(v) - p0 - d0 * (v - ybar);
  return acc / double(y.size());
}

/// NP^t grad Hbar(eta) . x: log-density of the local Gibbs state relative to mu.
inline double local_gibbs_log_weight(const BlockScheme& s, std::span<const double> x, std::span<const double> eta,
                                     const PsiKTable& table) {
  require_dim(x.size(), s.sites(), "local_gibbs_log_weight");
  require_dim(eta.size(), s.blocks(), "local_gibbs_log_weight");
  return dot(lift_NPt(s, macro_grad_H(eta, table)), x);
}

struct ConvexityBounds {
  double lambda = 0.0;  // min psi_K''
  double Lambda = 0.0;  // max psi_K''
  bool convex() const { return lambda > 0.0; }
};

inline ConvexityBounds convexity_bounds(const PsiKTable& table) {
  return {table.psi.min_second(), table.psi.max_second()};
}

inline ConvexityBounds convexity_bounds(const CramerTable& table) {
  return {table.phi.min_second(), table.phi.max_second()};
}

// ---- serialization -------------------------------------------------------

inline constexpr int kTableFormatVersion = 1;

inline nlohmann::json to_json(const TabulatedFunction& t) {
  return {{"lo", t.lo()}, {"h", t.step()}, {"f", t.f()}, {"df", t.df()}, {"d2f", t.d2f()}};
}

inline TabulatedFunction tabulated_from_json(const nlohmann::json& j) {
  return {j.at("lo").get<double>(), j.at("h").get<double>(), j.at("f").get<Vector>(), j.at("df").get<Vector>(),
          j.at("d2f").get<Vector>()};
}

inline nlohmann::json to_json(const PsiKTable& t) {
  return {{"format", "twoscale.psi_k"},
          {"version", kTableFormatVersion},
          {"potential", {{"a", t.potential.a()}, {"b", t.potential.b()}}},
          {"k", t.k},
          {"grid", {{"m_max", t.grid.m_max}, {"h", t.grid.h}}},
          {"conv_mesh", t.conv_mesh},
          {"max_mass_error", t.max_mass_error},
          {"table", to_json(t.psi)}};
}

inline PsiKTable psi_k_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "twoscale.psi_k" || j.value("version", 0) != kTableFormatVersion) {
    throw DomainError("psi_k_from_json: unsupported table format");
  }
  PsiKTable t;
  t.potential = Potential(j.at("potential").at("a").get<double>(), j.at("potential").at("b").get<double>());
  t.k = j.at("k").get<std::size_t>();
  t.grid = {j.at("grid").at("m_max").get<double>(), j.at("grid").at("h").get<double>()};
  t.conv_mesh = j.at("conv_mesh").get<double>();
  t.max_mass_error = j.at("max_mass_error").get<double>();
  t.psi = tabulated_from_json(j.at("table"));
  return t;
}

inline nlohmann::json to_json(const CramerTable& t) {
  return {{"format", "twoscale.cramer"},
          {"version", kTableFormatVersion},
          {"potential", {{"a", t.potential.a()}, {"b", t.potential.b()}}},
          {"grid", {{"m_max", t.grid.m_max}, {"h", t.grid.h}}},
          {"max_residual", t.max_residual},
          {"table", to_json(t.phi)}};
}

inline CramerTable cramer_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "twoscale.cramer" || j.value("version", 0) != kTableFormatVersion) {
    throw DomainError("cramer_from_json: unsupported table format");
  }
  CramerTable t;
  t.potential = Potential(j.at("potential").at("a").get<double>(), j.at("potential").at("b").get<double>());
  t.grid = {j.at("grid").at("m_max").get<double>(), j.at("grid").at("h").get<double>()};
  t.max_residual = j.at("max_residual").get<double>();
  t.phi = tabulated_from_json(j.at("table"));
  return t;
}

}  // namespace twoscale
