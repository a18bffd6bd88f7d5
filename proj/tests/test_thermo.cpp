#include <gtest/gtest.h>

#include <numbers>

#include "oracles.hpp"
#include "twoscale/thermo.hpp"

namespace ts = twoscale;

namespace {

const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

// Tilted moments by the trapezoid rule on [-40, 40].
ts::TiltedMoments trapezoid_moments(const ts::Potential& psi, double s) {
  auto w = [&](double x) { return std::exp(s * x - psi.value(x) - 0.5 * s * s); };
  const double z = oracle::trapezoid(w, -40, 40, 160000);
  const double m1 = oracle::trapezoid([&](double x) { return x * w(x); }, -40, 40, 160000) / z;
  const double m2 = oracle::trapezoid([&](double x) { return x * x * w(x); }, -40, 40, 160000) / z;
  return {std::log(z) + 0.5 * s * s, m1, m2 - m1 * m1};
}

}  // namespace

TEST(Potential, RejectsNonConvexParameters) {
  EXPECT_THROW(ts::Potential(1.0, 1.0), ts::DomainError);
  EXPECT_THROW(ts::Potential(0.3, 2.0), ts::DomainError);
  EXPECT_THROW(ts::Potential(std::nan(""), 1.0), ts::DomainError);
  EXPECT_NO_THROW(ts::Potential(0.24, 2.0));
}

TEST(Potential, DerivativesMatchFiniteDifferences) {
  const ts::Potential p(0.3, 1.5);
  for (double x : {-2.0, -0.3, 0.0, 0.7, 3.1}) {
    const double h = 1e-5;
    EXPECT_NEAR(p.d1(x), (p.value(x + h) - p.value(x - h)) / (2 * h), 1e-8);
    EXPECT_NEAR(p.d2(x), (p.d1(x + h) - p.d1(x - h)) / (2 * h), 1e-8);
    EXPECT_NEAR(p.perturbation_d1(x), p.d1(x) - x, 1e-15);
    EXPECT_GE(p.d2(x), p.min_d2() - 1e-15);
    EXPECT_LE(p.d2(x), p.max_d2() + 1e-15);
  }
}

TEST(TiltedMoments, GaussianClosedForm) {
  const ts::Potential g = ts::Potential::gaussian();
  for (double s : {-3.0, 0.0, 0.4, 2.5}) {
    const ts::TiltedMoments t = ts::tilted_moments(g, s);
    EXPECT_NEAR(t.log_z, 0.5 * s * s + kLogSqrt2Pi, 1e-13);
    EXPECT_NEAR(t.mean, s, 1e-13);
    EXPECT_NEAR(t.var, 1.0, 1e-13);
  }
}

TEST(TiltedMoments, AnharmonicMatchesTrapezoid) {
  const ts::Potential p(0.1, 1.0);
  for (double s : {-1.5, 0.0, 0.8}) {
    const ts::TiltedMoments a = ts::tilted_moments(p, s), b = trapezoid_moments(p, s);
    EXPECT_NEAR(a.log_z, b.log_z, 1e-10);
    EXPECT_NEAR(a.mean, b.mean, 1e-10);
    EXPECT_NEAR(a.var, b.var, 1e-10);
  }
}

TEST(Cramer, GaussianIsQuadratic) {
  const ts::Potential g = ts::Potential::gaussian();
  for (double m : {-2.0, -0.5, 0.0, 1.3, 2.0}) {
    const ts::CramerPoint c = ts::cramer(g, m);
    EXPECT_NEAR(c.phi, 0.5 * m * m - kLogSqrt2Pi, 1e-12);
    EXPECT_NEAR(c.dphi, m, 1e-12);
    EXPECT_NEAR(c.d2phi, 1.0, 1e-12);
  }
}

TEST(Cramer, DualityAndDerivatives) {
  const ts::Potential p(0.1, 1.0);
  for (double m : {-1.7, -0.2, 0.0, 0.9, 2.2}) {
    const ts::CramerPoint c = ts::cramer(p, m);
    EXPECT_LE(c.residual, 1e-12);
    // phi(m) = sup_s [s m - log Z(s)]: the supremum is attained at c.sigma.
    for (double ds : {-1e-2, 1e-2}) {
      const double other = (c.sigma + ds) * m - ts::log_partition(p, c.sigma + ds);
      EXPECT_LT(other, c.phi);
    }
    const double h = 1e-4;
    const double fp = ts::cramer(p, m + h).phi, fm = ts::cramer(p, m - h).phi;
    EXPECT_NEAR(c.dphi, (fp - fm) / (2 * h), 1e-7);
    EXPECT_NEAR(c.d2phi, (fp - 2 * c.phi + fm) / (h * h), 1e-4);
    EXPECT_GT(c.d2phi, 0.0);
  }
}

TEST(TabulatedFunction, ReproducesCubics) {
  const double lo = -1.0, h = 0.125;
  ts::Vector f, df, d2f;
  for (int j = 0; j <= 16; ++j) {
    const double x = lo + h * j;
    f.push_back(x * x * x - 2 * x);
    df.push_back(3 * x * x - 2);
    d2f.push_back(6 * x);
  }
  const ts::TabulatedFunction t(lo, h, f, df, d2f);
  for (double x : {-1.0, -0.61, 0.0, 0.333, 1.0}) {
    EXPECT_NEAR(t.value(x), x * x * x - 2 * x, 1e-13);
    EXPECT_NEAR(t.first(x), 3 * x * x - 2, 1e-13);
    EXPECT_NEAR(t.second(x), 6 * x, 1e-12);
  }
  EXPECT_THROW(t.value(1.01), ts::DomainError);
  EXPECT_THROW(ts::TabulatedFunction(0, 0.1, {1.0}, {1.0}, {1.0}), ts::DimensionError);
}

TEST(TableGrid, MeshMustDivideInterval) {
  EXPECT_EQ((ts::TableGrid{2.5, 1.0 / 64}).intervals(), 320u);
  EXPECT_THROW((ts::TableGrid{1.0, 0.3}).intervals(), ts::DomainError);
}

TEST(CramerTable, AgreesWithPointwiseSolves) {
  const ts::Potential p(0.1, 1.0);
  const ts::CramerTable t = ts::build_cramer_table(p, {2.0, 1.0 / 16});
  EXPECT_LE(t.max_residual, 1e-12);
  for (double m : {-1.93, -0.41, 0.05, 1.27}) {
    const ts::CramerPoint c = ts::cramer(p, m);
    EXPECT_NEAR(t.phi.value(m), c.phi, 1e-8);
    EXPECT_NEAR(t.dphi(m), c.dphi, 1e-7);
    EXPECT_NEAR(t.d2phi(m), c.d2phi, 1e-4);
  }
}

TEST(PsiK, GaussianBlockFreeEnergyIsQuadratic) {
  for (std::size_t k : {1u, 4u, 16u}) {
    const ts::PsiKTable t = ts::build_psi_k(ts::Potential::gaussian(), k, {1.5, 1.0 / 32});
    for (double m : {-1.5, -0.7, 0.0, 0.25, 1.5}) {
      EXPECT_NEAR(t.d1(m), m, 1e-7) << "k = " << k;
      EXPECT_NEAR(t.d2(m), 1.0, 1e-6) << "k = " << k;
    }
    EXPECT_LE(t.max_mass_error, 1e-9);
  }
}

TEST(PsiK, PairConvolutionOracle) {
  // Block of two sites: the mean has density 2 int rho(x) rho(2m - x) dx.
  const ts::Potential p(0.1, 1.0);
  const ts::PsiKTable t = ts::build_psi_k(p, 2, {1.5, 1.0 / 32});
  auto log_density = [&](double m) {
    return std::log(oracle::trapezoid([&](double x) { return std::exp(-p.value(x) - p.value(2 * m - x)); }, m - 30, m + 30,
                                      24000));
  };
  const double h = 1e-3;
  for (double m : {-1.2, -0.3, 0.0, 0.8}) {
    const double l0 = log_density(m), lp = log_density(m + h), lm = log_density(m - h);
    EXPECT_NEAR(t.d1(m), -(lp - lm) / (2 * h) / 2.0, 1e-6);
    EXPECT_NEAR(t.d2(m), -(lp - 2 * l0 + lm) / (h * h) / 2.0, 1e-4);
  }
}

TEST(PsiK, SingleSiteEqualsPotential) {
  const ts::Potential p(0.1, 1.0);
  const ts::PsiKTable t = ts::build_psi_k(p, 1, {1.0, 1.0 / 32});
  for (double m : {-0.9, 0.0, 0.55}) {
    EXPECT_NEAR(t.d1(m), p.d1(m), 1e-7);
    EXPECT_NEAR(t.d2(m), p.d2(m), 1e-5);
  }
}

TEST(PsiK, ApproachesCramerTransform) {
  const ts::Potential p(0.1, 1.0);
  const ts::TableGrid g{1.0, 1.0 / 16};
  const ts::CramerTable c = ts::build_cramer_table(p, g);
  double prev = 1e300;
  for (std::size_t k : {4u, 16u}) {
    const ts::PsiKTable t = ts::build_psi_k(p, k, g);
    double e = 0.0;
    for (std::size_t j = 0; j < t.psi.nodes(); ++j) e = std::max(e, std::abs(t.psi.d2f()[j] - c.phi.d2f()[j]));
    EXPECT_LT(e, prev);
    prev = e;
  }
}

TEST(PsiK, JsonRoundTrip) {
  const ts::PsiKTable t = ts::build_psi_k(ts::Potential(0.05, 2.0), 3, {0.5, 1.0 / 8});
  const ts::PsiKTable u = ts::psi_k_from_json(nlohmann::json::parse(ts::to_json(t).dump()));
  EXPECT_EQ(u.k, t.k);
  EXPECT_EQ(u.potential, t.potential);
  EXPECT_EQ(u.psi.d2f(), t.psi.d2f());
  EXPECT_EQ(u.psi.f(), t.psi.f());
  nlohmann::json bad = ts::to_json(t);
  bad["version"] = 99;
  EXPECT_THROW(ts::psi_k_from_json(bad), ts::DomainError);

  const ts::CramerTable c = ts::build_cramer_table(ts::Potential(0.05, 2.0), {0.5, 1.0 / 8});
  EXPECT_EQ(ts::cramer_from_json(ts::to_json(c)).phi.df(), c.phi.df());
}

TEST(MacroGradient, MeanZeroAndRangeChecked) {
  const ts::PsiKTable t = ts::build_psi_k(ts::Potential(0.1, 1.0), 4, {1.0, 1.0 / 16});
  const ts::Vector y{0.3, -0.2, 0.5, 0.1};
  EXPECT_TRUE(ts::is_mean_zero(ts::macro_grad_H(y, t)));
  EXPECT_THROW(ts::macro_grad_H(ts::Vector{0.0, 1.5, 0.0}, t), ts::DomainError);
  EXPECT_GE(ts::hbar_relative(y, t), 0.0);
  EXPECT_NEAR(ts::hbar_relative(ts::Vector(4, 0.2), t), 0.0, 1e-15);
  const ts::ConvexityBounds b = ts::convexity_bounds(t);
  EXPECT_TRUE(b.convex());
  EXPECT_LE(b.lambda, b.Lambda);
}

TEST(MacroGradient, LocalGibbsWeightIsLinear) {
  const ts::PsiKTable t = ts::build_psi_k(ts::Potential::gaussian(), 2, {1.0, 1.0 / 16});
  const ts::BlockScheme s(6, 3);
  const ts::Vector eta{0.2, -0.1, 0.5}, x{1, 2, 3, 4, 5, 6};
  const ts::Vector g = ts::macro_grad_H(eta, t);
  EXPECT_NEAR(ts::local_gibbs_log_weight(s, x, eta, t), 3 * g[0] + 7 * g[1] + 11 * g[2], 1e-9);
}
