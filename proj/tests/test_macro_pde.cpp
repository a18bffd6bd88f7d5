#include <gtest/gtest.h>

#include <numbers>

#include "oracles.hpp"
#include "twoscale/macro_pde.hpp"

namespace ts = twoscale;

namespace {

const ts::PsiKTable& anharmonic_table() {
  static const ts::PsiKTable t = ts::build_psi_k(ts::Potential(0.1, 1.0), 4, {1.5, 1.0 / 32});
  return t;
}

const ts::PsiKTable& gaussian_table() {
  static const ts::PsiKTable t = ts::build_psi_k(ts::Potential::gaussian(), 4, {1.5, 1.0 / 32});
  return t;
}

ts::Vector cosine(std::size_t m, double amp) {
  ts::Vector v(m);
  for (std::size_t i = 0; i < m; ++i) v[i] = amp * std::cos(2.0 * std::numbers::pi * (double(i) + 0.5) / double(m));
  return v;
}

}  // namespace

TEST(MacroRhs, ConservesMassAndJacobianMatchesDifferences) {
  const ts::CoarseGraining cg(ts::BlockScheme(32, 8));
  ts::Vector eta = cosine(8, 0.6);
  eta[2] += 0.1;
  const ts::Vector f = ts::macro_rhs(cg, eta, anharmonic_table());
  EXPECT_TRUE(ts::is_mean_zero(f));
  const Eigen::MatrixXd jac = ts::macro_jacobian(cg, eta, anharmonic_table());
  const double h = 1e-6;
  for (std::size_t j = 0; j < 8; ++j) {
    ts::Vector ep = eta, em = eta;
    ep[j] += h;
    em[j] -= h;
    const ts::Vector d = ts::subtract(ts::macro_rhs(cg, ep, anharmonic_table()), ts::macro_rhs(cg, em, anharmonic_table()));
    for (std::size_t i = 0; i < 8; ++i)
      EXPECT_NEAR(jac(Eigen::Index(i), Eigen::Index(j)), d[i] / (2 * h), 1e-4 * jac.cwiseAbs().maxCoeff());
  }
}

TEST(IntegrateMacro, GaussianMatchesMatrixExponential) {
  // psi_K' is the identity, so the flow is linear: eta(t) = exp(t L) eta0.
  const long m = 8;
  const ts::CoarseGraining cg(ts::BlockScheme(64, std::size_t(m)));
  const ts::Vector eta0 = cosine(std::size_t(m), 0.5);
  const Eigen::MatrixXd l = -cg.abar_matrix() * (Eigen::MatrixXd::Identity(m, m) + cg.pajn_matrix()) * oracle::centering(m);
  const ts::Vector times{0.0, 0.01, 0.05};
  const ts::MacroTrajectory tr = ts::integrate_macro(cg, eta0, times, gaussian_table());
  for (std::size_t i = 0; i < times.size(); ++i) {
    const Eigen::VectorXd want = (l * times[i]).exp() * oracle::to_eigen(eta0);
    EXPECT_LT((oracle::to_eigen(tr.profiles[i]) - want).cwiseAbs().maxCoeff(), 1e-6) << "t = " << times[i];
  }
  EXPECT_LE(tr.max_mean_drift, 1e-13);
}

TEST(IntegrateMacro, FreeEnergyDecreases) {
  const ts::CoarseGraining cg(ts::BlockScheme(64, 16));
  ts::Vector times;
  for (int i = 0; i <= 20; ++i) times.push_back(0.005 * i);
  const ts::MacroTrajectory tr = ts::integrate_macro(cg, cosine(16, 0.8), times, anharmonic_table());
  for (std::size_t i = 1; i < tr.hbar.size(); ++i) EXPECT_LE(tr.hbar[i], tr.hbar[i - 1] + 1e-12);
  EXPECT_TRUE(tr.energy_bound_holds);
  EXPECT_GT(tr.accepted, 0u);
}

TEST(IntegrateMacro, RejectsUnsortedTimes) {
  const ts::CoarseGraining cg(ts::BlockScheme(16, 4));
  EXPECT_THROW(ts::integrate_macro(cg, ts::Vector(4, 0.0), ts::Vector{0.1, 0.05}, gaussian_table()), ts::DomainError);
  EXPECT_THROW(ts::integrate_macro(cg, ts::Vector(3, 0.0), ts::Vector{0.1}, gaussian_table()), ts::DimensionError);
}

TEST(FourierProfile, CellAveragesMatchQuadrature) {
  const ts::FourierProfile p{0.2, {{0.5, -0.3}, {0.0, 0.25}}};
  const std::size_t m = 7;
  const ts::Vector avg = p.cell_averages(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double a = double(j) / double(m), b = double(j + 1) / double(m);
    const double want = oracle::trapezoid([&](double x) { return p.value(x); }, a, b, 4000) * double(m);
    EXPECT_NEAR(avg[j], want, 1e-8);
  }
}

TEST(GaussianExactPde, IsTravellingDecayingWave) {
  const ts::FourierProfile z0{0.0, {{1.0, 0.0}}};
  const double t = 0.013;
  const ts::FourierProfile zt = ts::gaussian_exact_pde(z0, t, 1.0);
  for (double th : {0.0, 0.21, 0.77}) {
    const double want = std::exp(-4 * std::numbers::pi * std::numbers::pi * t) * std::cos(2 * std::numbers::pi * (th + t));
    EXPECT_NEAR(zt.value(th), want, 1e-14);
  }
}

TEST(SolvePde, ConstantIsSteadyAndMassIsConserved) {
  EXPECT_EQ(ts::max_abs(ts::pde_rhs(ts::Vector(16, 0.3), ts::Flux{})), 0.0);
  const ts::CramerTable c = ts::build_cramer_table(ts::Potential(0.1, 1.0), {1.5, 1.0 / 32});
  const ts::Vector z0 = cosine(64, 0.7);
  const ts::PdeGridSolution s = ts::solve_pde(z0, ts::Vector{0.0, 0.02, 0.05}, ts::Flux{&c});
  EXPECT_LE(s.max_mass_drift, 1e-13);
  EXPECT_LT(ts::max_abs(s.profiles.back()), ts::max_abs(z0));
}

TEST(SolvePde, ConvergesToExactSolution) {
  // dt follows mesh^2, so halving the mesh should cut the error by about 4.
  const ts::FourierProfile z0{0.0, {{1.0, 0.0}}};
  for (double adv : {1.0, -1.0}) {
    ts::Vector errs;
    for (std::size_t m : {32u, 64u, 128u}) {
      ts::PdeOptions opt;
      opt.adv = adv;
      const ts::PdeGridSolution s = ts::solve_pde(z0.nodes(m), ts::Vector{0.02}, ts::Flux{}, opt);
      const ts::Vector d = ts::subtract(s.profiles.back(), ts::gaussian_exact_pde(z0, 0.02, adv).nodes(m));
      errs.push_back(ts::max_abs(d));
    }
    for (std::size_t i = 1; i < errs.size(); ++i)
      EXPECT_GE(std::log2(errs[i - 1] / errs[i]), 1.9) << "adv " << adv << " level " << i;
    EXPECT_LT(errs.back(), 1e-3);
  }
}

TEST(SolvePde, OutOfTableAborts) {
  const ts::CramerTable c = ts::build_cramer_table(ts::Potential(0.1, 1.0), {0.5, 1.0 / 16});
  EXPECT_THROW(ts::solve_pde(cosine(16, 1.0), ts::Vector{0.01}, ts::Flux{&c}), ts::DomainError);
}

TEST(Contraction, TwoSolutionsApproachEachOther) {
  const ts::CramerTable c = ts::build_cramer_table(ts::Potential(0.1, 1.0), {1.5, 1.0 / 32});
  const ts::Flux flux{&c};
  ts::Vector a = cosine(64, 0.6), b = cosine(64, 0.3);
  for (std::size_t j = 0; j < 64; ++j) b[j] += 0.2 * std::sin(4 * std::numbers::pi * (double(j) + 0.5) / 64.0);
  const ts::Vector times{0.0, 0.01, 0.02, 0.04};
  const ts::ContractionReport r = ts::pde_uniqueness_contraction(ts::solve_pde(a, times, flux), ts::solve_pde(b, times, flux), flux);
  EXPECT_TRUE(r.holds);
  EXPECT_GE(r.C, 1.0);
  EXPECT_LT(r.F.back(), r.F.front());
}
