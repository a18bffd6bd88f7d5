#include <gtest/gtest.h>

#include <numbers>

#include "oracles.hpp"
#include "twoscale/fp_oracle.hpp"

namespace ts = twoscale;

TEST(Basis, OrthonormalAndMeanZero) {
  const auto q = ts::mean_zero_basis3();
  EXPECT_LT((q.transpose() * q - Eigen::Matrix2d::Identity()).norm(), 1e-15);
  EXPECT_LT((Eigen::RowVector3d::Ones() * q).norm(), 1e-15);
}

TEST(DenseAJ, MatchesIndexFormulas) {
  const auto [a, j] = ts::dense_AJ(7);
  EXPECT_EQ((a - oracle::laplacian(7)).norm(), 0.0);
  EXPECT_EQ((j - oracle::derivative(7)).norm(), 0.0);
}

namespace {
ts::FpOptions coarse(double s = 1.0) {
  ts::FpOptions o;
  o.radius = 6.0;
  o.h = 1.0 / 8.0;
  o.j_scale = s;
  return o;
}
}  // namespace

TEST(FokkerPlanck3, RestrictedOperators) {
  const ts::FokkerPlanck3 fp(ts::Potential::gaussian(), coarse());
  EXPECT_NEAR(fp.a_restricted(), 27.0, 1e-12);
  EXPECT_NEAR(std::abs(fp.beta()), 1.5 * std::sqrt(3.0), 1e-12);
  EXPECT_EQ(fp.cells_per_axis(), 96u);
  EXPECT_THROW(ts::FokkerPlanck3(ts::Potential::gaussian(), ts::FpOptions{6.0, 0.7, 1.0, 0.9}), ts::DomainError);
}

TEST(FokkerPlanck3, ConstantDensityIsStationary) {
  for (const ts::Potential& p : {ts::Potential::gaussian(), ts::Potential(0.1, 1.0)}) {
    const ts::FokkerPlanck3 fp(p, coarse());
    const ts::Vector one(fp.cells_per_axis() * fp.cells_per_axis(), 1.0);
    EXPECT_LT(ts::max_abs(fp.rate(one)), 1e-9);
    EXPECT_NEAR(fp.mass(one), 1.0, 1e-13);
  }
}

namespace {
ts::Vector bump(const ts::FokkerPlanck3& fp) {
  return fp.normalized(fp.sample([](double u, double v) { return std::exp(-(u - 0.8) * (u - 0.8) - 0.5 * v * v + 0.3 * u * v) + 0.05; }));
}
}  // namespace

TEST(FokkerPlanck3, MassConservedAndEntropyDecreases) {
  const ts::FokkerPlanck3 fp(ts::Potential(0.1, 1.0), coarse());
  ts::Vector f = bump(fp);
  const double m0 = fp.mass(f);
  double s_prev = fp.entropy(f);
  for (int k = 0; k < 50; ++k) {
    f = fp.step(f, fp.dt_max());
    const double s = fp.entropy(f);
    EXPECT_LE(s, s_prev);
    s_prev = s;
  }
  EXPECT_NEAR(fp.mass(f), m0, 1e-13);
  EXPECT_GT(fp.fisher_A(f), 0.0);
}

TEST(FokkerPlanck3, AntisymmetricPartIsEntropyNeutral) {
  const ts::FokkerPlanck3 with_j(ts::Potential::gaussian(), coarse(1.0)), without_j(ts::Potential::gaussian(), coarse(0.0));
  const ts::Vector f = bump(with_j);
  const ts::Vector rj = ts::subtract(with_j.rate(f), without_j.rate(f));
  EXPECT_GT(ts::max_abs(rj), 1e-3);
  double ds = 0.0, scale = 0.0;
  const ts::Vector& mu = with_j.mu();
  for (std::size_t c = 0; c < f.size(); ++c) {
    ds += (std::log(f[c]) + 1.0) * rj[c] * mu[c];
    scale += std::abs(std::log(f[c]) * rj[c] * mu[c]);
  }
  EXPECT_LT(std::abs(ds), 1e-12 * scale);
}

TEST(FokkerPlanck3, StepGuards) {
  const ts::FokkerPlanck3 fp(ts::Potential::gaussian(), coarse());
  const ts::Vector f = bump(fp);
  EXPECT_THROW(fp.step(f, 1.5 * fp.dt_max()), ts::DomainError);
  EXPECT_THROW(fp.rate(ts::Vector(3, 1.0)), ts::DimensionError);
}

TEST(FokkerPlanck3, MomentsOfShiftedGaussian) {
  const ts::FokkerPlanck3 fp(ts::Potential::gaussian(), coarse());
  const ts::Vector f = fp.normalized(fp.sample([](double u, double v) {
    return std::exp(-((u - 0.6) * (u - 0.6) + (v + 0.3) * (v + 0.3)) / 1.4 + 0.5 * (u * u + v * v));
  }));
  const auto [m, s] = fp.moments(f);
  EXPECT_NEAR(m(0), 0.6, 1e-3);
  EXPECT_NEAR(m(1), -0.3, 1e-3);
  EXPECT_NEAR(s(0, 0), 0.7, 5e-3);
  EXPECT_NEAR(s(0, 1), 0.0, 1e-3);
}

TEST(EntropySeries, IdentityResidualShrinksWithMesh) {
  double prev = 1e300;
  for (double h : {1.0 / 8, 1.0 / 16}) {
    ts::FpOptions o = coarse();
    o.h = h;
    const ts::FokkerPlanck3 fp(ts::Potential::gaussian(), o);
    const ts::EntropySeries es = ts::fp_entropy_series(fp, bump(fp), fp.dt_max(), 20);
    EXPECT_TRUE(es.monotone);
    EXPECT_LT(es.max_identity_residual, prev);
    prev = es.max_identity_residual;
  }
}

TEST(OuPropagate, MatchesDenseMatrixExponential) {
  const long n = 9;
  const ts::CirculantOps ops{ts::LatticeDim(std::size_t(n))};
  std::mt19937_64 rng(4);
  const ts::Vector m0 = oracle::gaussian_vector(std::size_t(n), rng);
  Eigen::MatrixXd b(n, n);
  for (long i = 0; i < n; ++i) b.col(i) = oracle::to_eigen(oracle::gaussian_vector(std::size_t(n), rng));
  const Eigen::MatrixXd pi = oracle::centering(n);
  const Eigen::MatrixXd s0 = 0.3 * pi * b * b.transpose() * pi;
  const double t = 0.003;
  const Eigen::MatrixXd l = oracle::laplacian(n) + oracle::derivative(n);
  const Eigen::MatrixXd e = (-l * t).exp();
  // Lyapunov: Sigma(t) = E Sigma0 E^T + int_0^t e^{-Ls} 2A e^{-L^T s} ds.
  const Eigen::MatrixXd noise = oracle::trapezoid_matrix(
      [&](double s) -> Eigen::MatrixXd {
        const Eigen::MatrixXd es = (-l * s).exp();
        return es * 2.0 * oracle::laplacian(n) * es.transpose();
      },
      0.0, t, 2000);
  const Eigen::MatrixXd want = e * s0 * e.transpose() + noise;
  const ts::OuMoments mom = ts::ou_propagate(ops, m0, s0, t);
  EXPECT_LT((oracle::to_eigen(mom.mean) - e * oracle::to_eigen(m0)).norm(), 1e-12);
  EXPECT_LT((mom.cov - want).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(OuPropagate, StationaryLawIsInvariant) {
  const ts::CirculantOps ops{ts::LatticeDim(16)};
  const ts::OuMoments mom = ts::ou_propagate(ops, ts::Vector(16, 0.0), ts::mean_zero_projector(16), 0.37);
  EXPECT_LT((mom.cov - ts::mean_zero_projector(16)).cwiseAbs().maxCoeff(), 1e-13);
  const double theta = ts::ou_theta_exact(ops, mom, ts::Vector(16, 0.0));
  EXPECT_NEAR(theta, ts::stationary_theta(16), 1e-15);
  EXPECT_NEAR(ts::stationary_theta(16), oracle::pinv_sym(oracle::laplacian(16)).trace() / 32.0, 1e-14);
}
