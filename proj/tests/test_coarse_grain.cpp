#include <gtest/gtest.h>

#include "oracles.hpp"
#include "twoscale/coarse_grain.hpp"

namespace ts = twoscale;

TEST(BlockScheme, RejectsBadShapes) {
  EXPECT_THROW(ts::BlockScheme(12, 2), ts::DomainError);
  EXPECT_THROW(ts::BlockScheme(10, 4), ts::DomainError);
  EXPECT_THROW(ts::BlockScheme(12, 0), ts::DomainError);
  const ts::BlockScheme s(12, 4);
  EXPECT_EQ(s.block_size(), 3u);
}

TEST(BlockScheme, ProjectionAndLiftMatchDense) {
  std::mt19937_64 rng(1);
  const ts::BlockScheme s(24, 6);
  const ts::Vector x = oracle::gaussian_vector(24, rng), y = oracle::gaussian_vector(6, rng);
  EXPECT_LT((oracle::to_eigen(ts::project_P(s, x)) - oracle::projection(24, 6) * oracle::to_eigen(x)).norm(), 1e-14);
  EXPECT_EQ((oracle::to_eigen(ts::lift_NPt(s, y)) - oracle::lift(24, 6) * oracle::to_eigen(y)).norm(), 0.0);
}

TEST(BlockScheme, ProjectionOfLiftIsIdentity) {
  std::mt19937_64 rng(2);
  for (auto [n, m] : {std::pair{9u, 3u}, {64u, 8u}, {512u, 32u}}) {
    const ts::BlockScheme s(n, m);
    const ts::Vector y = oracle::gaussian_vector(m, rng);
    EXPECT_EQ(ts::project_P(s, ts::lift_NPt(s, y)), y);
  }
}

TEST(BlockScheme, FluctuationHasZeroBlockMeans) {
  std::mt19937_64 rng(3);
  const ts::BlockScheme s(40, 5);
  const ts::Vector f = ts::fluctuation(s, oracle::gaussian_vector(40, rng));
  for (double v : ts::project_P(s, f)) EXPECT_NEAR(v, 0.0, 1e-15);
}

class CoarseGrainingDense : public ::testing::TestWithParam<std::pair<std::size_t, std::size_t>> {};

TEST_P(CoarseGrainingDense, MacroInverseMatchesComposition) {
  const auto [n, m] = GetParam();
  const ts::CoarseGraining cg(ts::BlockScheme(n, m));
  const long ln = long(n), lm = long(m);
  const Eigen::MatrixXd pinv = oracle::pinv_sym(oracle::laplacian(ln));
  const Eigen::MatrixXd abar_inv = oracle::projection(ln, lm) * pinv * oracle::lift(ln, lm);
  EXPECT_LT((cg.abar_inv_matrix() - abar_inv).norm(), 1e-12 * abar_inv.norm());

  std::mt19937_64 rng(n);
  for (int t = 0; t < 5; ++t) {
    const ts::Vector y = oracle::mean_zero_vector(m, rng);
    const Eigen::VectorXd want = abar_inv * oracle::to_eigen(y);
    EXPECT_LT((oracle::to_eigen(cg.macro_Ainv(y)) - want).norm(), 1e-12 * want.norm());
    const ts::Vector back = cg.macro_Ainv(cg.macro_A(y));
    EXPECT_LT(ts::max_abs(ts::subtract(back, y)), 1e-10 * ts::max_abs(y));
  }
}

TEST_P(CoarseGrainingDense, ClosedFormMatchesComposition) {
  const auto [n, m] = GetParam();
  const ts::CoarseGraining cg(ts::BlockScheme(n, m));
  const long ln = long(n), lm = long(m);
  const Eigen::MatrixXd t = oracle::projection(ln, lm) * oracle::pinv_sym(oracle::laplacian(ln)) *
                            oracle::derivative(ln) * oracle::lift(ln, lm);
  std::mt19937_64 rng(n + 1);
  for (int r = 0; r < 10; ++r) {
    const ts::Vector xi = oracle::mean_zero_vector(m, rng);
    const Eigen::VectorXd want = t * oracle::to_eigen(xi);
    EXPECT_LT((oracle::to_eigen(cg.apply_PAinvJNPt(xi)) - want).norm(), 1e-10 * want.norm());
  }
  EXPECT_LT((cg.pajn_matrix() - t * oracle::centering(lm)).norm(), 1e-10 * t.norm());
}

TEST_P(CoarseGrainingDense, MacroMatricesAreCirculantAndCommute) {
  const auto [n, m] = GetParam();
  const ts::CoarseGraining cg(ts::BlockScheme(n, m));
  const Eigen::MatrixXd a = cg.abar_matrix(), t = cg.pajn_matrix();
  EXPECT_LT((a - a.transpose()).norm(), 1e-9 * a.norm());
  EXPECT_LT((t + t.transpose()).norm(), 1e-10 * t.norm());
  EXPECT_LT((a * t - t * a).norm(), 1e-8 * a.norm() * t.norm());
  EXPECT_LT((a * Eigen::VectorXd::Ones(Eigen::Index(m))).norm(), 1e-8 * a.norm());
}

INSTANTIATE_TEST_SUITE_P(Shapes, CoarseGrainingDense,
                         ::testing::Values(std::pair<std::size_t, std::size_t>{12, 3}, std::pair<std::size_t, std::size_t>{32, 4},
                                           std::pair<std::size_t, std::size_t>{64, 16}, std::pair<std::size_t, std::size_t>{30, 30}));

TEST(CoarseGraining, RejectsNonMeanZeroInput) {
  const ts::CoarseGraining cg(ts::BlockScheme(16, 4));
  EXPECT_THROW(cg.macro_Ainv(ts::Vector(4, 1.0)), ts::DomainError);
  EXPECT_THROW(cg.apply_PAinvJNPt(ts::Vector{1, 0, 0, 0}), ts::DomainError);
  EXPECT_THROW(cg.macro_A(ts::Vector(5, 0.0)), ts::DimensionError);
}

TEST(FluctuationConstant, MatchesDenseEigenvalue) {
  for (auto [n, m] : {std::pair{24l, 4l}, {40l, 8l}}) {
    const ts::CoarseGraining cg{ts::BlockScheme(std::size_t(n), std::size_t(m))};
    const Eigen::MatrixXd f = Eigen::MatrixXd::Identity(n, n) - oracle::lift(n, m) * oracle::projection(n, m);
    const Eigen::MatrixXd op = f * oracle::pinv_sym(oracle::laplacian(n)) * f;
    const double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(op).eigenvalues().maxCoeff();
    EXPECT_NEAR(ts::fluctuation_constant(cg), double(m * m) * top, 1e-6 * double(m * m) * top);
  }
  EXPECT_EQ(ts::fluctuation_constant(ts::CoarseGraining(ts::BlockScheme(8, 8))), 0.0);
}
