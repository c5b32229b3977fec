#include "fedm/perturbation.hpp"

#include "fedm/numeric.hpp"
#include "fedm/sampler.hpp"

#include "helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace fedm;

namespace {

Dataset regression_data(Index n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal;
  Matrix z(n, 2);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    z(i, 0) = 1.0;
    z(i, 1) = normal(rng);
    y(i) = 0.5 + z(i, 1) + normal(rng);
  }
  return Dataset("p", y, z);
}

}  // namespace

TEST(EmpiricalV, MultinomialMatchesClosedFormVariance) {
  const Index n = 200;
  const auto data = regression_data(n, 1);
  QuantileProblem problem(0.5, 2, 50.0);
  Vector hat(2), star(2);
  hat << 0.5, 1.0;
  star << 0.7, 0.8;

  // Under Multinomial(n, 1/n) weights, Var[(1/n) sum W_i h_i] = (1/n)(mean h^2 - mean(h)^2).
  Vector h(n);
  for (Index i = 0; i < n; ++i) {
    const double fit_star = data.z().row(i).dot(star);
    const double fit_hat = data.z().row(i).dot(hat);
    h(i) = check_loss(data.y()(i) - fit_star, 0.5) - check_loss(data.y()(i) - fit_hat, 0.5);
  }
  const double expected = (h.array().square().mean() - h.mean() * h.mean()) / static_cast<double>(n);

  PerturbConfig config;
  config.replicates = 20000;
  config.seed = 7;
  Matrix thetas(1, 2);
  thetas.row(0) = star.transpose();
  const Vector v = empirical_v(problem, data, hat, thetas, config);
  EXPECT_NEAR(v(0) / expected, 1.0, 0.05);
}

TEST(EmpiricalV, ZeroAtTheAnchorAndDeterministic) {
  const auto data = regression_data(50, 2);
  QuantileProblem problem(0.5, 2, 50.0);
  const Vector hat = Vector::Constant(2, 0.3);
  Matrix thetas(2, 2);
  thetas.row(0) = hat.transpose();
  thetas.row(1) << 0.4, 0.1;
  PerturbConfig config;
  config.replicates = 50;
  const Vector a = empirical_v(problem, data, hat, thetas, config);
  const Vector b = empirical_v(problem, data, hat, thetas, config);
  EXPECT_EQ(a(0), 0.0);
  EXPECT_GT(a(1), 0.0);
  EXPECT_EQ(a, b);
}

TEST(EmpiricalV, Validation) {
  const auto data = regression_data(30, 3);
  QuantileProblem problem(0.5, 2, 1.0);
  PerturbConfig config;
  config.replicates = 1;
  EXPECT_THROW(empirical_v(problem, data, Vector::Zero(2), Matrix::Zero(1, 2), config),
               ConfigError);
  config.replicates = 10;
  EXPECT_THROW(empirical_v(problem, data, Vector::Zero(2), Matrix::Zero(0, 2), config),
               ConfigError);
  EXPECT_THROW(empirical_v(problem, data, Vector::Zero(2), Matrix::Zero(1, 3), config),
               ConfigError);
  EXPECT_THROW(empirical_v(problem, data, Vector::Zero(2), Matrix::Constant(1, 2, 5.0), config),
               ConfigError);
}

TEST(RegressScoreVariance, ExactRecoveryFromQuadraticV) {
  const Index d = 3;
  const Index n = 400;
  const Matrix sigma = test::random_pd(d, 21);
  Rng rng = make_rng(5);
  std::normal_distribution<double> normal(0.0, 0.05);
  const Index m = 40;
  Matrix draws(m, d);
  for (Index j = 0; j < m; ++j) {
    for (Index u = 0; u < d; ++u) draws(j, u) = normal(rng);
  }
  const Matrix features = outer_feature_matrix(draws, Vector::Zero(d));
  // V(delta) = delta^T Sigma delta / n
  Vector v(m);
  for (Index j = 0; j < m; ++j) {
    const Vector delta = draws.row(j).transpose();
    v(j) = delta.dot(sigma * delta) / static_cast<double>(n);
  }
  const auto out = regress_score_variance(v, features, n);
  EXPECT_FALSE(out.psd_adjusted);
  EXPECT_LT((out.sigma - sigma).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(out.gamma_raw(0), sigma(0, 0) / n, 1e-12);
  EXPECT_NEAR(out.gamma_raw(1), 2.0 * sigma(0, 1) / n, 1e-12);
}

TEST(RegressScoreVariance, ClipsNegativeEigenvalues) {
  const Index d = 2;
  Matrix indefinite(2, 2);
  indefinite << 1.0, 0.0, 0.0, -0.5;
  Matrix draws(10, d);
  for (Index j = 0; j < 10; ++j) draws.row(j) << std::cos(0.7 * j), std::sin(0.3 * j + 1.0);
  const Matrix features = outer_feature_matrix(draws, Vector::Zero(d));
  Vector v(10);
  for (Index j = 0; j < 10; ++j) {
    const Vector delta = draws.row(j).transpose();
    v(j) = delta.dot(indefinite * delta);
  }
  const auto out = regress_score_variance(v, features, 1);
  EXPECT_TRUE(out.psd_adjusted);
  EXPECT_GE(min_eigenvalue(out.sigma), -1e-12);
  EXPECT_NEAR(out.sigma(0, 0), 1.0, 1e-10);
  EXPECT_NEAR(out.sigma(1, 1), 0.0, 1e-10);
}

TEST(RegressScoreVariance, ShapeErrors) {
  EXPECT_THROW(regress_score_variance(Vector::Zero(5), Matrix::Zero(4, 3), 10), ConfigError);
  EXPECT_THROW(regress_score_variance(Vector::Zero(5), Matrix::Zero(5, 4), 10), ConfigError);
  EXPECT_EQ(dim_from_triangle(6), 3);
  EXPECT_EQ(dim_from_triangle(1), 1);
  EXPECT_THROW(dim_from_triangle(5), ConfigError);
}

TEST(RegressScoreVariance, RankDeficientFeaturesNamed) {
  Matrix draws(6, 2);
  for (Index j = 0; j < 6; ++j) draws.row(j) << 0.1 * (j + 1), 0.0;
  const Matrix features = outer_feature_matrix(draws, Vector::Zero(2));
  try {
    regress_score_variance(Vector::Ones(6), features, 10);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("Theta"), std::string::npos);
  }
}
