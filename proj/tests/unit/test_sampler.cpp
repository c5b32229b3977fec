#include "fedm/sampler.hpp"

#include "fedm/numeric.hpp"

#include "helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

using namespace fedm;

namespace {

SamplerConfig quick_config(std::size_t draws, std::uint64_t seed) {
  SamplerConfig c;
  c.draws = draws;
  c.burn_in = 2000;
  c.seed = seed;
  c.broadcast = 10;
  return c;
}

}  // namespace

TEST(Sampler, QuadraticPosteriorMomentsMatchClosedForm) {
  const Index d = 2;
  const Index n = 500;
  Vector mu(2);
  mu << 0.3, -0.2;
  const Matrix a = test::random_pd(d, 11);
  QuadraticProblem problem(mu, a, 50.0);
  const Dataset data = placeholder_dataset(n);

  const auto chain = run_chain(problem, data, quick_config(20000, 3));
  const auto summary = summarize(chain.draws, n);
  const Matrix post_cov = (static_cast<double>(n) * a).inverse();
  const Vector ess = effective_sample_size(chain.draws);
  for (Index j = 0; j < d; ++j) {
    const double mc_se = std::sqrt(post_cov(j, j) / ess(j));
    EXPECT_LT(std::abs(summary.theta_hat(j) - mu(j)), 4.0 * mc_se) << "coordinate " << j;
  }
  EXPECT_LT(operator_norm(summary.a_hat - a) / operator_norm(a), 0.10);
  EXPECT_NEAR(chain.acceptance_rate, 0.35, 0.10);
  EXPECT_GT(chain.min_effective_size, 100.0);
}

TEST(Sampler, DrawsStayInsideTheDomainBall) {
  Vector mu(2);
  mu << 0.95, 0.0;
  QuadraticProblem problem(mu, Matrix::Identity(2, 2), 1.0);
  SamplerConfig c = quick_config(3000, 5);
  c.init = Vector::Zero(2);
  const auto chain = run_chain(problem, placeholder_dataset(20), c);
  for (Index j = 0; j < chain.draws.rows(); ++j) EXPECT_LE(chain.draws.row(j).norm(), 1.0);
}

TEST(Sampler, SameSeedSameChain) {
  QuadraticProblem problem(Vector::Zero(3), Matrix::Identity(3, 3), 10.0);
  const Dataset data = placeholder_dataset(100);
  const auto a = run_chain(problem, data, quick_config(500, 9));
  const auto b = run_chain(problem, data, quick_config(500, 9));
  const auto c = run_chain(problem, data, quick_config(500, 10));
  EXPECT_EQ(a.draws, b.draws);
  EXPECT_NE(a.draws, c.draws);
}

TEST(Sampler, StuckChainReportsAndKeepsDraws) {
  KernelProblem problem("spike", 1, 2, 5.0,
                        [](const Dataset&, std::span<const Index>, const Vector& theta) {
                          return theta.norm() == 0.0 ? 0.0
                                                     : std::numeric_limits<double>::infinity();
                        });
  SamplerConfig c = quick_config(50, 1);
  c.burn_in = 20;
  c.init = Vector::Zero(2);
  try {
    run_chain(problem, placeholder_dataset(5), c);
    FAIL() << "expected StuckChainError";
  } catch (const StuckChainError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numerical);
    EXPECT_EQ(e.chain().draws.rows(), 50);
    EXPECT_TRUE(e.chain().draws.isZero());
    EXPECT_NE(std::string(e.what()).find("no proposal accepted"), std::string::npos);
  }
}

TEST(Sampler, TraceFileHasOneRowPerIteration) {
  const auto dir = test::temp_dir("trace");
  QuadraticProblem problem(Vector::Zero(2), Matrix::Identity(2, 2), 10.0);
  SamplerConfig c = quick_config(100, 2);
  c.burn_in = 30;
  c.trace_path = (dir / "trace.csv").string();
  run_chain(problem, placeholder_dataset(10), c);
  std::ifstream in(c.trace_path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "iteration,theta1,theta2,objective,accepted");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 130);
}

TEST(SamplerConfig, Validation) {
  SamplerConfig c;
  EXPECT_NO_THROW(c.validate(5));
  c.draws = 20;  // d(d+1)/2 + d = 20 for d = 5
  EXPECT_THROW(c.validate(5), ConfigError);
  c = SamplerConfig{};
  c.broadcast = c.draws + 1;
  EXPECT_THROW(c.validate(2), ConfigError);
  c = SamplerConfig{};
  c.thin = 0;
  EXPECT_THROW(c.validate(2), ConfigError);
  c = SamplerConfig{};
  c.target_accept = 1.0;
  EXPECT_THROW(c.validate(2), ConfigError);
  c = SamplerConfig{};
  EXPECT_DOUBLE_EQ(c.acceptance_target(4), 0.35);
  EXPECT_DOUBLE_EQ(c.acceptance_target(5), 0.234);
}

TEST(Sampler, RejectsInitialPointOutsideDomain) {
  QuadraticProblem problem(Vector::Zero(2), Matrix::Identity(2, 2), 1.0);
  SamplerConfig c = quick_config(100, 1);
  c.init = Vector::Constant(2, 1.0);
  EXPECT_THROW(run_chain(problem, placeholder_dataset(10), c), ConfigError);
}

TEST(EffectiveSampleSize, IidAndAutoregressive) {
  const Index b = 20000;
  Rng rng = make_rng(4);
  std::normal_distribution<double> normal;
  Matrix draws(b, 2);
  const double phi = 0.9;
  double ar = 0.0;
  for (Index i = 0; i < b; ++i) {
    draws(i, 0) = normal(rng);
    ar = phi * ar + normal(rng);
    draws(i, 1) = ar;
  }
  const Vector ess = effective_sample_size(draws);
  EXPECT_NEAR(ess(0) / static_cast<double>(b), 1.0, 0.15);
  const double expected = static_cast<double>(b) * (1.0 - phi) / (1.0 + phi);
  EXPECT_NEAR(ess(1) / expected, 1.0, 0.3);
}

TEST(Summarize, MeanAndScaledInverseCovariance) {
  Matrix draws(4, 2);
  draws << 1, 0, -1, 0, 0, 2, 0, -2;
  const auto s = summarize(draws, 10);
  EXPECT_TRUE(s.theta_hat.isZero());
  // covariance diag(0.5, 2); a_hat = inverse / n
  EXPECT_NEAR(s.a_hat(0, 0), 0.2, 1e-14);
  EXPECT_NEAR(s.a_hat(1, 1), 0.05, 1e-14);
  EXPECT_NEAR(s.a_hat(0, 1), 0.0, 1e-14);
}

TEST(Summarize, SingularCovarianceNamesDirection) {
  Matrix draws(5, 2);
  for (Index i = 0; i < 5; ++i) draws.row(i) << i, 2.0 * i;
  try {
    summarize(draws, 10);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate direction"), std::string::npos);
  }
}

TEST(SelectBroadcast, NearestDistinctDrawsInOrder) {
  Matrix draws(7, 1);
  draws << 3.0, 1.0, 1.0, -2.0, 1.0, 0.5, 4.0;
  const auto sel = select_broadcast(draws, Vector::Zero(1), 16, 3);
  ASSERT_EQ(sel.indices.size(), 3u);
  EXPECT_EQ(sel.indices[0], 5);
  EXPECT_EQ(sel.indices[1], 1);
  EXPECT_EQ(sel.indices[2], 3);
  std::set<double> seen;
  for (Index j = 0; j < sel.draws.rows(); ++j) seen.insert(sel.draws(j, 0));
  EXPECT_EQ(seen.size(), 3u);
  EXPECT_DOUBLE_EQ(sel.c1_used, 4.0 * 2.0);
}

TEST(SelectBroadcast, EquidistantDistinctPointsAreBothKept) {
  Matrix draws(3, 1);
  draws << 1.0, -1.0, 1.0;
  const auto sel = select_broadcast(draws, Vector::Zero(1), 1, 2);
  EXPECT_EQ(sel.indices[0], 0);
  EXPECT_EQ(sel.indices[1], 1);
}

TEST(SelectBroadcast, TooFewDistinctPoints) {
  Matrix draws(5, 2);
  draws.setZero();
  draws.row(4) << 1.0, 1.0;
  EXPECT_THROW(select_broadcast(draws, Vector::Zero(2), 10, 3), NumericalError);
  EXPECT_THROW(select_broadcast(draws, Vector::Zero(2), 10, 6), ConfigError);
}

TEST(QuadFeatures, DeltaAndOuterProduct) {
  Vector star(2), hat(2);
  star << 1.5, -1.0;
  hat << 0.5, 1.0;
  const auto f = quad_features(star, hat);
  EXPECT_DOUBLE_EQ(f.delta(0), 1.0);
  EXPECT_DOUBLE_EQ(f.delta(1), -2.0);
  ASSERT_EQ(f.outer.size(), 3);
  EXPECT_DOUBLE_EQ(f.outer(0), 1.0);
  EXPECT_DOUBLE_EQ(f.outer(1), -2.0);
  EXPECT_DOUBLE_EQ(f.outer(2), 4.0);

  Matrix draws(2, 2);
  draws.row(0) = star.transpose();
  draws.row(1) = hat.transpose();
  const Matrix features = outer_feature_matrix(draws, hat);
  EXPECT_EQ(features.row(0).transpose(), f.outer);
  EXPECT_TRUE(features.row(1).isZero());
  EXPECT_EQ(delta_matrix(draws, hat).row(0).transpose(), f.delta);
}
