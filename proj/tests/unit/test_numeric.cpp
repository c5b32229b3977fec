#include "fedm/numeric.hpp"

#include "helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace fedm;

TEST(CompensatedSum, RecoversCancellation) {
  CompensatedSum s;
  s.add(1e16);
  s.add(1.0);
  s.add(-1e16);
  EXPECT_EQ(s.value(), 1.0);

  double naive = 0.0;
  CompensatedSum c;
  for (int i = 0; i < 1000000; ++i) {
    naive += 0.1;
    c.add(0.1);
  }
  EXPECT_LT(std::abs(c.value() - 100000.0), std::abs(naive - 100000.0));
  EXPECT_NEAR(c.value(), 100000.0, 1e-9);
}

TEST(Symmetrize, AveragesOffDiagonal) {
  Matrix m(2, 2);
  m << 1, 2, 4, 3;
  const Matrix s = symmetrize(m);
  EXPECT_EQ(s(0, 1), 3.0);
  EXPECT_EQ(s(1, 0), 3.0);
  EXPECT_EQ(s(0, 0), 1.0);
}

TEST(ClipToPsd, LeavesPsdInputUntouched) {
  const Matrix a = test::random_pd(4, 1);
  const auto r = clip_to_psd(a);
  EXPECT_FALSE(r.adjusted);
  EXPECT_EQ(r.matrix, a);
}

TEST(ClipToPsd, ClipsNegativeEigenvalues) {
  Matrix a(2, 2);
  a << 1, 2, 2, 1;  // eigenvalues 3 and -1
  const auto r = clip_to_psd(a);
  EXPECT_TRUE(r.adjusted);
  EXPECT_NEAR(r.min_eigenvalue, -1.0, 1e-12);
  EXPECT_GE(min_eigenvalue(r.matrix), -1e-12);
  Matrix expected(2, 2);
  expected << 1.5, 1.5, 1.5, 1.5;
  EXPECT_TRUE(r.matrix.isApprox(expected, 1e-12));
}

TEST(OperatorNorm, MatchesLargestSingularValue) {
  Matrix a(2, 2);
  a << 3, 0, 0, -5;
  EXPECT_NEAR(operator_norm(a), 5.0, 1e-12);
}

TEST(LeastSquares, RecoversExactCoefficients) {
  const Index m = 40;
  Matrix x(m, 3);
  Rng rng = make_rng(3);
  std::normal_distribution<double> normal;
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < 3; ++j) x(i, j) = normal(rng);
  }
  Vector beta(3);
  beta << 1.5, -2.0, 0.25;
  const Vector b = least_squares(x, x * beta);
  EXPECT_LT((b - beta).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LeastSquares, NamesRankDeficientColumns) {
  Matrix x(10, 3);
  for (Index i = 0; i < 10; ++i) {
    x(i, 0) = i;
    x(i, 1) = 2.0 * i;
    x(i, 2) = i * i;
  }
  const std::vector<std::string> names = {"a", "b", "c"};
  try {
    least_squares(x, Vector::Ones(10), names);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("rank"), std::string::npos);
    EXPECT_TRUE(msg.find('a') != std::string::npos || msg.find('b') != std::string::npos);
  }
}

TEST(LeastSquares, RejectsTooFewRows) {
  EXPECT_THROW(least_squares(Matrix::Identity(3, 3), Vector::Ones(3)), NumericalError);
}

TEST(NormalQuantile, KnownValues) {
  EXPECT_EQ(normal_quantile(0.5), 0.0);
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_NEAR(normal_quantile(0.025), -1.959963984540054, 1e-12);
}

TEST(UpperTriangle, RowMajorOrderAndLabels) {
  Matrix m(3, 3);
  m << 1, 2, 3, 2, 4, 5, 3, 5, 6;
  const Vector u = upper_triangle(m);
  ASSERT_EQ(u.size(), triangle_size(3));
  for (Index k = 0; k < 6; ++k) EXPECT_EQ(u(k), static_cast<double>(k + 1));
  const auto labels = upper_triangle_labels(3, "T");
  ASSERT_EQ(labels.size(), 6u);
  EXPECT_EQ(labels.front(), "T(1,1)");
  EXPECT_EQ(labels[1], "T(1,2)");
  EXPECT_EQ(labels.back(), "T(3,3)");
}
