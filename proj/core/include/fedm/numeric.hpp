#pragma once

#include "fedm/common.hpp"

#include <span>
#include <vector>

namespace fedm {

/// Neumaier-compensated accumulator. Order-dependent only at the level of the
/// final rounding, so reordering the summands changes the result by ~1 ulp.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

/// (M + M^T) / 2, exact on the diagonal.
Matrix symmetrize(const Matrix& m);

struct PsdRepair {
  Matrix matrix;
  bool adjusted = false;
  double min_eigenvalue = 0.0;  ///< before repair
};

/// Clips negative eigenvalues of a symmetric matrix to zero. The input is
/// returned unchanged (bit for bit) when it is already PSD.
PsdRepair clip_to_psd(const Matrix& symmetric);

double min_eigenvalue(const Matrix& symmetric);
double operator_norm(const Matrix& m);

/// No-intercept OLS. Throws NumericalError naming the rank-deficient columns,
/// or when there are not more rows than columns.
Vector least_squares(const Matrix& design, const Vector& response,
                     std::span<const std::string> column_names = {});

/// Standard normal quantile.
double normal_quantile(double p);

/// Number of upper-triangle entries (diagonal included) of a d x d matrix.
constexpr Index triangle_size(Index d) { return d * (d + 1) / 2; }

/// Upper-triangle (u <= v) entries of `m` in row-major order.
Vector upper_triangle(const Matrix& m);

/// Labels "(u,v)" (1-based) in the same order as upper_triangle.
std::vector<std::string> upper_triangle_labels(Index d, std::string_view prefix = "");

bool all_finite(const Matrix& m);

}  // namespace fedm
