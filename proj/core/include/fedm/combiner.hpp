#pragma once

#include "fedm/common.hpp"
#include "fedm/defaults.hpp"
#include "fedm/sampler.hpp"
#include "fedm/source_site.hpp"

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fedm {

/// P(chi^2_d > t), via the regularized upper incomplete gamma Q(d/2, t/2).
double chisq_upper_tail(double t, int d);

/// Score-test-like statistic T_k and its chi^2_d upper tail p_k.
struct Dissimilarity {
  double t = 0.0;
  double p = 1.0;
};

/// T_k = +inf, p_k = 0 when the source Hessian is not positive definite.
/// Throws NumericalError when the inner variance matrix is singular.
Dissimilarity dissimilarity(const SourceSummary& source, const TargetSummary& target);

/// Joint covariance of (sqrt(n_T) theta_hat_T, sqrt(n_T) S_1, ..., sqrt(n_T) S_K),
/// target block first, then sources in the order given.
struct OmegaMatrix {
  Matrix omega;         ///< symmetric, unjittered
  Index d = 0;
  Index sites = 0;
  double jitter = 0.0;  ///< diagonal loading needed for a Cholesky factor

  Index dim() const noexcept { return omega.rows(); }
  Matrix target_block() const { return omega.topLeftCorner(d, d); }
};

OmegaMatrix assemble_omega(const TargetSummary& target, std::span<const SourceSummary> sources);

/// Q mean-zero Gaussian draws (rows) with covariance `cov`, via a pivoted
/// LDL^T factor; semidefinite covariances are allowed.
Matrix draw_joint_samples(const Matrix& cov, std::size_t q, std::uint64_t seed);
Matrix draw_joint_samples(const OmegaMatrix& omega, std::size_t q, std::uint64_t seed);

struct LassoOptions {
  double tolerance = defaults::lasso_tolerance;
  std::size_t max_sweeps = defaults::lasso_max_sweeps;
  bool group = false;  ///< penalize ||Lambda_k||_F instead of entrywise |.|
};

/// Weight matrices minimizing
///   (1/Q) sum_q ||theta^(q) - sum_k Lambda_k S_k^(q)||^2 + lambda sum_k ||Lambda_k||_1 / p_k
/// by cyclic coordinate descent. `samples` is Q x d(K+1) with the target
/// block first. Sites flagged in `excluded` are fixed at zero.
std::vector<Matrix> adaptive_lasso(const Matrix& samples, Index d, std::span<const double> p_values,
                                   double lambda, const std::vector<bool>& excluded,
                                   const LassoOptions& options = {});

struct FullBorrow {
  std::vector<Matrix> lambdas;
  bool ridge_fallback = false;
};

/// Unpenalized least-squares weights (normal equations).
FullBorrow full_borrow_weights(const Matrix& samples, Index d, const std::vector<bool>& excluded);

/// theta_hat - sum_k Lambda_k S_k.
Vector combine(const Vector& theta_hat, std::span<const Vector> scores,
               std::span<const Matrix> lambdas);

/// (I, -Lambda_1, ..., -Lambda_K) Omega (I, -Lambda_1, ..., -Lambda_K)^T,
/// the covariance of sqrt(n_T) theta_C.
Matrix combined_variance(std::span<const Matrix> lambdas, const Matrix& omega);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const noexcept { return hi - lo; }
  bool contains(double x) const noexcept { return lo <= x && x <= hi; }
};

/// theta_j -/+ z_{1-alpha/2} sqrt(var_jj / n), where var is the covariance of
/// sqrt(n) theta.
std::vector<Interval> wald_ci(const Vector& theta, const Matrix& var_root_n, Index n,
                              double alpha);

struct Estimate {
  Vector theta;
  Matrix variance;  ///< covariance of sqrt(n_T) theta
  std::vector<Interval> ci;
  std::vector<Matrix> lambdas;  ///< empty for the target-only estimate
};

struct DissimilarityReport {
  std::vector<std::string> sites;
  std::vector<double> t;
  std::vector<double> p;
  std::vector<std::string> excluded_non_pd;
  std::vector<std::string> unusable;  ///< singular inner variance; dropped everywhere
};

struct CombinerConfig {
  std::optional<double> lambda;  ///< default n_T^{-1/2}
  bool lambda_cv = false;        ///< choose from {n^-1/4, n^-1/2, n^-1} by 5-fold CV
  std::size_t q = defaults::q_samples;
  double alpha = defaults::alpha;
  bool group_lasso = false;
  std::uint64_t seed = defaults::seed;

  void validate() const;
};

struct CombinedEstimate {
  Index n_target = 0;
  double alpha = defaults::alpha;
  double lambda = 0.0;
  Estimate transfer;
  Estimate target_only;
  Estimate full_borrow;
  bool full_borrow_ridge = false;
  DissimilarityReport diagnostics;
  OmegaMatrix omega;
};

/// The target-side fold over replies: dissimilarities, Omega, Gaussian
/// draws, adaptive-lasso weights, combined estimate, plus the target-only
/// and full-borrowing baselines. Replies are processed in site-label order.
CombinedEstimate combine_at_target(const TargetSummary& target,
                                   std::vector<SourceSummary> sources,
                                   const CombinerConfig& config);

double l1_norm(const Matrix& m);

}  // namespace fedm
