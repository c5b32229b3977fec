#pragma once

#include "fedm/common.hpp"
#include "fedm/dataset.hpp"
#include "fedm/defaults.hpp"
#include "fedm/model.hpp"

namespace fedm {

struct PerturbConfig {
  std::size_t replicates = defaults::perturbations_quantile;
  PerturbScheme scheme = PerturbScheme::multinomial_bootstrap;
  std::uint64_t seed = defaults::seed;

  void validate() const;
};

/// Estimated variance of the (root-n scaled) score.
struct ScoreVariance {
  Matrix sigma;        ///< d x d, symmetric PSD
  Vector gamma_raw;    ///< regression coefficients on the outer-product features
  bool psd_adjusted = false;
};

/// For each row theta_j of `thetas`: the variance, over `replicates` weight
/// draws, of M†(theta_j) - M†(theta_hat). The same weight draws are used for
/// every theta_j. Sample variance with divisor replicates - 1.
Vector empirical_v(const Problem& problem, const Dataset& data, const Vector& theta_hat,
                   const Matrix& thetas, const PerturbConfig& config);

/// No-intercept OLS of V on the outer-product features (rows of `features`,
/// d(d+1)/2 columns). Diagonal entries of Sigma are n * gamma_uu and
/// off-diagonal entries n/2 * gamma_uv. Negative eigenvalues are clipped.
ScoreVariance regress_score_variance(const Vector& v, const Matrix& features, Index n);

/// Dimension d with d(d+1)/2 == q; throws if q is not triangular.
Index dim_from_triangle(Index q);

}  // namespace fedm
