#pragma once

#include "fedm/common.hpp"
#include "fedm/dataset.hpp"
#include "fedm/model.hpp"
#include "fedm/perturbation.hpp"
#include "fedm/sampler.hpp"

#include <string>

namespace fedm {

/// A source site's reply: O(d^2) summaries anchored at the target estimate.
struct SourceSummary {
  std::string site;
  Index n = 0;
  Vector score;   ///< estimated score at theta_hat_T
  Matrix a;       ///< estimated second-derivative matrix, symmetric
  Matrix sigma;   ///< estimated score variance, PSD
  bool a_is_pd = false;
};

struct ScoreHessian {
  Vector score;
  Matrix a;
};

/// No-intercept OLS of objective differences on (delta_j, Theta_j). The
/// delta coefficients are the score; the Hessian has 2*beta_uu on the
/// diagonal and beta_uv off it.
ScoreHessian regress_score_hessian(const Vector& objective_diffs, const Matrix& deltas,
                                   const Matrix& outer_features);

/// min eigenvalue > pd_tolerance * (1 + ||a||_op).
bool is_positive_definite(const Matrix& a);

/// Everything a source computes from the target's broadcast: objective
/// values at theta_hat_T and each broadcast draw, the score/Hessian
/// regression, and the perturbation-based score variance.
SourceSummary build_source_summary(const Problem& problem, const Dataset& data,
                                   const TargetSummary& broadcast, const PerturbConfig& config);

}  // namespace fedm
