#pragma once

#include "fedm/common.hpp"
#include "fedm/dataset.hpp"
#include "fedm/defaults.hpp"
#include "fedm/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fedm {

struct SamplerConfig {
  std::size_t draws = defaults::draws;          ///< B, kept after burn-in and thinning
  std::size_t burn_in = defaults::burn_in;
  std::size_t thin = defaults::thin;
  std::size_t broadcast = defaults::broadcast_quantile;  ///< B1
  std::optional<Vector> init;                    ///< problem's initial_point when unset
  double step_scale = 0.0;                       ///< initial proposal SD; 0 means 1/sqrt(n)
  std::optional<double> target_accept;           ///< 0.35 for d <= 4, else 0.234
  std::uint64_t seed = defaults::seed;
  std::string trace_path;                        ///< per-iteration CSV when non-empty

  /// Throws ConfigError unless B > d(d+1)/2 + d, 1 <= B1 <= B, thin >= 1.
  void validate(Index d) const;
  double acceptance_target(Index d) const;
};

struct McmcDraws {
  Matrix draws;              ///< B x d, one draw per row
  Vector objective_values;   ///< M(theta) at each kept draw
  double acceptance_rate = 0.0;  ///< post-burn-in
  double step_size = 0.0;        ///< frozen proposal SD
  double min_effective_size = 0.0;  ///< smallest per-coordinate ESS (diagnostic only)
};

/// Raised when the chain never accepts a proposal after adaptation. Carries
/// the (constant) chain for inspection.
class StuckChainError : public NumericalError {
 public:
  StuckChainError(const std::string& message, McmcDraws chain)
      : NumericalError(message), chain_(std::move(chain)) {}
  const McmcDraws& chain() const noexcept { return chain_; }

 private:
  McmcDraws chain_;
};

/// Random-walk Metropolis targeting exp{-n M(theta)} on the domain ball.
/// Proposals outside the ball are rejected. The step size is adapted by
/// Robbins-Monro during burn-in and frozen afterwards.
McmcDraws run_chain(const Problem& problem, const Dataset& data, const SamplerConfig& config);

/// Per-coordinate effective sample size (Geyer initial positive sequence).
Vector effective_sample_size(const Matrix& draws);

struct PointSummary {
  Vector theta_hat;  ///< draw mean
  Matrix a_hat;      ///< (1/n) * inverse of the 1/B draw covariance
};

PointSummary summarize(const Matrix& draws, Index n);

struct BroadcastSelection {
  Matrix draws;                 ///< B1 x d, nearest first
  std::vector<Index> indices;   ///< rows of the input
  double c1_used = 0.0;         ///< sqrt(n) * largest selected distance
};

/// The B1 distinct draws nearest to theta_hat (repeated states from rejected
/// proposals count once); ties keep the earlier draw.
BroadcastSelection select_broadcast(const Matrix& draws, const Vector& theta_hat, Index n,
                                    std::size_t count);

struct QuadFeatures {
  Vector delta;   ///< theta* - theta_hat
  Vector outer;   ///< upper triangle of delta delta^T, row-major (u <= v)
};

QuadFeatures quad_features(const Vector& theta_star, const Vector& theta_hat);

/// Row j holds delta_j (deltas) or the outer-product features of draw j.
Matrix delta_matrix(const Matrix& draws, const Vector& theta_hat);
Matrix outer_feature_matrix(const Matrix& draws, const Vector& theta_hat);

/// What the target site computes and (minus the diagnostics) broadcasts.
struct TargetSummary {
  std::string label = "target";
  Index n_target = 0;
  Vector theta_hat;
  Matrix a_hat;
  Matrix sigma_s_hat;
  Matrix broadcast_draws;  ///< B1 x d

  // diagnostics, not broadcast
  double c1_used = 0.0;
  double acceptance_rate = 0.0;
  double min_effective_size = 0.0;
  bool sigma_psd_adjusted = false;

  Index dim() const noexcept { return theta_hat.size(); }
};

}  // namespace fedm
