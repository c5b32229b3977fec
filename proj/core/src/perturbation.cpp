#include "fedm/perturbation.hpp"

#include "fedm/numeric.hpp"
#include "fedm/random.hpp"

#include <cmath>

namespace fedm {

void PerturbConfig::validate() const {
  if (replicates < 2) throw ConfigError("perturbation: need at least 2 replicates");
}

Vector empirical_v(const Problem& problem, const Dataset& data, const Vector& theta_hat,
                   const Matrix& thetas, const PerturbConfig& config) {
  config.validate();
  problem.check_data(data);
  problem.check_theta(theta_hat);
  if (thetas.rows() < 1) throw ConfigError("perturbation: empty parameter list");
  if (thetas.cols() != theta_hat.size()) {
    throw ConfigError("perturbation: parameter list has the wrong dimension");
  }
  for (Index j = 0; j < thetas.rows(); ++j) problem.check_theta(thetas.row(j).transpose());

  const auto reps = static_cast<Index>(config.replicates);
  Matrix weights(reps, data.size());
  Rng rng = make_rng(config.seed);
  draw_weight_matrix(weights, config.scheme, problem.degree(), rng);

  const Vector base = problem.perturbed_objectives(data, theta_hat, weights, config.scheme);
  Vector out(thetas.rows());
  for (Index j = 0; j < thetas.rows(); ++j) {
    const Vector diff =
        problem.perturbed_objectives(data, thetas.row(j).transpose(), weights, config.scheme) -
        base;
    const double mean = diff.mean();
    out(j) = (diff.array() - mean).square().sum() / static_cast<double>(reps - 1);
  }
  return out;
}

Index dim_from_triangle(Index q) {
  const auto d = static_cast<Index>(std::llround((std::sqrt(8.0 * static_cast<double>(q) + 1.0) - 1.0) / 2.0));
  if (d < 1 || triangle_size(d) != q) {
    throw ConfigError("feature count " + std::to_string(q) + " is not d(d+1)/2 for any d");
  }
  return d;
}

ScoreVariance regress_score_variance(const Vector& v, const Matrix& features, Index n) {
  if (v.size() != features.rows()) {
    throw ConfigError("regress_score_variance: V and feature rows differ in length");
  }
  if (n < 1) throw ConfigError("regress_score_variance: sample size must be positive");
  const Index d = dim_from_triangle(features.cols());
  const auto labels = upper_triangle_labels(d, "Theta");

  ScoreVariance out;
  out.gamma_raw = least_squares(features, v, labels);

  const double scale = static_cast<double>(n);
  Matrix sigma(d, d);
  Index k = 0;
  for (Index u = 0; u < d; ++u) {
    for (Index w = u; w < d; ++w) {
      const double g = out.gamma_raw(k++);
      if (u == w) {
        sigma(u, u) = scale * g;
      } else {
        sigma(u, w) = scale / 2.0 * g;
        sigma(w, u) = sigma(u, w);
      }
    }
  }
  auto repaired = clip_to_psd(sigma);
  out.sigma = std::move(repaired.matrix);
  out.psd_adjusted = repaired.adjusted;
  return out;
}

}  // namespace fedm
