#include "fedm/source_site.hpp"

#include "fedm/defaults.hpp"
#include "fedm/numeric.hpp"

namespace fedm {

ScoreHessian regress_score_hessian(const Vector& objective_diffs, const Matrix& deltas,
                                   const Matrix& outer_features) {
  const Index m = objective_diffs.size();
  const Index d = deltas.cols();
  if (deltas.rows() != m || outer_features.rows() != m) {
    throw ConfigError("regress_score_hessian: inputs have different point counts");
  }
  if (outer_features.cols() != triangle_size(d)) {
    throw ConfigError("regress_score_hessian: feature width does not match d(d+1)/2");
  }
  Matrix design(m, d + triangle_size(d));
  design << deltas, outer_features;

  std::vector<std::string> labels;
  for (Index j = 0; j < d; ++j) labels.push_back("delta" + std::to_string(j + 1));
  for (auto& label : upper_triangle_labels(d, "Theta")) labels.push_back(std::move(label));

  const Vector coef = least_squares(design, objective_diffs, labels);

  ScoreHessian out;
  out.score = coef.head(d);
  out.a.resize(d, d);
  Index k = d;
  for (Index u = 0; u < d; ++u) {
    for (Index v = u; v < d; ++v) {
      const double b = coef(k++);
      if (u == v) {
        out.a(u, u) = 2.0 * b;
      } else {
        out.a(u, v) = b;
        out.a(v, u) = b;
      }
    }
  }
  return out;
}

bool is_positive_definite(const Matrix& a) {
  if (a.size() == 0) return false;
  if (!a.allFinite()) return false;
  return min_eigenvalue(symmetrize(a)) > defaults::pd_tolerance * (1.0 + operator_norm(a));
}

SourceSummary build_source_summary(const Problem& problem, const Dataset& data,
                                   const TargetSummary& broadcast, const PerturbConfig& config) {
  const Index d = problem.param_dim();
  problem.check_data(data);
  if (broadcast.theta_hat.size() != d || broadcast.broadcast_draws.cols() != d) {
    throw ConfigError("source '" + data.label() + "': broadcast dimension does not match problem");
  }
  if (data.size() < d + triangle_size(d)) {
    throw ConfigError("source '" + data.label() + "': " + std::to_string(data.size()) +
                      " rows, fewer than the " + std::to_string(d + triangle_size(d)) +
                      " regression coefficients");
  }
  const Matrix& draws = broadcast.broadcast_draws;
  const Vector& theta_hat = broadcast.theta_hat;

  const double base = eval_objective(problem, data, theta_hat);
  Vector diffs(draws.rows());
  for (Index j = 0; j < draws.rows(); ++j) {
    diffs(j) = eval_objective(problem, data, draws.row(j).transpose()) - base;
  }
  const Matrix deltas = delta_matrix(draws, theta_hat);
  const Matrix features = outer_feature_matrix(draws, theta_hat);
  ScoreHessian sh = regress_score_hessian(diffs, deltas, features);

  const Vector v = empirical_v(problem, data, theta_hat, draws, config);
  ScoreVariance sv = regress_score_variance(v, features, data.size());

  SourceSummary out;
  out.site = data.label();
  out.n = data.size();
  out.score = std::move(sh.score);
  out.a = std::move(sh.a);
  out.sigma = std::move(sv.sigma);
  out.a_is_pd = is_positive_definite(out.a);
  return out;
}

}  // namespace fedm
