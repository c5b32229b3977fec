#include "fedm/sampler.hpp"

#include "fedm/numeric.hpp"
#include "fedm/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace fedm {

void SamplerConfig::validate(Index d) const {
  const auto d_size = static_cast<std::size_t>(d);
  const std::size_t min_draws = d_size * (d_size + 1) / 2 + d_size;
  if (draws <= min_draws) {
    throw ConfigError("sampler: B = " + std::to_string(draws) + " must exceed d(d+1)/2 + d = " +
                      std::to_string(min_draws));
  }
  if (thin < 1) throw ConfigError("sampler: thin must be at least 1");
  if (broadcast < 1 || broadcast > draws) {
    throw ConfigError("sampler: broadcast size B1 must lie in [1, B]");
  }
  if (step_scale < 0.0 || !std::isfinite(step_scale)) {
    throw ConfigError("sampler: step_scale must be finite and nonnegative");
  }
  if (target_accept && !(*target_accept > 0.0 && *target_accept < 1.0)) {
    throw ConfigError("sampler: target acceptance rate must lie in (0,1)");
  }
}

double SamplerConfig::acceptance_target(Index d) const {
  if (target_accept) return *target_accept;
  return d > 4 ? defaults::target_accept_high_dim : defaults::target_accept_low_dim;
}

McmcDraws run_chain(const Problem& problem, const Dataset& data, const SamplerConfig& config) {
  const Index d = problem.param_dim();
  problem.check_data(data);
  config.validate(d);

  Vector theta = config.init ? *config.init : problem.initial_point(data);
  if (theta.size() != d) throw ConfigError("sampler: initial point has the wrong dimension");
  if (!problem.in_domain(theta)) throw ConfigError("sampler: initial point lies outside the domain");

  const double n = static_cast<double>(data.size());
  const double target = config.acceptance_target(d);
  double log_step = std::log(config.step_scale > 0.0 ? config.step_scale : 1.0 / std::sqrt(n));

  Rng rng = make_rng(config.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;

  std::ofstream trace;
  if (!config.trace_path.empty()) {
    trace.open(config.trace_path);
    if (!trace) throw ConfigError("sampler: cannot write trace '" + config.trace_path + "'");
    trace << "iteration";
    for (Index j = 0; j < d; ++j) trace << ",theta" << (j + 1);
    trace << ",objective,accepted\n";
  }

  double current = problem.objective(data, theta);
  McmcDraws out;
  out.draws.resize(static_cast<Index>(config.draws), d);
  out.objective_values.resize(static_cast<Index>(config.draws));

  const std::size_t total = config.burn_in + config.draws * config.thin;
  std::size_t accepted_after_burn_in = 0;
  std::size_t kept = 0;
  Vector proposal(d);
  for (std::size_t t = 0; t < total; ++t) {
    const double step = std::exp(log_step);
    for (Index j = 0; j < d; ++j) proposal(j) = theta(j) + step * normal(rng);
    const double u = uniform(rng);

    double accept_prob = 0.0;
    double proposed = current;
    if (proposal.norm() <= problem.radius()) {
      proposed = problem.objective(data, proposal);
      const double log_ratio = -n * (proposed - current);
      accept_prob = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
    }
    const bool accept = u < accept_prob;
    if (accept) {
      theta = proposal;
      current = proposed;
    }

    if (t < config.burn_in) {
      const double gain = std::pow(static_cast<double>(t + 1), -defaults::adaptation_decay);
      log_step = std::clamp(log_step + gain * (accept_prob - target), -50.0, 5.0);
    } else {
      if (accept) ++accepted_after_burn_in;
      if ((t - config.burn_in + 1) % config.thin == 0) {
        out.draws.row(static_cast<Index>(kept)) = theta.transpose();
        out.objective_values(static_cast<Index>(kept)) = current;
        ++kept;
      }
    }
    if (trace.is_open()) {
      trace << t;
      for (Index j = 0; j < d; ++j) trace << ',' << format_double(theta(j));
      trace << ',' << format_double(current) << ',' << (accept ? 1 : 0) << '\n';
    }
  }

  out.step_size = std::exp(log_step);
  out.acceptance_rate = static_cast<double>(accepted_after_burn_in) /
                        static_cast<double>(config.draws * config.thin);
  if (accepted_after_burn_in == 0) {
    out.min_effective_size = 0.0;
    std::ostringstream os;
    os << "sampler: no proposal accepted after burn-in (step size " << out.step_size
       << "); try a smaller step_scale or check the domain radius";
    throw StuckChainError(os.str(), std::move(out));
  }
  out.min_effective_size = effective_sample_size(out.draws).minCoeff();
  return out;
}

Vector effective_sample_size(const Matrix& draws) {
  const Index b = draws.rows();
  Vector out(draws.cols());
  for (Index j = 0; j < draws.cols(); ++j) {
    const Vector x = draws.col(j).array() - draws.col(j).mean();
    const double c0 = x.squaredNorm() / static_cast<double>(b);
    if (c0 <= 0.0) {
      out(j) = 0.0;
      continue;
    }
    const auto autocov = [&](Index lag) {
      return x.head(b - lag).dot(x.tail(b - lag)) / static_cast<double>(b);
    };
    // Geyer: sum consecutive-lag pairs while they stay positive.
    double tau = -1.0;
    for (Index lag = 0; lag + 1 < b; lag += 2) {
      const double pair = (autocov(lag) + autocov(lag + 1)) / c0;
      if (pair <= 0.0) break;
      tau += 2.0 * pair;
    }
    out(j) = static_cast<double>(b) / std::max(tau, 1.0 / static_cast<double>(b));
  }
  return out;
}

PointSummary summarize(const Matrix& draws, Index n) {
  if (draws.rows() < 2) throw ConfigError("summarize: need at least two draws");
  if (n < 1) throw ConfigError("summarize: sample size must be positive");
  PointSummary out;
  out.theta_hat = draws.colwise().mean().transpose();
  const Matrix centered = draws.rowwise() - out.theta_hat.transpose();
  const Matrix cov =
      symmetrize(centered.transpose() * centered / static_cast<double>(draws.rows()));

  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const double largest = eig.eigenvalues().maxCoeff();
  const double smallest = eig.eigenvalues().minCoeff();
  if (!(largest > 0.0) || smallest <= 1e-12 * largest) {
    std::ostringstream os;
    os << "summarize: draw covariance is singular (eigenvalue " << smallest
       << "); degenerate direction (";
    const Vector dir = eig.eigenvectors().col(0);
    for (Index j = 0; j < dir.size(); ++j) os << (j ? ", " : "") << dir(j);
    os << ")";
    throw NumericalError(os.str());
  }
  const Matrix inv = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
                     eig.eigenvectors().transpose();
  out.a_hat = symmetrize(inv / static_cast<double>(n));
  return out;
}

BroadcastSelection select_broadcast(const Matrix& draws, const Vector& theta_hat, Index n,
                                    std::size_t count) {
  const auto b = static_cast<std::size_t>(draws.rows());
  if (count < 1 || count > b) throw ConfigError("select_broadcast: need 1 <= B1 <= B");
  std::vector<double> dist(b);
  for (std::size_t i = 0; i < b; ++i) {
    dist[i] = (draws.row(static_cast<Index>(i)).transpose() - theta_hat).norm();
  }
  std::vector<Index> order(b);
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index c) {
    return dist[static_cast<std::size_t>(a)] < dist[static_cast<std::size_t>(c)];
  });
  // Repeated states (rejected proposals) count once.
  std::vector<Index> chosen;
  chosen.reserve(count);
  for (std::size_t i = 0; i < b && chosen.size() < count; ++i) {
    const Index cand = order[i];
    bool repeat = false;
    for (auto it = chosen.rbegin(); it != chosen.rend(); ++it) {
      if (dist[static_cast<std::size_t>(*it)] != dist[static_cast<std::size_t>(cand)]) break;
      if (draws.row(*it) == draws.row(cand)) {
        repeat = true;
        break;
      }
    }
    if (!repeat) chosen.push_back(cand);
  }
  if (chosen.size() < count) {
    throw NumericalError("select_broadcast: the chain visited only " +
                         std::to_string(chosen.size()) + " distinct points, fewer than B1 = " +
                         std::to_string(count));
  }
  order = std::move(chosen);

  BroadcastSelection out;
  out.indices = order;
  out.draws.resize(static_cast<Index>(count), draws.cols());
  double max_dist = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    out.draws.row(static_cast<Index>(k)) = draws.row(order[k]);
    max_dist = std::max(max_dist, dist[static_cast<std::size_t>(order[k])]);
  }
  out.c1_used = std::sqrt(static_cast<double>(n)) * max_dist;
  if (out.c1_used > defaults::c1_warning) {
    warn("broadcast draws reach " + format_double(out.c1_used) +
         "/sqrt(n) from the estimate; the quadratic approximation may be poor");
  }
  return out;
}

QuadFeatures quad_features(const Vector& theta_star, const Vector& theta_hat) {
  if (theta_star.size() != theta_hat.size()) {
    throw ConfigError("quad_features: dimension mismatch");
  }
  QuadFeatures out;
  out.delta = theta_star - theta_hat;
  out.outer = upper_triangle(out.delta * out.delta.transpose());
  return out;
}

Matrix delta_matrix(const Matrix& draws, const Vector& theta_hat) {
  return draws.rowwise() - theta_hat.transpose();
}

Matrix outer_feature_matrix(const Matrix& draws, const Vector& theta_hat) {
  const Index d = theta_hat.size();
  Matrix out(draws.rows(), triangle_size(d));
  for (Index j = 0; j < draws.rows(); ++j) {
    out.row(j) = quad_features(draws.row(j).transpose(), theta_hat).outer.transpose();
  }
  return out;
}

}  // namespace fedm
