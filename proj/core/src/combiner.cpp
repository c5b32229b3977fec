#include "fedm/combiner.hpp"

#include "fedm/numeric.hpp"
#include "fedm/random.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace fedm {

double chisq_upper_tail(double t, int d) {
  if (d < 1) throw ConfigError("chi-square degrees of freedom must be positive");
  if (std::isnan(t) || t < 0.0) throw ConfigError("chi-square statistic must be nonnegative");
  if (t == 0.0) return 1.0;
  if (std::isinf(t)) return 0.0;
  return boost::math::gamma_q(0.5 * d, 0.5 * t);
}

namespace {

Matrix checked_inverse(const Matrix& a, const char* what) {
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) throw NumericalError(std::string(what) + " is singular");
  return lu.inverse();
}

/// A^{-1} Sigma A^{-1}: covariance of sqrt(n) theta_hat_T.
Matrix target_sandwich(const TargetSummary& target) {
  const Matrix a_inv = checked_inverse(target.a_hat, "target curvature matrix A_T");
  return symmetrize(a_inv * target.sigma_s_hat * a_inv);
}

}  // namespace

Dissimilarity dissimilarity(const SourceSummary& source, const TargetSummary& target) {
  const Index d = target.dim();
  if (source.score.size() != d || source.a.rows() != d || source.sigma.rows() != d) {
    throw ConfigError("dissimilarity: source '" + source.site + "' has the wrong dimension");
  }
  if (!source.a_is_pd) {
    return {std::numeric_limits<double>::infinity(), 0.0};
  }
  const Matrix sandwich = target_sandwich(target);
  const double ratio = static_cast<double>(source.n) / static_cast<double>(target.n_target);
  const Matrix inner = symmetrize(source.sigma + ratio * source.a * sandwich * source.a);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(inner);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(lo > 0.0) || cond > 1e14) {
    std::ostringstream os;
    os << "dissimilarity: inner variance matrix for source '" << source.site
       << "' is singular (condition number " << cond << ")";
    throw NumericalError(os.str());
  }
  const Vector proj = eig.eigenvectors().transpose() * source.score;
  const double quad = (proj.array().square() / eig.eigenvalues().array()).sum();
  Dissimilarity out;
  out.t = static_cast<double>(source.n) * quad;
  out.p = chisq_upper_tail(out.t, static_cast<int>(d));
  return out;
}

OmegaMatrix assemble_omega(const TargetSummary& target, std::span<const SourceSummary> sources) {
  const Index d = target.dim();
  const auto k = static_cast<Index>(sources.size());
  const Matrix sandwich = target_sandwich(target);

  Matrix a_stack(d * k, d);
  for (Index s = 0; s < k; ++s) a_stack.middleRows(s * d, d) = sources[static_cast<std::size_t>(s)].a;

  OmegaMatrix out;
  out.d = d;
  out.sites = k;
  out.omega = Matrix::Zero(d * (k + 1), d * (k + 1));
  out.omega.topLeftCorner(d, d) = sandwich;
  if (k > 0) {
    out.omega.topRightCorner(d, d * k) = sandwich * a_stack.transpose();
    out.omega.bottomLeftCorner(d * k, d) = a_stack * sandwich;
    Matrix lower = a_stack * sandwich * a_stack.transpose();
    for (Index s = 0; s < k; ++s) {
      const auto& src = sources[static_cast<std::size_t>(s)];
      const double scale = static_cast<double>(target.n_target) / static_cast<double>(src.n);
      lower.block(s * d, s * d, d, d) += scale * src.sigma;
    }
    out.omega.bottomRightCorner(d * k, d * k) = lower;
  }
  out.omega = symmetrize(out.omega);
  if (!out.omega.allFinite()) throw NumericalError("assemble_omega: non-finite entries");

  const double base = defaults::omega_jitter * out.omega.trace() / static_cast<double>(out.dim());
  Eigen::LLT<Matrix> llt(out.omega);
  double jitter = base > 0.0 ? base : defaults::omega_jitter;
  int attempts = 0;
  while (llt.info() != Eigen::Success) {
    if (++attempts > 8) {
      throw NumericalError("assemble_omega: covariance is not positive semidefinite");
    }
    llt.compute(out.omega + jitter * Matrix::Identity(out.dim(), out.dim()));
    if (llt.info() == Eigen::Success) {
      out.jitter = jitter;
      break;
    }
    jitter *= 10.0;
  }
  return out;
}

Matrix draw_joint_samples(const Matrix& cov, std::size_t q, std::uint64_t seed) {
  if (q < 1) throw ConfigError("draw_joint_samples: need Q >= 1");
  const Index dim = cov.rows();
  Eigen::LDLT<Matrix> ldlt(symmetrize(cov));
  if (ldlt.info() != Eigen::Success) throw NumericalError("draw_joint_samples: factorization failed");
  Vector diag = ldlt.vectorD();
  const double scale = diag.cwiseAbs().maxCoeff();
  if ((diag.array() < -1e-10 * std::max(scale, 1.0)).any()) {
    throw NumericalError("draw_joint_samples: covariance is not positive semidefinite");
  }
  diag = diag.cwiseMax(0.0).cwiseSqrt();
  const Matrix lower = ldlt.matrixL();

  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal;
  Matrix z(dim, static_cast<Index>(q));
  for (Index s = 0; s < static_cast<Index>(q); ++s) {
    for (Index i = 0; i < dim; ++i) z(i, s) = normal(rng);
  }
  Matrix x = lower * (diag.asDiagonal() * z);
  x = ldlt.transpositionsP().transpose() * x;
  return x.transpose();
}

Matrix draw_joint_samples(const OmegaMatrix& omega, std::size_t q, std::uint64_t seed) {
  if (omega.jitter == 0.0) return draw_joint_samples(omega.omega, q, seed);
  return draw_joint_samples(
      Matrix(omega.omega + omega.jitter * Matrix::Identity(omega.dim(), omega.dim())), q, seed);
}

namespace {

struct Design {
  Matrix gram;    // X^T X / Q over active blocks
  Matrix cross;   // X^T Y / Q, one column per output coordinate
  std::vector<Index> active;
};

Design make_design(const Matrix& samples, Index d, const std::vector<bool>& excluded) {
  const Index cols = samples.cols();
  if (d < 1 || cols % d != 0 || cols / d < 1) {
    throw ConfigError("lasso: sample width is not a multiple of d");
  }
  const Index k = cols / d - 1;
  if (static_cast<Index>(excluded.size()) != k) {
    throw ConfigError("lasso: exclusion flags do not match the number of sites");
  }
  Design out;
  for (Index s = 0; s < k; ++s) {
    if (!excluded[static_cast<std::size_t>(s)]) out.active.push_back(s);
  }
  const auto a = static_cast<Index>(out.active.size());
  const double q = static_cast<double>(samples.rows());
  Matrix x(samples.rows(), a * d);
  for (Index j = 0; j < a; ++j) {
    x.middleCols(j * d, d) = samples.middleCols((out.active[static_cast<std::size_t>(j)] + 1) * d, d);
  }
  out.gram = symmetrize(x.transpose() * x / q);
  out.cross = x.transpose() * samples.leftCols(d) / q;
  return out;
}

std::vector<Matrix> unpack(const Matrix& coef, const Design& design, Index d, Index k) {
  std::vector<Matrix> out(static_cast<std::size_t>(k), Matrix::Zero(d, d));
  for (std::size_t j = 0; j < design.active.size(); ++j) {
    // column r of coef holds row r of every active Lambda_k
    out[static_cast<std::size_t>(design.active[j])] =
        coef.middleRows(static_cast<Index>(j) * d, d).transpose();
  }
  return out;
}

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

}  // namespace

std::vector<Matrix> adaptive_lasso(const Matrix& samples, Index d, std::span<const double> p_values,
                                   double lambda, const std::vector<bool>& excluded,
                                   const LassoOptions& options) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ConfigError("adaptive_lasso: lambda must be finite and nonnegative");
  }
  const Design design = make_design(samples, d, excluded);
  const Index k = samples.cols() / d - 1;
  if (static_cast<Index>(p_values.size()) != k) {
    throw ConfigError("adaptive_lasso: need one p-value per site");
  }
  const auto a = static_cast<Index>(design.active.size());
  const Index m = a * d;
  Vector penalty(m);
  for (Index j = 0; j < a; ++j) {
    const double p = p_values[static_cast<std::size_t>(design.active[static_cast<std::size_t>(j)])];
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("adaptive_lasso: p-values must lie in [0,1]");
    penalty.segment(j * d, d).setConstant(lambda / std::max(p, defaults::p_value_floor));
  }
  Matrix coef = Matrix::Zero(m, d);
  if (m == 0) return unpack(coef, design, d, k);
  const Matrix& g = design.gram;

  if (!options.group) {
    for (Index r = 0; r < d; ++r) {
      Vector b = Vector::Zero(m);
      const Vector c = design.cross.col(r);
      bool converged = false;
      for (std::size_t sweep = 0; sweep < options.max_sweeps; ++sweep) {
        double max_change = 0.0;
        for (Index j = 0; j < m; ++j) {
          const double gjj = g(j, j);
          if (!(gjj > 0.0)) {
            max_change = std::max(max_change, std::abs(b(j)));
            b(j) = 0.0;
            continue;
          }
          const double rho = c(j) - g.row(j).dot(b) + gjj * b(j);
          const double next = soft_threshold(rho, 0.5 * penalty(j)) / gjj;
          max_change = std::max(max_change, std::abs(next - b(j)));
          b(j) = next;
        }
        if (max_change < options.tolerance) {
          converged = true;
          break;
        }
      }
      if (!converged) {
        const Vector grad = 2.0 * (g * b - c);
        double violation = 0.0;
        for (Index j = 0; j < m; ++j) {
          violation = std::max(violation, b(j) != 0.0
                                              ? std::abs(grad(j) + penalty(j) * (b(j) > 0 ? 1 : -1))
                                              : std::max(0.0, std::abs(grad(j)) - penalty(j)));
        }
        std::ostringstream os;
        os << "adaptive_lasso: no convergence after " << options.max_sweeps
           << " sweeps (max KKT violation " << violation << ")";
        throw NumericalError(os.str());
      }
      coef.col(r) = b;
    }
    return unpack(coef, design, d, k);
  }

  // Group penalty lambda/p_k ||Lambda_k||_F: block proximal-gradient descent.
  std::vector<double> lipschitz(static_cast<std::size_t>(a));
  for (Index j = 0; j < a; ++j) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(g.block(j * d, j * d, d, d), Eigen::EigenvaluesOnly);
    lipschitz[static_cast<std::size_t>(j)] = 2.0 * std::max(eig.eigenvalues().maxCoeff(), 1e-300);
  }
  for (std::size_t sweep = 0; sweep < options.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Index j = 0; j < a; ++j) {
      const double lip = lipschitz[static_cast<std::size_t>(j)];
      const Matrix grad = 2.0 * (g.middleRows(j * d, d) * coef - design.cross.middleRows(j * d, d));
      const Matrix step = coef.middleRows(j * d, d) - grad / lip;
      const double norm = step.norm();
      const double shrink = norm > 0.0 ? std::max(0.0, 1.0 - penalty(j * d) / (lip * norm)) : 0.0;
      const Matrix next = shrink * step;
      max_change = std::max(max_change, (next - coef.middleRows(j * d, d)).cwiseAbs().maxCoeff());
      coef.middleRows(j * d, d) = next;
    }
    if (max_change < options.tolerance) return unpack(coef, design, d, k);
  }
  throw NumericalError("adaptive_lasso: group penalty did not converge after " +
                       std::to_string(options.max_sweeps) + " sweeps");
}

FullBorrow full_borrow_weights(const Matrix& samples, Index d, const std::vector<bool>& excluded) {
  const Design design = make_design(samples, d, excluded);
  const Index k = samples.cols() / d - 1;
  FullBorrow out;
  const Index m = design.gram.rows();
  if (m == 0) {
    out.lambdas = unpack(Matrix::Zero(0, d), design, d, k);
    return out;
  }
  Eigen::LDLT<Matrix> ldlt(design.gram);
  const Vector pivots = ldlt.vectorD().cwiseAbs();
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-12 ||
      pivots.minCoeff() <= 1e-12 * pivots.maxCoeff()) {
    out.ridge_fallback = true;
    warn("full-borrow design is singular; using ridge fallback");
    ldlt.compute(design.gram + defaults::ridge_fallback * Matrix::Identity(m, m));
  }
  out.lambdas = unpack(ldlt.solve(design.cross), design, d, k);
  return out;
}

Vector combine(const Vector& theta_hat, std::span<const Vector> scores,
               std::span<const Matrix> lambdas) {
  if (scores.size() != lambdas.size()) throw ConfigError("combine: need one weight per score");
  Vector out = theta_hat;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (scores[k].size() != theta_hat.size() || lambdas[k].rows() != theta_hat.size() ||
        lambdas[k].cols() != scores[k].size()) {
      throw ConfigError("combine: dimension mismatch");
    }
    out -= lambdas[k] * scores[k];
  }
  return out;
}

Matrix combined_variance(std::span<const Matrix> lambdas, const Matrix& omega) {
  const auto k = static_cast<Index>(lambdas.size());
  if (omega.rows() != omega.cols() || omega.rows() % (k + 1) != 0) {
    throw ConfigError("combined_variance: Omega does not match the number of sites");
  }
  const Index d = omega.rows() / (k + 1);
  Matrix stack(d * (k + 1), d);
  stack.topRows(d).setIdentity();
  for (Index s = 0; s < k; ++s) {
    const auto& l = lambdas[static_cast<std::size_t>(s)];
    if (l.rows() != d || l.cols() != d) throw ConfigError("combined_variance: weight is not d x d");
    stack.middleRows((s + 1) * d, d) = -l.transpose();
  }
  return symmetrize(stack.transpose() * omega * stack);
}

std::vector<Interval> wald_ci(const Vector& theta, const Matrix& var_root_n, Index n,
                              double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("wald_ci: alpha must lie in (0,1]");
  if (n < 1) throw ConfigError("wald_ci: n must be positive");
  if (var_root_n.rows() != theta.size() || var_root_n.cols() != theta.size()) {
    throw ConfigError("wald_ci: variance does not match theta");
  }
  const double z = alpha == 1.0 ? 0.0 : normal_quantile(1.0 - alpha / 2.0);
  std::vector<Interval> out;
  out.reserve(static_cast<std::size_t>(theta.size()));
  for (Index j = 0; j < theta.size(); ++j) {
    const double v = var_root_n(j, j);
    if (!(v >= 0.0)) {
      throw NumericalError("wald_ci: negative variance for coordinate " + std::to_string(j + 1));
    }
    const double half = z * std::sqrt(v / static_cast<double>(n));
    out.push_back({theta(j) - half, theta(j) + half});
  }
  return out;
}

double l1_norm(const Matrix& m) { return m.cwiseAbs().sum(); }

void CombinerConfig::validate() const {
  if (q < 1) throw ConfigError("combiner: Q must be at least 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("combiner: alpha must lie in (0,1]");
  if (lambda && (!(*lambda >= 0.0) || !std::isfinite(*lambda))) {
    throw ConfigError("combiner: lambda must be finite and nonnegative");
  }
}

namespace {

double cross_validated_lambda(const Matrix& samples, Index d, std::span<const double> p,
                              const std::vector<bool>& excluded, double n_target,
                              const LassoOptions& options) {
  const std::vector<double> grid = {std::pow(n_target, -0.25), std::pow(n_target, -0.5),
                                    1.0 / n_target};
  constexpr Index folds = 5;
  const Index q = samples.rows();
  if (q < 2 * folds) return grid[1];
  double best = grid[1];
  double best_err = std::numeric_limits<double>::infinity();
  for (const double lambda : grid) {
    double err = 0.0;
    for (Index f = 0; f < folds; ++f) {
      const Index lo = f * q / folds;
      const Index hi = (f + 1) * q / folds;
      Matrix train(q - (hi - lo), samples.cols());
      train << samples.topRows(lo), samples.bottomRows(q - hi);
      const Matrix test = samples.middleRows(lo, hi - lo);
      const auto lambdas = adaptive_lasso(train, d, p, lambda, excluded, options);
      for (Index s = 0; s < test.rows(); ++s) {
        Vector resid = test.row(s).head(d).transpose();
        for (std::size_t k = 0; k < lambdas.size(); ++k) {
          resid -= lambdas[k] * test.row(s).segment((static_cast<Index>(k) + 1) * d, d).transpose();
        }
        err += resid.squaredNorm();
      }
    }
    if (err < best_err) {
      best_err = err;
      best = lambda;
    }
  }
  return best;
}

}  // namespace

CombinedEstimate combine_at_target(const TargetSummary& target,
                                   std::vector<SourceSummary> sources,
                                   const CombinerConfig& config) {
  config.validate();
  const Index d = target.dim();
  if (d < 1 || target.n_target < 1) throw ConfigError("combiner: empty target summary");

  std::sort(sources.begin(), sources.end(),
            [](const SourceSummary& a, const SourceSummary& b) { return a.site < b.site; });
  for (std::size_t k = 1; k < sources.size(); ++k) {
    if (sources[k].site == sources[k - 1].site) {
      throw ProtocolError(ProtocolError::Fault::exchange,
                          "duplicate source site label '" + sources[k].site + "'");
    }
  }
  for (const auto& s : sources) {
    if (s.score.size() != d || s.a.rows() != d || s.a.cols() != d || s.sigma.rows() != d ||
        s.sigma.cols() != d) {
      throw ProtocolError(ProtocolError::Fault::schema,
                          "source '" + s.site + "' reply has the wrong dimension");
    }
  }

  CombinedEstimate out;
  out.n_target = target.n_target;
  out.alpha = config.alpha;

  const auto k = sources.size();
  std::vector<double> p(k, 0.0);
  std::vector<bool> excluded(k, false);
  std::vector<bool> unusable(k, false);
  auto& diag = out.diagnostics;
  for (std::size_t s = 0; s < k; ++s) {
    const auto& src = sources[s];
    diag.sites.push_back(src.site);
    Dissimilarity dis{std::numeric_limits<double>::infinity(), 0.0};
    if (!src.score.allFinite() || !src.a.allFinite() || !src.sigma.allFinite()) {
      unusable[s] = true;
    } else if (!src.a_is_pd) {
      diag.excluded_non_pd.push_back(src.site);
    } else {
      try {
        dis = dissimilarity(src, target);
      } catch (const NumericalError& e) {
        warn(e.what());
        unusable[s] = true;
      }
    }
    if (unusable[s]) diag.unusable.push_back(src.site);
    excluded[s] = std::isinf(dis.t);
    diag.t.push_back(dis.t);
    diag.p.push_back(dis.p);
    p[s] = dis.p;
  }

  // Unusable summaries are dropped from Omega entirely.
  std::vector<SourceSummary> kept;
  std::vector<std::size_t> kept_index;
  for (std::size_t s = 0; s < k; ++s) {
    if (!unusable[s]) {
      kept.push_back(sources[s]);
      kept_index.push_back(s);
    }
  }
  out.omega = assemble_omega(target, kept);
  const auto kk = kept.size();

  out.target_only.theta = target.theta_hat;
  out.target_only.variance = out.omega.target_block();
  out.target_only.ci = wald_ci(out.target_only.theta, out.target_only.variance, target.n_target,
                               config.alpha);

  std::vector<double> kept_p(kk);
  std::vector<bool> kept_excluded(kk), none_excluded(kk, false);
  std::vector<Vector> kept_scores(kk);
  for (std::size_t j = 0; j < kk; ++j) {
    kept_p[j] = p[kept_index[j]];
    kept_excluded[j] = excluded[kept_index[j]];
    kept_scores[j] = kept[j].score;
  }

  const Matrix samples = draw_joint_samples(out.omega, config.q, config.seed);
  LassoOptions options;
  options.group = config.group_lasso;
  if (config.lambda) {
    out.lambda = *config.lambda;
  } else if (config.lambda_cv) {
    out.lambda = cross_validated_lambda(samples, d, kept_p, kept_excluded,
                                        static_cast<double>(target.n_target), options);
  } else {
    out.lambda = 1.0 / std::sqrt(static_cast<double>(target.n_target));
  }

  const auto expand = [&](const std::vector<Matrix>& lambdas) {
    std::vector<Matrix> full(k, Matrix::Zero(d, d));
    for (std::size_t j = 0; j < kk; ++j) full[kept_index[j]] = lambdas[j];
    return full;
  };

  const auto transfer = adaptive_lasso(samples, d, kept_p, out.lambda, kept_excluded, options);
  out.transfer.theta = combine(target.theta_hat, kept_scores, transfer);
  out.transfer.variance = combined_variance(transfer, out.omega.omega);
  out.transfer.ci =
      wald_ci(out.transfer.theta, out.transfer.variance, target.n_target, config.alpha);
  out.transfer.lambdas = expand(transfer);

  const auto borrow = full_borrow_weights(samples, d, none_excluded);
  out.full_borrow_ridge = borrow.ridge_fallback;
  out.full_borrow.theta = combine(target.theta_hat, kept_scores, borrow.lambdas);
  out.full_borrow.variance = combined_variance(borrow.lambdas, out.omega.omega);
  out.full_borrow.ci =
      wald_ci(out.full_borrow.theta, out.full_borrow.variance, target.n_target, config.alpha);
  out.full_borrow.lambdas = expand(borrow.lambdas);
  return out;
}

}  // namespace fedm
