#include "fedm/model.hpp"

#include "fedm/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace fedm {

std::string_view to_string(PerturbScheme scheme) {
  switch (scheme) {
    case PerturbScheme::multinomial_bootstrap: return "multinomial";
    case PerturbScheme::jin_perturb: return "jin";
  }
  return "unknown";
}

PerturbScheme parse_perturb_scheme(std::string_view text) {
  if (text == "multinomial" || text == "multinomial-bootstrap") {
    return PerturbScheme::multinomial_bootstrap;
  }
  if (text == "jin" || text == "jin-perturb") return PerturbScheme::jin_perturb;
  throw ConfigError("unknown perturbation scheme '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Weights

WeightVector::WeightVector(Vector weights, PerturbScheme scheme)
    : weights_(std::move(weights)), scheme_(scheme) {
  if (weights_.size() == 0) throw ConfigError("weight vector is empty");
  if (!weights_.allFinite() || (weights_.array() < 0.0).any()) {
    throw ConfigError("weights must be finite and nonnegative");
  }
  if (scheme_ == PerturbScheme::multinomial_bootstrap) {
    double total = 0.0;
    for (const double w : weights_) {
      if (w != std::floor(w)) throw ConfigError("multinomial weights must be integers");
      total += w;
    }
    if (total != static_cast<double>(weights_.size())) {
      throw ConfigError("multinomial weights must sum to n");
    }
  }
}

WeightVector WeightVector::identity(Index n) {
  return WeightVector(Vector::Ones(n), PerturbScheme::multinomial_bootstrap);
}

namespace {

void draw_weights_into(double* out, Index n, PerturbScheme scheme, int degree, Rng& rng) {
  if (scheme == PerturbScheme::multinomial_bootstrap) {
    std::fill(out, out + n, 0.0);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    for (Index i = 0; i < n; ++i) out[pick(rng)] += 1.0;
  } else {
    // mean 1/D, variance 1
    const double d = static_cast<double>(degree);
    std::gamma_distribution<double> gamma(1.0 / (d * d), d);
    for (Index i = 0; i < n; ++i) out[i] = gamma(rng);
  }
}

}  // namespace

WeightVector WeightVector::draw(Index n, PerturbScheme scheme, int degree, Rng& rng) {
  if (n < 1) throw ConfigError("cannot draw weights for an empty dataset");
  if (degree < 1) throw ConfigError("degree must be at least 1");
  Vector w(n);
  draw_weights_into(w.data(), n, scheme, degree, rng);
  return WeightVector(std::move(w), scheme);
}

void draw_weight_matrix(Matrix& out, PerturbScheme scheme, int degree, Rng& rng) {
  // Rows are drawn one after another so a row's values depend only on the
  // generator state, never on the matrix shape.
  std::vector<double> row(static_cast<std::size_t>(out.cols()));
  for (Index r = 0; r < out.rows(); ++r) {
    draw_weights_into(row.data(), out.cols(), scheme, degree, rng);
    for (Index i = 0; i < out.cols(); ++i) out(r, i) = row[static_cast<std::size_t>(i)];
  }
}

// ---------------------------------------------------------------------------
// Problem base

namespace {

double binomial(Index n, int k) {
  double out = 1.0;
  for (int j = 0; j < k; ++j) out = out * static_cast<double>(n - j) / static_cast<double>(j + 1);
  return out;
}

double enumerate_impl(const Problem& problem, const Dataset& data, const Vector& theta,
                      const double* w, PerturbScheme scheme) {
  const int degree = problem.degree();
  const Index n = data.size();
  std::vector<Index> idx(static_cast<std::size_t>(degree));
  std::iota(idx.begin(), idx.end(), Index{0});
  CompensatedSum acc;
  while (true) {
    const double k = problem.kernel(data, idx, theta);
    if (w == nullptr) {
      acc.add(k);
    } else if (scheme == PerturbScheme::multinomial_bootstrap) {
      double f = 1.0;
      for (const Index i : idx) f *= w[i];
      acc.add(f * k);
    } else {
      double f = 0.0;
      for (const Index i : idx) f += w[i];
      acc.add(f * k);
    }
    // next combination in lexicographic order
    int pos = degree - 1;
    while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == n - degree + pos) --pos;
    if (pos < 0) break;
    ++idx[static_cast<std::size_t>(pos)];
    for (int j = pos + 1; j < degree; ++j) {
      idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
  return acc.value() / binomial(n, degree);
}

}  // namespace

Vector Problem::initial_point(const Dataset&) const { return Vector::Zero(param_dim()); }

double Problem::enumerate(const Dataset& data, const Vector& theta,
                          const WeightVector* weights) const {
  if (weights == nullptr) {
    return enumerate_impl(*this, data, theta, nullptr, PerturbScheme::multinomial_bootstrap);
  }
  return enumerate_impl(*this, data, theta, weights->weights().data(), weights->scheme());
}

double Problem::objective(const Dataset& data, const Vector& theta) const {
  return enumerate(data, theta, nullptr);
}

double Problem::perturbed_objective(const Dataset& data, const Vector& theta,
                                    const WeightVector& weights) const {
  return enumerate(data, theta, &weights);
}

Vector Problem::perturbed_objectives(const Dataset& data, const Vector& theta,
                                     const Matrix& weights, PerturbScheme scheme) const {
  Vector out(weights.rows());
  Vector row(weights.cols());
  for (Index r = 0; r < weights.rows(); ++r) {
    row = weights.row(r).transpose();
    out(r) = enumerate_impl(*this, data, theta, row.data(), scheme);
  }
  return out;
}

void Problem::check_data(const Dataset& data) const {
  if (covariate_dim() != 0 && data.dim() != covariate_dim()) {
    throw DataError("dataset '" + data.label() + "' has " + std::to_string(data.dim()) +
                    " covariates; " + name() + " problem expects " +
                    std::to_string(covariate_dim()));
  }
  if (data.size() < degree()) {
    throw ConfigError("dataset '" + data.label() + "' has " + std::to_string(data.size()) +
                      " rows, fewer than the kernel degree " + std::to_string(degree()));
  }
}

bool Problem::in_domain(const Vector& theta) const {
  return theta.size() == param_dim() && theta.allFinite() && theta.norm() <= radius();
}

void Problem::check_theta(const Vector& theta) const {
  if (theta.size() != param_dim()) {
    throw ConfigError("parameter has length " + std::to_string(theta.size()) + ", expected " +
                      std::to_string(param_dim()));
  }
  if (!theta.allFinite() || theta.norm() > radius()) {
    throw ConfigError("parameter outside the domain ball of radius " +
                      format_double(radius()));
  }
}

double eval_objective(const Problem& problem, const Dataset& data, const Vector& theta) {
  problem.check_data(data);
  problem.check_theta(theta);
  return problem.objective(data, theta);
}

double eval_perturbed_objective(const Problem& problem, const Dataset& data,
                                const Vector& theta, const WeightVector& weights) {
  problem.check_data(data);
  problem.check_theta(theta);
  if (weights.size() != data.size()) {
    throw ConfigError("weight vector length " + std::to_string(weights.size()) +
                      " does not match dataset size " + std::to_string(data.size()));
  }
  return problem.perturbed_objective(data, theta, weights);
}

// ---------------------------------------------------------------------------
// Quantile regression

QuantileProblem::QuantileProblem(double tau, Index p, double radius)
    : tau_(tau), p_(p), radius_(radius) {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("quantile level tau must lie in (0,1)");
  if (p < 1) throw ConfigError("quantile problem needs at least one covariate");
  if (!(radius > 0.0)) throw ConfigError("domain radius must be positive");
}

double QuantileProblem::kernel(const Dataset& data, std::span<const Index> rows,
                               const Vector& theta) const {
  const Index i = rows[0];
  return check_loss(data.y()(i) - data.z().row(i).dot(theta), tau_);
}

Vector QuantileProblem::initial_point(const Dataset& data) const {
  Vector beta = data.z().colPivHouseholderQr().solve(data.y());
  if (!beta.allFinite()) beta.setZero();
  const double norm = beta.norm();
  if (norm >= radius_) beta *= 0.9 * radius_ / norm;
  return beta;
}

double QuantileProblem::weighted_mean_loss(const Dataset& data, const Vector& theta,
                                           const Vector* weights) const {
  const Vector residual = data.y() - data.z() * theta;
  CompensatedSum acc;
  if (weights == nullptr) {
    for (Index i = 0; i < residual.size(); ++i) acc.add(check_loss(residual(i), tau_));
  } else {
    for (Index i = 0; i < residual.size(); ++i) {
      acc.add((*weights)(i) * check_loss(residual(i), tau_));
    }
  }
  return acc.value() / static_cast<double>(data.size());
}

double QuantileProblem::objective(const Dataset& data, const Vector& theta) const {
  return weighted_mean_loss(data, theta, nullptr);
}

double QuantileProblem::perturbed_objective(const Dataset& data, const Vector& theta,
                                            const WeightVector& weights) const {
  // With D = 1 both schemes reduce to sum_i W_i h(x_i).
  return weighted_mean_loss(data, theta, &weights.weights());
}

Vector QuantileProblem::perturbed_objectives(const Dataset& data, const Vector& theta,
                                             const Matrix& weights, PerturbScheme) const {
  const Vector residual = data.y() - data.z() * theta;
  const Vector loss = residual.unaryExpr([tau = tau_](double u) { return check_loss(u, tau); });
  return (weights * loss) / static_cast<double>(data.size());
}

Vector QuantileProblem::score(const Dataset& data, const Vector& beta) const {
  const Vector fitted = data.z() * beta;
  Vector out = Vector::Zero(p_);
  for (Index i = 0; i < data.size(); ++i) {
    const double ind = data.y()(i) < fitted(i) ? 1.0 : 0.0;
    out += data.z().row(i).transpose() * (ind - tau_);
  }
  return out / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// AUC maximization

namespace {

/// Rows sorted by linear score (descending, ties by row index) together with
/// tie groups and dense outcome ranks; enough to count discordant ordered
/// pairs {y_i > y_j, s_i <= s_j} in O(n log n).
struct PairOrder {
  std::vector<Index> order;
  std::vector<std::size_t> group_start;  // positions in `order`, plus a sentinel
  std::vector<int> rank;                 // dense rank of y, by row
  int levels = 0;
};

PairOrder make_pair_order(const Vector& score, const Vector& y) {
  const Index n = score.size();
  PairOrder po;
  po.order.resize(static_cast<std::size_t>(n));
  std::iota(po.order.begin(), po.order.end(), Index{0});
  std::stable_sort(po.order.begin(), po.order.end(),
                   [&](Index a, Index b) { return score(a) > score(b); });
  for (std::size_t k = 0; k < po.order.size(); ++k) {
    if (k == 0 || score(po.order[k]) != score(po.order[k - 1])) po.group_start.push_back(k);
  }
  po.group_start.push_back(po.order.size());

  std::vector<double> levels(y.data(), y.data() + n);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  po.levels = static_cast<int>(levels.size());
  po.rank.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    po.rank[static_cast<std::size_t>(i)] = static_cast<int>(
        std::lower_bound(levels.begin(), levels.end(), y(i)) - levels.begin());
  }
  return po;
}

template <class T>
class Fenwick {
 public:
  explicit Fenwick(int size) : tree_(static_cast<std::size_t>(size) + 1, T{}) {}
  void add(int pos, T value) {
    for (int i = pos + 1; i < static_cast<int>(tree_.size()); i += i & -i) {
      tree_[static_cast<std::size_t>(i)] += value;
    }
  }
  /// Sum over positions [0, pos).
  T prefix(int pos) const {
    T s{};
    for (int i = pos; i > 0; i -= i & -i) s += tree_[static_cast<std::size_t>(i)];
    return s;
  }

 private:
  std::vector<T> tree_;
};

std::int64_t discordant_count(const PairOrder& po) {
  Fenwick<std::int64_t> tree(po.levels);
  std::int64_t total = 0;
  for (std::size_t g = 0; g + 1 < po.group_start.size(); ++g) {
    for (std::size_t k = po.group_start[g]; k < po.group_start[g + 1]; ++k) {
      tree.add(po.rank[static_cast<std::size_t>(po.order[k])], 1);
    }
    for (std::size_t k = po.group_start[g]; k < po.group_start[g + 1]; ++k) {
      total += tree.prefix(po.rank[static_cast<std::size_t>(po.order[k])]);
    }
  }
  return total;
}

/// Weighted sum over discordant ordered pairs (i, j) of W_i W_j (multinomial)
/// or W_i + W_j (jin).
double discordant_weighted(const PairOrder& po, const double* w, PerturbScheme scheme) {
  Fenwick<double> wsum(po.levels);
  Fenwick<double> count(po.levels);
  const bool additive = scheme == PerturbScheme::jin_perturb;
  CompensatedSum total;
  for (std::size_t g = 0; g + 1 < po.group_start.size(); ++g) {
    for (std::size_t k = po.group_start[g]; k < po.group_start[g + 1]; ++k) {
      const Index j = po.order[k];
      wsum.add(po.rank[static_cast<std::size_t>(j)], w[j]);
      if (additive) count.add(po.rank[static_cast<std::size_t>(j)], 1.0);
    }
    for (std::size_t k = po.group_start[g]; k < po.group_start[g + 1]; ++k) {
      const Index i = po.order[k];
      const int r = po.rank[static_cast<std::size_t>(i)];
      if (additive) {
        total.add(w[i] * count.prefix(r) + wsum.prefix(r));
      } else {
        total.add(w[i] * wsum.prefix(r));
      }
    }
  }
  return total.value();
}

}  // namespace

AucProblem::AucProblem(Index p_plus_one, double radius)
    : p_plus_one_(p_plus_one), radius_(radius) {
  if (p_plus_one < 2) throw ConfigError("AUC problem needs at least two covariates");
  if (!(radius > 0.0 && radius < 1.0)) {
    throw ConfigError("AUC domain radius must lie in (0,1) for the unit-norm parameterization");
  }
}

Vector AucProblem::coefficients(const Vector& theta) const {
  Vector beta(p_plus_one_);
  beta(0) = std::sqrt(std::max(0.0, 1.0 - theta.squaredNorm()));
  beta.tail(p_plus_one_ - 1) = theta;
  return beta;
}

double AucProblem::kernel(const Dataset& data, std::span<const Index> rows,
                          const Vector& theta) const {
  const Vector beta = coefficients(theta);
  const Index a = rows[0];
  const Index b = rows[1];
  const double sa = data.z().row(a).dot(beta);
  const double sb = data.z().row(b).dot(beta);
  const double ya = data.y()(a);
  const double yb = data.y()(b);
  double h = 0.0;
  if (ya > yb && sa <= sb) h += 1.0;
  if (yb > ya && sb <= sa) h += 1.0;
  return 0.5 * h;
}

double AucProblem::objective(const Dataset& data, const Vector& theta) const {
  const Vector score = data.z() * coefficients(theta);
  const auto po = make_pair_order(score, data.y());
  const double n = static_cast<double>(data.size());
  return static_cast<double>(discordant_count(po)) / (n * (n - 1.0));
}

double AucProblem::perturbed_objective(const Dataset& data, const Vector& theta,
                                       const WeightVector& weights) const {
  const Vector score = data.z() * coefficients(theta);
  const auto po = make_pair_order(score, data.y());
  const double n = static_cast<double>(data.size());
  return discordant_weighted(po, weights.weights().data(), weights.scheme()) / (n * (n - 1.0));
}

Vector AucProblem::perturbed_objectives(const Dataset& data, const Vector& theta,
                                        const Matrix& weights, PerturbScheme scheme) const {
  const Vector score = data.z() * coefficients(theta);
  const auto po = make_pair_order(score, data.y());
  const double n = static_cast<double>(data.size());
  Vector out(weights.rows());
  Vector row(weights.cols());
  for (Index r = 0; r < weights.rows(); ++r) {
    row = weights.row(r).transpose();
    out(r) = discordant_weighted(po, row.data(), scheme) / (n * (n - 1.0));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quadratic oracle

QuadraticProblem::QuadraticProblem(Vector mu, Matrix a, double radius)
    : mu_(std::move(mu)), a_(std::move(a)), radius_(radius) {
  if (mu_.size() < 1) throw ConfigError("quadratic problem needs d >= 1");
  if (a_.rows() != mu_.size() || a_.cols() != mu_.size()) {
    throw ConfigError("quadratic problem: A must be d x d");
  }
  if (!(radius > 0.0)) throw ConfigError("domain radius must be positive");
}

double QuadraticProblem::value(const Vector& theta) const {
  const Vector diff = theta - mu_;
  return 0.5 * diff.dot(a_ * diff);
}

double QuadraticProblem::kernel(const Dataset&, std::span<const Index>,
                                const Vector& theta) const {
  return value(theta);
}

double QuadraticProblem::objective(const Dataset&, const Vector& theta) const {
  return value(theta);
}

double QuadraticProblem::perturbed_objective(const Dataset& data, const Vector& theta,
                                             const WeightVector& weights) const {
  return value(theta) * (weights.weights().sum() / static_cast<double>(data.size()));
}

Vector QuadraticProblem::perturbed_objectives(const Dataset& data, const Vector& theta,
                                              const Matrix& weights, PerturbScheme) const {
  const Vector totals = weights.rowwise().sum();
  return totals * (value(theta) / static_cast<double>(data.size()));
}

// ---------------------------------------------------------------------------

KernelProblem::KernelProblem(std::string name, int degree, Index param_dim, double radius,
                             KernelFn kernel)
    : name_(std::move(name)),
      degree_(degree),
      param_dim_(param_dim),
      radius_(radius),
      kernel_(std::move(kernel)) {
  if (degree_ < 1) throw ConfigError("kernel degree must be at least 1");
  if (param_dim_ < 1) throw ConfigError("parameter dimension must be at least 1");
  if (!(radius_ > 0.0)) throw ConfigError("domain radius must be positive");
  if (!kernel_) throw ConfigError("kernel function is empty");
}

std::shared_ptr<const QuantileProblem> quantile_problem(double tau, Index p, double radius) {
  return std::make_shared<const QuantileProblem>(tau, p, radius);
}

std::shared_ptr<const AucProblem> auc_problem(Index p_plus_one, double radius) {
  return std::make_shared<const AucProblem>(p_plus_one, radius);
}

std::shared_ptr<const QuadraticProblem> quadratic_problem(Vector mu, Matrix a, double radius) {
  return std::make_shared<const QuadraticProblem>(std::move(mu), std::move(a), radius);
}

Dataset placeholder_dataset(Index n, std::string label) {
  return Dataset(std::move(label), Vector::Zero(n), Matrix::Zero(n, 1));
}

}  // namespace fedm
