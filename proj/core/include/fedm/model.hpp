#pragma once

#include "fedm/common.hpp"
#include "fedm/dataset.hpp"
#include "fedm/random.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>

namespace fedm {

enum class PerturbScheme {
  multinomial_bootstrap,  ///< W ~ Multinomial(n, 1/n); kernel weighted by the product of W's
  jin_perturb,            ///< W iid Gamma(1/D^2, D); kernel weighted by the sum of W's
};

std::string_view to_string(PerturbScheme scheme);
PerturbScheme parse_perturb_scheme(std::string_view text);

/// Random observation weights for a perturbed objective.
class WeightVector {
 public:
  /// Validates the scheme invariants (nonnegative; multinomial entries are
  /// integers summing to n).
  WeightVector(Vector weights, PerturbScheme scheme);

  /// All ones under the multinomial scheme: the unperturbed objective.
  static WeightVector identity(Index n);
  static WeightVector draw(Index n, PerturbScheme scheme, int degree, Rng& rng);

  const Vector& weights() const noexcept { return weights_; }
  PerturbScheme scheme() const noexcept { return scheme_; }
  Index size() const noexcept { return weights_.size(); }

 private:
  Vector weights_;
  PerturbScheme scheme_;
};

/// Fills row r of `out` (R x n) with one weight draw per row.
void draw_weight_matrix(Matrix& out, PerturbScheme scheme, int degree, Rng& rng);

/// An M-estimation problem whose objective is a complete U-statistic of
/// degree D over the rows of a dataset, with a kernel symmetric in its D
/// observation arguments, restricted to the ball ||theta|| <= R.
///
/// Implementations are immutable and safe to share across threads. The
/// default evaluation hooks enumerate all C(n, D) row tuples; concrete
/// problems override them with exact faster evaluations.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::string name() const = 0;
  virtual int degree() const = 0;
  virtual Index param_dim() const = 0;
  /// Required covariate count of datasets, or 0 if any count is accepted.
  virtual Index covariate_dim() const { return 0; }
  virtual double radius() const = 0;

  virtual double kernel(const Dataset& data, std::span<const Index> rows,
                        const Vector& theta) const = 0;

  /// Full coefficient vector for a parameter value (identity by default).
  virtual Vector coefficients(const Vector& theta) const { return theta; }

  /// Starting point for sampling; inside the domain ball.
  virtual Vector initial_point(const Dataset& data) const;

  virtual double objective(const Dataset& data, const Vector& theta) const;
  virtual double perturbed_objective(const Dataset& data, const Vector& theta,
                                     const WeightVector& weights) const;
  /// Perturbed objective at one theta for each row of `weights` (R x n).
  virtual Vector perturbed_objectives(const Dataset& data, const Vector& theta,
                                      const Matrix& weights, PerturbScheme scheme) const;

  /// Reference evaluation: the complete U-statistic by explicit enumeration
  /// of every unordered D-tuple. `weights` may be null.
  double enumerate(const Dataset& data, const Vector& theta,
                   const WeightVector* weights) const;

  void check_data(const Dataset& data) const;
  void check_theta(const Vector& theta) const;
  bool in_domain(const Vector& theta) const;
};

using ProblemPtr = std::shared_ptr<const Problem>;

/// Checked entry points: reject out-of-domain theta, n < D and weight-length
/// mismatches before evaluating.
double eval_objective(const Problem& problem, const Dataset& data, const Vector& theta);
double eval_perturbed_objective(const Problem& problem, const Dataset& data,
                                const Vector& theta, const WeightVector& weights);

/// Check loss u (tau - 1{u < 0}).
inline double check_loss(double u, double tau) noexcept {
  return u * (tau - (u < 0.0 ? 1.0 : 0.0));
}

class QuantileProblem final : public Problem {
 public:
  QuantileProblem(double tau, Index p, double radius);

  std::string name() const override { return "quantile"; }
  int degree() const override { return 1; }
  Index param_dim() const override { return p_; }
  Index covariate_dim() const override { return p_; }
  double radius() const override { return radius_; }
  double tau() const noexcept { return tau_; }

  double kernel(const Dataset& data, std::span<const Index> rows,
                const Vector& theta) const override;
  /// Least-squares fit, pulled back inside the ball if necessary.
  Vector initial_point(const Dataset& data) const override;
  double objective(const Dataset& data, const Vector& theta) const override;
  double perturbed_objective(const Dataset& data, const Vector& theta,
                             const WeightVector& weights) const override;
  Vector perturbed_objectives(const Dataset& data, const Vector& theta, const Matrix& weights,
                              PerturbScheme scheme) const override;

  /// Analytic score n^{-1} sum z_i (1{y_i < beta^T z_i} - tau).
  Vector score(const Dataset& data, const Vector& beta) const;

 private:
  double weighted_mean_loss(const Dataset& data, const Vector& theta,
                            const Vector* weights) const;

  double tau_;
  Index p_;
  double radius_;
};

/// AUC maximization over unit-norm coefficients beta(theta) =
/// (sqrt(1 - ||theta||^2), theta). The objective counts discordant ordered
/// pairs; ties in the linear score count as discordant.
class AucProblem final : public Problem {
 public:
  AucProblem(Index p_plus_one, double radius);

  std::string name() const override { return "auc"; }
  int degree() const override { return 2; }
  Index param_dim() const override { return p_plus_one_ - 1; }
  Index covariate_dim() const override { return p_plus_one_; }
  double radius() const override { return radius_; }

  double kernel(const Dataset& data, std::span<const Index> rows,
                const Vector& theta) const override;
  Vector coefficients(const Vector& theta) const override;
  double objective(const Dataset& data, const Vector& theta) const override;
  double perturbed_objective(const Dataset& data, const Vector& theta,
                             const WeightVector& weights) const override;
  Vector perturbed_objectives(const Dataset& data, const Vector& theta, const Matrix& weights,
                              PerturbScheme scheme) const override;

 private:
  Index p_plus_one_;
  double radius_;
};

/// M(theta) = 1/2 (theta - mu)^T A (theta - mu), independent of the data.
/// Its quasi-posterior is exactly N(mu, (nA)^{-1}) truncated to the ball.
class QuadraticProblem final : public Problem {
 public:
  QuadraticProblem(Vector mu, Matrix a, double radius);

  std::string name() const override { return "quadratic"; }
  int degree() const override { return 1; }
  Index param_dim() const override { return mu_.size(); }
  double radius() const override { return radius_; }
  const Vector& mu() const noexcept { return mu_; }
  const Matrix& a() const noexcept { return a_; }

  double kernel(const Dataset& data, std::span<const Index> rows,
                const Vector& theta) const override;
  double objective(const Dataset& data, const Vector& theta) const override;
  double perturbed_objective(const Dataset& data, const Vector& theta,
                             const WeightVector& weights) const override;
  Vector perturbed_objectives(const Dataset& data, const Vector& theta, const Matrix& weights,
                              PerturbScheme scheme) const override;

 private:
  double value(const Vector& theta) const;

  Vector mu_;
  Matrix a_;
  double radius_;
};

/// A problem defined by an arbitrary symmetric kernel; evaluation always goes
/// through the enumeration path.
class KernelProblem final : public Problem {
 public:
  using KernelFn =
      std::function<double(const Dataset&, std::span<const Index>, const Vector&)>;

  KernelProblem(std::string name, int degree, Index param_dim, double radius, KernelFn kernel);

  std::string name() const override { return name_; }
  int degree() const override { return degree_; }
  Index param_dim() const override { return param_dim_; }
  double radius() const override { return radius_; }
  double kernel(const Dataset& data, std::span<const Index> rows,
                const Vector& theta) const override {
    return kernel_(data, rows, theta);
  }

 private:
  std::string name_;
  int degree_;
  Index param_dim_;
  double radius_;
  KernelFn kernel_;
};

std::shared_ptr<const QuantileProblem> quantile_problem(double tau, Index p, double radius);
std::shared_ptr<const AucProblem> auc_problem(Index p_plus_one, double radius);
std::shared_ptr<const QuadraticProblem> quadratic_problem(Vector mu, Matrix a, double radius);

/// A dataset of n placeholder rows (y = 0, one zero covariate) for problems
/// whose objective does not depend on observations.
Dataset placeholder_dataset(Index n, std::string label = "synthetic");

}  // namespace fedm
