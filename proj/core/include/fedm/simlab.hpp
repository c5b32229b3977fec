#pragma once

#include "fedm/dataset.hpp"
#include "fedm/orchestrate.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fedm {

enum class Example { quantile, auc };
enum class Setting { I, II, III };

std::string_view to_string(Example example);
std::string_view to_string(Setting setting);
Example parse_example(std::string_view text);
Setting parse_setting(std::string_view text);

/// Generating parameters of one site. Site 0 is the target; sources are
/// numbered 1..K.
struct SiteModel {
  Vector beta;           ///< 5 coefficients (unit norm for the AUC example)
  double sigma = 1.0;    ///< noise SD (quantile) or covariate scale (AUC)
  Index n = 0;
  bool poisson = false;  ///< AUC only: Poisson instead of Bernoulli outcome
  bool eligible = true;  ///< shares the target's parameter
};

/// Number of source sites K in a setting.
Index source_count(Example example, Setting setting);
SiteModel site_model(Example example, Setting setting, Index site, Index n);

/// Unit-norm coefficients with a positive first entry fixed by the other four.
Vector unit_norm_first(const Vector& tail);

/// The AUC covariate correlation 0.1^{|i-j|}.
Matrix auc_covariate_correlation(Index p);

Dataset gen_quantile_site(Setting setting, Index site, Index n, std::uint64_t seed);
Dataset gen_auc_site(Setting setting, Index site, Index n, std::uint64_t seed);
Dataset gen_site(Example example, Setting setting, Index site, Index n, std::uint64_t seed);

/// The estimand in theta coordinates: beta_T for quantile regression and
/// beta_T without its first entry for AUC.
Vector true_theta(Example example);
/// 1-based index into beta of theta coordinate j (0-based).
Index beta_index(Example example, Index j);

ProblemPtr simulation_problem(Example example);

struct SimulationSpec {
  Example example = Example::quantile;
  Setting setting = Setting::I;
  Index n = 1000;
  std::size_t reps = 100;
  std::uint64_t seed = defaults::seed;
  std::size_t jobs = 1;
  bool heavy = false;                  ///< allow AUC runs with n > 1000
  std::optional<PipelineConfig> pipeline;  ///< problem defaults when unset

  void validate() const;
};

enum class Method { target, transfer, full_borrow };
std::string_view to_string(Method method);

struct CoordinateResult {
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool covered = false;
  double width() const noexcept { return hi - lo; }
};

struct SiteResult {
  std::string site;
  bool eligible = true;
  double t = 0.0;
  double p = 0.0;
  double lambda_l1 = 0.0;  ///< zero means the site was not borrowed from
};

struct RepResult {
  std::size_t rep = 0;
  bool failed = false;
  std::string error;
  /// Indexed by Method, then theta coordinate.
  std::vector<std::vector<CoordinateResult>> methods;
  std::vector<SiteResult> sites;
  double lambda = 0.0;
  double c1_used = 0.0;
};

/// One replicate: data for every site from stream(seed, rep), then a full
/// federated run. Failures are captured, not thrown.
RepResult run_replicate(const SimulationSpec& spec, std::size_t rep);

struct CoverageRow {
  Method method = Method::target;
  Index coordinate = 0;  ///< 1-based index into beta
  Index n = 0;
  std::size_t reps = 0;
  double coverage = 0.0;  ///< percent of successful replicates
  double mean_width = 0.0;
  std::size_t failures = 0;
};

struct SimulationResult {
  SimulationSpec spec;
  std::vector<RepResult> reps;
  std::vector<CoverageRow> coverage;
};

/// Replicates run on `spec.jobs` threads; results do not depend on the
/// thread count.
SimulationResult run_replications(const SimulationSpec& spec);

std::vector<CoverageRow> summarize_coverage(const SimulationSpec& spec,
                                            const std::vector<RepResult>& reps);

/// `coverage_<example>_<setting>.csv`
std::string coverage_file_name(const SimulationSpec& spec);
void write_coverage_csv(std::ostream& out, const std::vector<CoverageRow>& rows);
/// Whitespace-separated rows (rep, method, coordinate, estimate, lo, hi,
/// covered, width) followed by per-site rows, readable by gnuplot.
void write_long_format(std::ostream& out, const SimulationResult& result);

}  // namespace fedm
