#include "fedm/simlab.hpp"

#include "helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace fedm;

namespace {

SimulationSpec small_spec(std::size_t reps, std::size_t jobs) {
  SimulationSpec spec;
  spec.example = Example::quantile;
  spec.setting = Setting::I;
  spec.n = 200;
  spec.reps = reps;
  spec.seed = 99;
  spec.jobs = jobs;
  PipelineConfig p = pipeline_defaults(*simulation_problem(spec.example));
  p.sampler.draws = 1500;
  p.sampler.burn_in = 800;
  p.perturb.replicates = 60;
  p.combiner.q = 1000;
  spec.pipeline = p;
  return spec;
}

std::string coverage_csv(const SimulationResult& r) {
  std::ostringstream os;
  write_coverage_csv(os, r.coverage);
  return os.str();
}

}  // namespace

TEST(Simlab, QuantileParameterTables) {
  EXPECT_EQ(source_count(Example::quantile, Setting::I), 4);
  EXPECT_EQ(source_count(Example::quantile, Setting::II), 4);
  EXPECT_EQ(source_count(Example::quantile, Setting::III), 6);

  Vector target(5);
  target << -1, 1, 0.5, 0, 0;
  EXPECT_EQ(site_model(Example::quantile, Setting::I, 0, 100).beta, target);
  EXPECT_EQ(site_model(Example::quantile, Setting::I, 2, 100).beta, target);
  Vector s3(5);
  s3 << -1.25, 0.75, 0.25, -0.25, -0.25;
  EXPECT_EQ(site_model(Example::quantile, Setting::I, 3, 100).beta, s3);
  EXPECT_FALSE(site_model(Example::quantile, Setting::I, 4, 100).eligible);
  EXPECT_DOUBLE_EQ(site_model(Example::quantile, Setting::II, 3, 100).beta(0), -0.5);
  EXPECT_DOUBLE_EQ(site_model(Example::quantile, Setting::III, 3, 100).sigma, 1.5);
  EXPECT_EQ(site_model(Example::quantile, Setting::III, 4, 100).n, 50);
  EXPECT_TRUE(site_model(Example::quantile, Setting::III, 4, 100).eligible);
  EXPECT_FALSE(site_model(Example::quantile, Setting::III, 5, 100).eligible);
}

TEST(Simlab, AucParameterTables) {
  EXPECT_EQ(source_count(Example::auc, Setting::I), 4);
  EXPECT_EQ(source_count(Example::auc, Setting::II), 6);
  for (Setting s : {Setting::I, Setting::II, Setting::III}) {
    for (Index k = 0; k <= source_count(Example::auc, s); ++k) {
      EXPECT_NEAR(site_model(Example::auc, s, k, 100).beta.norm(), 1.0, 1e-14);
      EXPECT_GT(site_model(Example::auc, s, k, 100).beta(0), 0.0);
    }
  }
  EXPECT_DOUBLE_EQ(site_model(Example::auc, Setting::I, 0, 100).sigma, 1.5);
  EXPECT_DOUBLE_EQ(site_model(Example::auc, Setting::II, 3, 100).sigma, 1.0);
  EXPECT_TRUE(site_model(Example::auc, Setting::III, 3, 100).poisson);
  EXPECT_FALSE(site_model(Example::auc, Setting::III, 5, 100).eligible);
  const Vector truth = true_theta(Example::auc);
  ASSERT_EQ(truth.size(), 4);
  EXPECT_DOUBLE_EQ(truth(0), -0.5);
  EXPECT_EQ(beta_index(Example::auc, 0), 2);
  EXPECT_EQ(beta_index(Example::quantile, 0), 1);
}

TEST(Simlab, UnitNormFirst) {
  Vector tail(2);
  tail << 0.6, 0.0;
  const Vector b = unit_norm_first(tail);
  EXPECT_DOUBLE_EQ(b(0), 0.8);
  EXPECT_THROW(unit_norm_first(Vector::Ones(2)), ConfigError);
}

TEST(Simlab, AucCovariatesHaveTheStatedCorrelation) {
  const Dataset data = gen_auc_site(Setting::I, 0, 100000, 4);
  const Matrix& z = data.z();
  const Vector mean = z.colwise().mean().transpose();
  const Matrix c = z.rowwise() - mean.transpose();
  const Matrix cov = c.transpose() * c / static_cast<double>(z.rows()) / (1.5 * 1.5);
  EXPECT_LT((cov - auc_covariate_correlation(5)).cwiseAbs().maxCoeff(), 0.02);
  for (Index i = 0; i < data.size(); ++i) {
    EXPECT_TRUE(data.y()(i) == 0.0 || data.y()(i) == 1.0);
  }
}

TEST(Simlab, QuantileNoiseMatchesTheSiteModel) {
  const Dataset data = gen_quantile_site(Setting::III, 3, 50000, 5);
  const Vector beta = site_model(Example::quantile, Setting::III, 3, 10).beta;
  const Vector resid = data.y() - data.z() * beta;
  const double sd = std::sqrt((resid.array() - resid.mean()).square().mean());
  EXPECT_NEAR(sd, 1.5, 0.02);
  EXPECT_EQ(data.label(), "site3");
}

TEST(Simlab, InvalidSiteAndSpec) {
  EXPECT_THROW(site_model(Example::quantile, Setting::I, 5, 100), ConfigError);
  EXPECT_THROW(site_model(Example::quantile, Setting::I, -1, 100), ConfigError);
  SimulationSpec spec;
  spec.reps = 0;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = SimulationSpec{};
  spec.n = 10;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = SimulationSpec{};
  spec.example = Example::auc;
  spec.n = 2000;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec.heavy = true;
  EXPECT_NO_THROW(spec.validate());
}

TEST(Simlab, ParseEnums) {
  EXPECT_EQ(parse_example("auc"), Example::auc);
  EXPECT_EQ(parse_setting("II"), Setting::II);
  EXPECT_EQ(parse_setting("3"), Setting::III);
  EXPECT_THROW(parse_example("logistic"), ConfigError);
  EXPECT_THROW(parse_setting("IV"), ConfigError);
}

TEST(Simlab, SingleReplicateCoverageIsAllOrNothing) {
  const auto result = run_replications(small_spec(1, 1));
  ASSERT_EQ(result.reps.size(), 1u);
  EXPECT_FALSE(result.reps[0].failed) << result.reps[0].error;
  ASSERT_EQ(result.coverage.size(), 15u);
  for (const auto& row : result.coverage) {
    EXPECT_TRUE(row.coverage == 0.0 || row.coverage == 100.0);
    EXPECT_GT(row.mean_width, 0.0);
    EXPECT_LT(row.mean_width, 2.0);
  }
  ASSERT_EQ(result.reps[0].sites.size(), 4u);
  EXPECT_TRUE(result.reps[0].sites[0].eligible);
  EXPECT_FALSE(result.reps[0].sites[3].eligible);
}

TEST(Simlab, ResultsIndependentOfThreadCountAndRepeatable) {
  const auto a = run_replications(small_spec(3, 1));
  const auto b = run_replications(small_spec(3, 3));
  const auto c = run_replications(small_spec(3, 2));
  EXPECT_EQ(coverage_csv(a), coverage_csv(b));
  EXPECT_EQ(coverage_csv(a), coverage_csv(c));
  std::ostringstream la, lb;
  write_long_format(la, a);
  write_long_format(lb, b);
  EXPECT_EQ(la.str(), lb.str());
  EXPECT_EQ(la.str().rfind("# example quantile setting I", 0), 0u);
}

TEST(Simlab, CoverageCsvLayout) {
  SimulationSpec spec = small_spec(2, 1);
  std::vector<RepResult> reps(2);
  for (auto& r : reps) {
    r.methods.assign(3, std::vector<CoordinateResult>(5, CoordinateResult{0.0, -1.0, 1.0, true}));
  }
  reps[1].methods[1][0].covered = false;
  const auto rows = summarize_coverage(spec, reps);
  std::ostringstream os;
  write_coverage_csv(os, rows);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "method,coordinate,n,reps,coverage,mean_width,failures");
  std::getline(in, line);
  EXPECT_EQ(line, "target,1,200,2,100,2,0");
  for (int i = 0; i < 5; ++i) std::getline(in, line);
  EXPECT_EQ(line, "transfer,1,200,2,50,2,0");
  EXPECT_EQ(coverage_file_name(spec), "coverage_quantile_I.csv");
}
