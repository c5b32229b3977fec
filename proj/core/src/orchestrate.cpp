#include "fedm/orchestrate.hpp"

#include "fedm/parallel.hpp"
#include "fedm/random.hpp"

#include <set>

namespace fedm {

void PipelineConfig::validate(Index d) const {
  sampler.validate(d);
  perturb.validate();
  combiner.validate();
}

PipelineConfig pipeline_defaults(const Problem& problem) {
  PipelineConfig out;
  if (problem.name() == "auc") {
    out.sampler.broadcast = defaults::broadcast_auc;
    out.perturb.replicates = defaults::perturbations_auc;
  }
  return out;
}

std::uint64_t sampler_seed(std::uint64_t seed) { return stream_seed(seed, "mcmc"); }
std::uint64_t target_perturb_seed(std::uint64_t seed) { return stream_seed(seed, "target-perturb"); }
std::uint64_t source_perturb_seed(std::uint64_t seed, std::string_view site) {
  return stream_seed(seed, "source", hash_label(site));
}
std::uint64_t combine_seed(std::uint64_t seed) { return stream_seed(seed, "omega"); }

TargetSummary target_step(const Problem& problem, const Dataset& target,
                          const PipelineConfig& config) {
  const Index d = problem.param_dim();
  config.validate(d);
  problem.check_data(target);
  const Index n = target.size();

  SamplerConfig sc = config.sampler;
  sc.seed = sampler_seed(config.seed);
  const McmcDraws chain = run_chain(problem, target, sc);
  const PointSummary point = summarize(chain.draws, n);
  const BroadcastSelection sel = select_broadcast(chain.draws, point.theta_hat, n, sc.broadcast);

  PerturbConfig pc = config.perturb;
  pc.seed = target_perturb_seed(config.seed);
  const Vector v = empirical_v(problem, target, point.theta_hat, sel.draws, pc);
  const ScoreVariance sv =
      regress_score_variance(v, outer_feature_matrix(sel.draws, point.theta_hat), n);

  TargetSummary out;
  out.label = target.label().empty() ? "target" : target.label();
  out.n_target = n;
  out.theta_hat = point.theta_hat;
  out.a_hat = point.a_hat;
  out.sigma_s_hat = sv.sigma;
  out.broadcast_draws = sel.draws;
  out.c1_used = sel.c1_used;
  out.acceptance_rate = chain.acceptance_rate;
  out.min_effective_size = chain.min_effective_size;
  out.sigma_psd_adjusted = sv.psd_adjusted;
  return out;
}

SourceSummary source_step(const Problem& problem, const Dataset& source,
                          const TargetSummary& broadcast, const PipelineConfig& config) {
  PerturbConfig pc = config.perturb;
  pc.validate();
  pc.seed = source_perturb_seed(config.seed, source.label());
  return build_source_summary(problem, source, broadcast, pc);
}

CombinedEstimate combine_step(const TargetSummary& target, std::vector<SourceSummary> replies,
                              const PipelineConfig& config) {
  CombinerConfig cc = config.combiner;
  cc.seed = combine_seed(config.seed);
  return combine_at_target(target, std::move(replies), cc);
}

FederatedRun orchestrate(const Problem& problem, const Dataset& target,
                         const std::vector<Dataset>& sources, const PipelineConfig& config,
                         std::size_t jobs) {
  std::set<std::string> labels{target.label()};
  for (const auto& s : sources) {
    if (s.dim() != target.dim()) {
      throw DataError("site '" + s.label() + "' has " + std::to_string(s.dim()) +
                      " covariates, target '" + target.label() + "' has " +
                      std::to_string(target.dim()));
    }
    if (!labels.insert(s.label()).second) {
      throw ProtocolError(ProtocolError::Fault::exchange,
                          "duplicate site label '" + s.label() + "'");
    }
  }

  FederatedRun run;
  try {
    run.target = target_step(problem, target, config);
  } catch (...) {
    rethrow_with_stage("target");
  }

  // Sources only see what a broadcast message carries.
  TargetSummary broadcast;
  broadcast.label = run.target.label;
  broadcast.n_target = run.target.n_target;
  broadcast.theta_hat = run.target.theta_hat;
  broadcast.a_hat = run.target.a_hat;
  broadcast.sigma_s_hat = run.target.sigma_s_hat;
  broadcast.broadcast_draws = run.target.broadcast_draws;

  run.sources.resize(sources.size());
  parallel_for(sources.size(), jobs, [&](std::size_t k) {
    try {
      run.sources[k] = source_step(problem, sources[k], broadcast, config);
    } catch (...) {
      rethrow_with_stage("source " + sources[k].label());
    }
  });

  try {
    run.combined = combine_step(broadcast, run.sources, config);
  } catch (...) {
    rethrow_with_stage("combine");
  }
  return run;
}

}  // namespace fedm
