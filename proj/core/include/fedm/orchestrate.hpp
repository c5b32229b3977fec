#pragma once

#include "fedm/combiner.hpp"
#include "fedm/dataset.hpp"
#include "fedm/model.hpp"
#include "fedm/perturbation.hpp"
#include "fedm/sampler.hpp"
#include "fedm/source_site.hpp"

#include <cstdint>
#include <vector>

namespace fedm {

/// Settings for one federated run. The per-stage seeds inside `sampler`,
/// `perturb` and `combiner` are ignored: every stage draws from its own
/// stream derived from `seed`, so a staged run reproduces an in-process run.
struct PipelineConfig {
  SamplerConfig sampler;
  PerturbConfig perturb;
  CombinerConfig combiner;
  std::uint64_t seed = defaults::seed;

  void validate(Index d) const;
};

/// Defaults matching the problem kind (B1 and perturbation counts differ
/// between the quantile and AUC problems).
PipelineConfig pipeline_defaults(const Problem& problem);

std::uint64_t sampler_seed(std::uint64_t seed);
std::uint64_t target_perturb_seed(std::uint64_t seed);
std::uint64_t source_perturb_seed(std::uint64_t seed, std::string_view site);
std::uint64_t combine_seed(std::uint64_t seed);

/// Target lines of the protocol: sample the quasi-posterior, summarize,
/// select the broadcast draws and estimate the score variance.
TargetSummary target_step(const Problem& problem, const Dataset& target,
                          const PipelineConfig& config);

/// One source's reply to a broadcast.
SourceSummary source_step(const Problem& problem, const Dataset& source,
                          const TargetSummary& broadcast, const PipelineConfig& config);

/// The target's fold over all replies.
CombinedEstimate combine_step(const TargetSummary& target, std::vector<SourceSummary> replies,
                              const PipelineConfig& config);

struct FederatedRun {
  TargetSummary target;
  std::vector<SourceSummary> sources;  ///< in input order
  CombinedEstimate combined;
};

/// All stages in one process. Source replies run on up to `jobs` threads.
/// Errors carry a "[stage]" prefix naming where they happened.
FederatedRun orchestrate(const Problem& problem, const Dataset& target,
                         const std::vector<Dataset>& sources, const PipelineConfig& config,
                         std::size_t jobs = 1);

}  // namespace fedm
