#include "cli.hpp"

#include "fedm/combiner.hpp"
#include "fedm/dataset.hpp"
#include "fedm/defaults.hpp"
#include "fedm/orchestrate.hpp"
#include "fedm/parallel.hpp"
#include "fedm/protocol.hpp"
#include "fedm/simlab.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

namespace fedm::cli {

namespace fs = std::filesystem;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::data: return 3;
    case ErrorKind::numerical: return 4;
    case ErrorKind::protocol: return 5;
  }
  return 1;
}

namespace {

struct Options {
  // problem
  std::string problem = "quantile";
  double tau = defaults::tau;
  double radius = 0.0;

  // sampler
  std::size_t draws = defaults::draws;
  std::size_t burn_in = defaults::burn_in;
  std::size_t thin = defaults::thin;
  std::size_t broadcast = 0;
  double step_scale = 0.0;
  double target_accept = 0.0;
  std::string trace;

  // perturbation
  std::size_t perturbations = 0;
  std::string scheme = "multinomial";

  // combiner
  std::string lambda = "auto";
  bool lambda_cv = false;
  std::size_t q = defaults::q_samples;
  double alpha = defaults::alpha;
  bool group_lasso = false;

  std::uint64_t seed = defaults::seed;
  std::size_t jobs = default_jobs();

  // paths and labels
  std::string target;
  std::vector<std::string> sources;
  std::string source;
  std::string target_label;
  std::string label;
  std::string out = "combined.json";
  std::string out_dir = ".";
  std::string broadcast_path = "broadcast.json";
  std::string replies_dir = ".";
  std::vector<std::string> sites;

  // simulation
  std::string example = "quantile";
  std::string setting = "I";
  Index n = 1000;
  std::size_t reps = 100;
  bool heavy = false;
  bool long_format = false;
};

void add_problem_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--problem", o.problem, "Objective: quantile or auc")
      ->check(CLI::IsMember({"quantile", "auc"}));
  cmd->add_option("--tau", o.tau, "Quantile level for the quantile problem");
  cmd->add_option("--radius", o.radius,
                  "Domain ball radius R (0 = 50 for quantile, 0.999 for auc)");
}

void add_sampler_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--draws", o.draws, "MCMC draws B kept after burn-in");
  cmd->add_option("--burn-in", o.burn_in, "MCMC burn-in iterations (step size adapts here)");
  cmd->add_option("--thin", o.thin, "Keep every k-th post-burn-in state");
  cmd->add_option("--broadcast", o.broadcast,
                  "Broadcast draws B1 (0 = 50 for quantile, 100 for auc)");
  cmd->add_option("--step-scale", o.step_scale, "Initial proposal SD (0 = 1/sqrt(n))");
  cmd->add_option("--target-accept", o.target_accept,
                  "Target acceptance rate (0 = 0.35 for d <= 4, else 0.234)");
  cmd->add_option("--trace", o.trace, "Write the MCMC trace CSV here");
}

void add_perturb_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--perturbations", o.perturbations,
                  "Perturbation replicates (0 = 500 for quantile, 100 for auc)");
  cmd->add_option("--scheme", o.scheme, "Perturbation weights: multinomial or jin")
      ->check(CLI::IsMember({"multinomial", "jin"}));
}

void add_lambda_option(CLI::App* cmd, Options& o) {
  cmd->add_option("--lambda", o.lambda, "Lasso penalty; auto = n_target^-1/2");
}

void add_combiner_options(CLI::App* cmd, Options& o) {
  add_lambda_option(cmd, o);
  cmd->add_flag("--lambda-cv", o.lambda_cv,
                "Choose lambda from {n^-1/4, n^-1/2, n^-1} by 5-fold CV");
  cmd->add_option("--q", o.q, "Gaussian draws Q for the weight fit");
  cmd->add_option("--alpha", o.alpha, "CI level is 1 - alpha");
  cmd->add_flag("--group-lasso", o.group_lasso, "Penalize each weight matrix as a group");
}

void add_seed_option(CLI::App* cmd, Options& o) {
  cmd->add_option("--seed", o.seed, "Base random seed")->envname("FEDM_SEED");
}

void add_jobs_option(CLI::App* cmd, Options& o) {
  cmd->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

std::unique_ptr<CLI::App> make_app(Options& o) {
  auto app = std::make_unique<CLI::App>(
      "Sampling-based inference for non-smooth M-estimators with one-round federated "
      "transfer from source sites",
      "fedm");
  app->option_defaults()->always_capture_default();
  app->set_config("--config", "", "TOML file with option values; flags override it");
  app->require_subcommand(1);

  auto* run = app->add_subcommand("run", "Full federated run in one process");
  run->add_option("target", o.target, "Target site CSV (header y,z1,...,zp)")->required();
  run->add_option("sources", o.sources, "Source site CSVs; labels are the file stems");
  run->add_option("--target-label", o.target_label, "Target label (default: file stem)");
  run->add_option("--out", o.out, "Combined estimate JSON");
  add_problem_options(run, o);
  add_sampler_options(run, o);
  add_perturb_options(run, o);
  add_combiner_options(run, o);
  add_seed_option(run, o);
  add_jobs_option(run, o);

  auto* init = app->add_subcommand("target-init", "Target step: write broadcast.json");
  init->add_option("target", o.target, "Target site CSV")->required();
  init->add_option("--target-label", o.target_label, "Target label (default: file stem)");
  init->add_option("--out-dir", o.out_dir, "Directory for broadcast.json");
  add_problem_options(init, o);
  add_sampler_options(init, o);
  add_perturb_options(init, o);
  add_seed_option(init, o);

  auto* reply = app->add_subcommand("source-reply", "Source step: answer a broadcast");
  reply->add_option("source", o.source, "Source site CSV")->required();
  reply->add_option("--label", o.label, "Site label (default: file stem)");
  reply->add_option("--broadcast", o.broadcast_path, "Broadcast message from the target");
  reply->add_option("--out-dir", o.out_dir, "Directory for reply_<site>.json");
  add_problem_options(reply, o);
  add_perturb_options(reply, o);
  add_seed_option(reply, o);

  auto* combine = app->add_subcommand("target-combine", "Target step: fold replies");
  combine->add_option("--broadcast", o.broadcast_path, "Broadcast message written by target-init");
  combine->add_option("--replies-dir", o.replies_dir, "Directory holding reply_<site>.json");
  combine->add_option("--sites", o.sites,
                      "Expected site labels (default: every reply file found)");
  combine->add_option("--out", o.out, "Combined estimate JSON");
  add_combiner_options(combine, o);
  add_seed_option(combine, o);

  auto* sim = app->add_subcommand("simulate", "Coverage study over replicated synthetic data");
  sim->add_option("--example", o.example, "quantile or auc");
  sim->add_option("--setting", o.setting, "I, II or III");
  sim->add_option("--n", o.n, "Target sample size");
  sim->add_option("--reps", o.reps, "Replicates");
  sim->add_flag("--heavy", o.heavy, "Allow AUC runs with n > 1000");
  add_lambda_option(sim, o);
  sim->add_option("--out", o.out_dir, "Output directory for coverage_<example>_<setting>.csv");
  sim->add_flag("--long", o.long_format, "Also write long_<example>_<setting>.dat");
  add_seed_option(sim, o);
  add_jobs_option(sim, o);
  return app;
}

std::optional<double> parse_lambda(const std::string& text) {
  if (text == "auto") return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !(v >= 0.0) || !std::isfinite(v)) {
    throw ConfigError("--lambda must be 'auto' or a nonnegative number, got '" + text + "'");
  }
  return v;
}

ProblemPtr make_problem(const Options& o, Index covariates) {
  if (o.problem == "quantile") {
    return quantile_problem(o.tau, covariates,
                            o.radius > 0.0 ? o.radius : defaults::radius_quantile);
  }
  return auc_problem(covariates, o.radius > 0.0 ? o.radius : defaults::radius_auc);
}

/// Problem-independent defaults when `problem` is null (the combine step).
PipelineConfig make_pipeline(const Options& o, const Problem* problem) {
  PipelineConfig c = problem ? pipeline_defaults(*problem) : PipelineConfig{};
  c.seed = o.seed;
  c.sampler.draws = o.draws;
  c.sampler.burn_in = o.burn_in;
  c.sampler.thin = o.thin;
  if (o.broadcast > 0) c.sampler.broadcast = o.broadcast;
  c.sampler.step_scale = o.step_scale;
  if (o.target_accept > 0.0) c.sampler.target_accept = o.target_accept;
  c.sampler.trace_path = o.trace;
  if (o.perturbations > 0) c.perturb.replicates = o.perturbations;
  c.perturb.scheme = parse_perturb_scheme(o.scheme);
  c.combiner.lambda = parse_lambda(o.lambda);
  c.combiner.lambda_cv = o.lambda_cv;
  c.combiner.q = o.q;
  c.combiner.alpha = o.alpha;
  c.combiner.group_lasso = o.group_lasso;
  return c;
}

Dataset load(const std::string& path, const std::string& label) {
  Dataset d = read_csv(fs::path(path), label);
  check_site_label(d.label());
  return d;
}

std::string fmt(double x, int precision = 6) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(precision) << x;
  return os.str();
}

void print_summary(std::ostream& out, const CombinedEstimate& c, const TargetSummary* target,
                   const std::vector<Index>& source_n) {
  if (target) {
    out << "target '" << target->label << "': n = " << target->n_target
        << ", acceptance = " << fmt(target->acceptance_rate, 3)
        << ", min ESS = " << fmt(target->min_effective_size, 4)
        << ", C1 = " << fmt(target->c1_used, 4) << '\n';
  }
  const int level = static_cast<int>(std::lround(100.0 * (1.0 - c.alpha)));
  out << "lambda = " << fmt(c.lambda) << ", " << level << "% Wald intervals\n\n";
  out << std::left << std::setw(7) << "coord" << std::setw(13) << "transfer"
      << std::setw(26) << "transfer CI" << std::setw(13) << "target" << std::setw(26)
      << "target CI" << std::setw(13) << "full borrow" << "full-borrow CI\n";
  const auto ci = [](const Interval& iv) { return "[" + fmt(iv.lo) + ", " + fmt(iv.hi) + "]"; };
  for (Index j = 0; j < c.transfer.theta.size(); ++j) {
    const auto u = static_cast<std::size_t>(j);
    out << std::left << std::setw(7) << ("theta" + std::to_string(j + 1)) << std::setw(13)
        << fmt(c.transfer.theta(j)) << std::setw(26) << ci(c.transfer.ci[u]) << std::setw(13)
        << fmt(c.target_only.theta(j)) << std::setw(26) << ci(c.target_only.ci[u])
        << std::setw(13) << fmt(c.full_borrow.theta(j)) << ci(c.full_borrow.ci[u]) << '\n';
  }
  const auto& d = c.diagnostics;
  if (!d.sites.empty()) {
    out << '\n'
        << std::left << std::setw(16) << "site" << std::setw(9) << "n" << std::setw(13) << "T"
        << std::setw(13) << "p" << std::setw(13) << "|Lambda|_1" << "note\n";
    for (std::size_t k = 0; k < d.sites.size(); ++k) {
      std::string note;
      if (std::find(d.unusable.begin(), d.unusable.end(), d.sites[k]) != d.unusable.end()) {
        note = "unusable";
      } else if (std::find(d.excluded_non_pd.begin(), d.excluded_non_pd.end(), d.sites[k]) !=
                 d.excluded_non_pd.end()) {
        note = "A not positive definite";
      }
      out << std::left << std::setw(16) << d.sites[k] << std::setw(9)
          << (k < source_n.size() ? std::to_string(source_n[k]) : "") << std::setw(13)
          << fmt(d.t[k]) << std::setw(13) << fmt(d.p[k]) << std::setw(13)
          << fmt(l1_norm(c.transfer.lambdas[k])) << note << '\n';
    }
  }
  if (c.full_borrow_ridge) out << "\nnote: full-borrow weights used the ridge fallback\n";
}

int cmd_run(const Options& o, std::ostream& out) {
  const Dataset target = load(o.target, o.target_label);
  std::vector<Dataset> sources;
  for (const auto& path : o.sources) sources.push_back(load(path, ""));
  const ProblemPtr problem = make_problem(o, target.dim());
  const PipelineConfig config = make_pipeline(o, problem.get());
  config.validate(problem->param_dim());

  const FederatedRun run = orchestrate(*problem, target, sources, config, o.jobs);
  write_combined(o.out, run.combined, run.target.label);

  std::map<std::string, Index> n_by_site;
  for (const auto& s : run.sources) n_by_site[s.site] = s.n;
  std::vector<Index> n_sorted;
  for (const auto& site : run.combined.diagnostics.sites) n_sorted.push_back(n_by_site[site]);
  print_summary(out, run.combined, &run.target, n_sorted);
  out << "\nwrote " << o.out << '\n';
  return 0;
}

int cmd_target_init(const Options& o, std::ostream& out) {
  const Dataset target = load(o.target, o.target_label);
  const ProblemPtr problem = make_problem(o, target.dim());
  const PipelineConfig config = make_pipeline(o, problem.get());
  config.validate(problem->param_dim());
  const TargetSummary summary = target_step(*problem, target, config);
  fs::create_directories(o.out_dir);
  const fs::path path = fs::path(o.out_dir) / "broadcast.json";
  write_broadcast(path, summary);
  out << "target '" << summary.label << "': n = " << summary.n_target
      << ", acceptance = " << fmt(summary.acceptance_rate, 3)
      << ", C1 = " << fmt(summary.c1_used, 4) << "\nwrote " << path.string() << '\n';
  return 0;
}

int cmd_source_reply(const Options& o, std::ostream& out) {
  const TargetSummary broadcast = read_broadcast(o.broadcast_path);
  const Dataset source = load(o.source, o.label);
  if (source.label() == broadcast.label) {
    throw ProtocolError(ProtocolError::Fault::exchange,
                        "source label '" + source.label() + "' equals the target label");
  }
  const ProblemPtr problem = make_problem(o, source.dim());
  if (problem->param_dim() != broadcast.dim()) {
    throw DataError("source '" + source.label() + "' has " + std::to_string(source.dim()) +
                    " covariates, which does not match the broadcast dimension " +
                    std::to_string(broadcast.dim()));
  }
  const PipelineConfig config = make_pipeline(o, problem.get());
  config.perturb.validate();
  ReplyMessage reply{source_step(*problem, source, broadcast, config), broadcast.label};
  fs::create_directories(o.out_dir);
  const fs::path path = fs::path(o.out_dir) / reply_file_name(reply.summary.site);
  write_reply(path, reply);
  out << "site '" << reply.summary.site << "': n = " << reply.summary.n
      << (reply.summary.a_is_pd ? "" : " (A not positive definite)") << "\nwrote "
      << path.string() << '\n';
  return 0;
}

int cmd_target_combine(const Options& o, std::ostream& out) {
  const TargetSummary target = read_broadcast(o.broadcast_path);
  std::vector<fs::path> files;
  if (!o.sites.empty()) {
    std::vector<std::string> missing;
    std::set<std::string> seen;
    for (const auto& site : o.sites) {
      check_site_label(site);
      if (!seen.insert(site).second) {
        throw ProtocolError(ProtocolError::Fault::exchange, "duplicate site label '" + site + "'");
      }
      const fs::path p = fs::path(o.replies_dir) / reply_file_name(site);
      if (fs::exists(p)) {
        files.push_back(p);
      } else {
        missing.push_back(site);
      }
    }
    if (!missing.empty()) {
      std::string list;
      for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
      throw ProtocolError(ProtocolError::Fault::exchange, "missing replies from: " + list);
    }
  } else if (fs::is_directory(o.replies_dir)) {
    for (const auto& entry : fs::directory_iterator(o.replies_dir)) {
      const auto name = entry.path().filename().string();
      if (name.starts_with("reply_") && name.ends_with(".json")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    throw ProtocolError(ProtocolError::Fault::io, "no replies directory '" + o.replies_dir + "'");
  }

  std::vector<SourceSummary> replies;
  std::vector<Index> n_by_file;
  for (const auto& f : files) {
    ReplyMessage m = read_reply(f);
    if (m.target_label != target.label) {
      throw ProtocolError(ProtocolError::Fault::exchange,
                          f.filename().string() + " answers target '" + m.target_label +
                              "', not '" + target.label + "'");
    }
    if (f.filename().string() != reply_file_name(m.summary.site)) {
      throw ProtocolError(ProtocolError::Fault::exchange,
                          f.filename().string() + " holds the reply of site '" +
                              m.summary.site + "'");
    }
    replies.push_back(std::move(m.summary));
  }

  const PipelineConfig config = make_pipeline(o, nullptr);
  config.combiner.validate();
  std::map<std::string, Index> n_by_site;
  for (const auto& r : replies) n_by_site[r.site] = r.n;
  const CombinedEstimate c = combine_step(target, replies, config);
  write_combined(o.out, c, target.label);
  std::vector<Index> n_sorted;
  for (const auto& site : c.diagnostics.sites) n_sorted.push_back(n_by_site[site]);
  print_summary(out, c, nullptr, n_sorted);
  out << "\nwrote " << o.out << '\n';
  return 0;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  SimulationSpec spec;
  spec.example = parse_example(o.example);
  spec.setting = parse_setting(o.setting);
  spec.n = o.n;
  spec.reps = o.reps;
  spec.seed = o.seed;
  spec.jobs = o.jobs;
  spec.heavy = o.heavy;
  if (const auto lambda = parse_lambda(o.lambda)) {
    PipelineConfig p = pipeline_defaults(*simulation_problem(spec.example));
    p.combiner.lambda = lambda;
    spec.pipeline = p;
  }
  spec.validate();
  const SimulationResult result = run_replications(spec);

  fs::create_directories(o.out_dir);
  const fs::path csv = fs::path(o.out_dir) / coverage_file_name(spec);
  {
    std::ofstream f(csv);
    if (!f) throw ConfigError("cannot write " + csv.string());
    write_coverage_csv(f, result.coverage);
  }
  out << "wrote " << csv.string() << '\n';
  if (o.long_format) {
    const fs::path dat = fs::path(o.out_dir) / ("long_" + std::string(to_string(spec.example)) +
                                                "_" + std::string(to_string(spec.setting)) +
                                                ".dat");
    std::ofstream f(dat);
    if (!f) throw ConfigError("cannot write " + dat.string());
    write_long_format(f, result);
    out << "wrote " << dat.string() << '\n';
  }
  write_coverage_csv(out, result.coverage);
  return 0;
}

CLI::App* find_subcommand(CLI::App& app, const std::string& name) {
  return name.empty() ? &app : app.get_subcommand(name);
}

}  // namespace

std::vector<std::string> subcommands() {
  return {"run", "target-init", "source-reply", "target-combine", "simulate"};
}

std::string help(const std::string& subcommand) {
  Options o;
  auto app = make_app(o);
  CLI::App* cmd = find_subcommand(*app, subcommand);
  return cmd->help();
}

std::vector<std::string> option_names(const std::string& subcommand) {
  Options o;
  auto app = make_app(o);
  CLI::App* cmd = find_subcommand(*app, subcommand);
  std::vector<std::string> names;
  for (const CLI::Option* opt : cmd->get_options()) {
    for (const auto& l : opt->get_lnames()) names.push_back("--" + l);
  }
  return names;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  auto app = make_app(o);
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app->parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app->help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app->help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "fedm: " << e.what() << '\n';
    return exit_code(ErrorKind::config);
  }

  const auto selected = app->get_subcommands();
  const std::string name = selected.front()->get_name();
  try {
    if (name == "run") return cmd_run(o, out);
    if (name == "target-init") return cmd_target_init(o, out);
    if (name == "source-reply") return cmd_source_reply(o, out);
    if (name == "target-combine") return cmd_target_combine(o, out);
    if (name == "simulate") return cmd_simulate(o, out);
  } catch (const Error& e) {
    err << "fedm: " << to_string(e.kind()) << " error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "fedm: config error: " << e.what() << '\n';
    return exit_code(ErrorKind::config);
  }
  return 1;
}

}  // namespace fedm::cli
