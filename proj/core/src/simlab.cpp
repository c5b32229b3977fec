#include "fedm/simlab.hpp"

#include "fedm/parallel.hpp"
#include "fedm/random.hpp"

#include <cmath>
#include <ostream>

namespace fedm {

std::string_view to_string(Example example) {
  return example == Example::quantile ? "quantile" : "auc";
}

std::string_view to_string(Setting setting) {
  switch (setting) {
    case Setting::I: return "I";
    case Setting::II: return "II";
    case Setting::III: return "III";
  }
  return "?";
}

Example parse_example(std::string_view text) {
  if (text == "quantile") return Example::quantile;
  if (text == "auc") return Example::auc;
  throw ConfigError("unknown example '" + std::string(text) + "' (expected quantile or auc)");
}

Setting parse_setting(std::string_view text) {
  if (text == "I" || text == "1") return Setting::I;
  if (text == "II" || text == "2") return Setting::II;
  if (text == "III" || text == "3") return Setting::III;
  throw ConfigError("unknown setting '" + std::string(text) + "' (expected I, II or III)");
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::target: return "target";
    case Method::transfer: return "transfer";
    case Method::full_borrow: return "full_borrow";
  }
  return "?";
}

namespace {

Vector vec5(double a, double b, double c, double d, double e) {
  Vector v(5);
  v << a, b, c, d, e;
  return v;
}

Vector tail4(double b, double c, double d, double e) {
  Vector v(4);
  v << b, c, d, e;
  return v;
}

constexpr Index kCovariates = 5;

}  // namespace

Vector unit_norm_first(const Vector& tail) {
  const double rest = tail.squaredNorm();
  if (!(rest < 1.0)) throw ConfigError("unit_norm_first: tail norm must be below 1");
  Vector out(tail.size() + 1);
  out << std::sqrt(1.0 - rest), tail;
  return out;
}

Matrix auc_covariate_correlation(Index p) {
  Matrix out(p, p);
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) out(i, j) = std::pow(0.1, static_cast<double>(std::abs(i - j)));
  }
  return out;
}

Index source_count(Example example, Setting setting) {
  if (example == Example::quantile) return setting == Setting::III ? 6 : 4;
  return setting == Setting::I ? 4 : 6;
}

SiteModel site_model(Example example, Setting setting, Index site, Index n) {
  if (n < 2) throw ConfigError("simulation sample size must be at least 2");
  const Index k = source_count(example, setting);
  if (site < 0 || site > k) {
    throw ConfigError("setting " + std::string(to_string(setting)) + " of the " +
                      std::string(to_string(example)) + " example has no site " +
                      std::to_string(site));
  }
  SiteModel m;
  m.n = n;
  if (example == Example::quantile) {
    m.beta = vec5(-1, 1, 0.5, 0, 0);
    m.sigma = 1.0;
    switch (setting) {
      case Setting::I:
        if (site == 3) m.beta = vec5(-1.25, 0.75, 0.25, -0.25, -0.25);
        if (site == 4) m.beta = vec5(-0.75, 1.25, 0.75, 0.25, 0.25);
        m.eligible = site < 3;
        break;
      case Setting::II:
        if (site >= 3) m.beta = vec5(-0.5, 1, 0.5, 0, 0);
        m.eligible = site < 3;
        break;
      case Setting::III:
        if (site == 3) m.sigma = 1.5;
        if (site == 4) m.n = n / 2;
        if (site == 5) m.beta = vec5(-0.5, 1, 0.5, 0, 0);
        if (site == 6) m.beta = vec5(-0.7, 0.7, 0.2, 0.3, -0.3);
        m.eligible = site < 5;
        break;
    }
    return m;
  }

  m.beta = unit_norm_first(tail4(-0.5, 0.5, -0.5, 0));
  m.sigma = 1.5;
  switch (setting) {
    case Setting::I:
      if (site == 3) m.beta = unit_norm_first(tail4(0, 0, 0, 0.25));
      if (site == 4) m.beta = unit_norm_first(tail4(0, 0, 0, -0.25));
      m.eligible = site < 3;
      break;
    case Setting::II:
    case Setting::III:
      if (setting == Setting::II) {
        if (site == 3) m.sigma = 1.0;
        if (site == 4) m.n = n / 2;
      } else if (site == 3 || site == 4) {
        m.poisson = true;
      }
      if (site == 5) m.beta = unit_norm_first(tail4(0.5, 0.5, -0.5, 0));
      if (site == 6) m.beta = unit_norm_first(tail4(0.25, -0.25, -0.5, 0));
      m.eligible = site < 5;
      break;
  }
  return m;
}

namespace {

std::string site_label(Index site) { return site == 0 ? "target" : "site" + std::to_string(site); }

Matrix standard_normals(Index n, Index p, Rng& rng) {
  std::normal_distribution<double> normal;
  Matrix z(n, p);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) z(i, j) = normal(rng);
  }
  return z;
}

}  // namespace

Dataset gen_quantile_site(Setting setting, Index site, Index n, std::uint64_t seed) {
  const SiteModel m = site_model(Example::quantile, setting, site, n);
  Rng rng = make_rng(seed);
  Matrix z = standard_normals(m.n, kCovariates, rng);
  std::normal_distribution<double> noise(0.0, m.sigma);
  Vector y = z * m.beta;
  for (Index i = 0; i < m.n; ++i) y(i) += noise(rng);
  return Dataset(site_label(site), std::move(y), std::move(z));
}

Dataset gen_auc_site(Setting setting, Index site, Index n, std::uint64_t seed) {
  const SiteModel m = site_model(Example::auc, setting, site, n);
  Rng rng = make_rng(seed);
  const Matrix chol = auc_covariate_correlation(kCovariates).llt().matrixL();
  Matrix z = m.sigma * standard_normals(m.n, kCovariates, rng) * chol.transpose();
  const Vector eta = z * m.beta;
  Vector y(m.n);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Index i = 0; i < m.n; ++i) {
    if (m.poisson) {
      std::poisson_distribution<int> pois(std::exp(eta(i)));
      y(i) = pois(rng);
    } else {
      y(i) = unif(rng) < 1.0 / (1.0 + std::exp(-eta(i))) ? 1.0 : 0.0;
    }
  }
  return Dataset(site_label(site), std::move(y), std::move(z));
}

Dataset gen_site(Example example, Setting setting, Index site, Index n, std::uint64_t seed) {
  return example == Example::quantile ? gen_quantile_site(setting, site, n, seed)
                                      : gen_auc_site(setting, site, n, seed);
}

Vector true_theta(Example example) {
  const Vector beta = site_model(example, Setting::I, 0, 2).beta;
  return example == Example::quantile ? beta : Vector(beta.tail(beta.size() - 1));
}

Index beta_index(Example example, Index j) { return example == Example::quantile ? j + 1 : j + 2; }

ProblemPtr simulation_problem(Example example) {
  if (example == Example::quantile) {
    return quantile_problem(defaults::tau, kCovariates, defaults::radius_quantile);
  }
  return auc_problem(kCovariates, defaults::radius_auc);
}

void SimulationSpec::validate() const {
  if (reps < 1) throw ConfigError("simulation needs at least one replicate");
  if (n < 20) throw ConfigError("simulation sample size must be at least 20");
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  if (example == Example::auc && n > 1000 && !heavy) {
    throw ConfigError("AUC simulations with n > 1000 take hours; pass --heavy to run them");
  }
  if (pipeline) pipeline->validate(simulation_problem(example)->param_dim());
}

RepResult run_replicate(const SimulationSpec& spec, std::size_t rep) {
  RepResult out;
  out.rep = rep;
  const std::uint64_t rep_seed = stream_seed(spec.seed, rep);
  const ProblemPtr problem = simulation_problem(spec.example);
  const Index k = source_count(spec.example, spec.setting);
  try {
    const Dataset target =
        gen_site(spec.example, spec.setting, 0, spec.n, stream_seed(rep_seed, "data", 0));
    std::vector<Dataset> sources;
    for (Index s = 1; s <= k; ++s) {
      sources.push_back(gen_site(spec.example, spec.setting, s, spec.n,
                                 stream_seed(rep_seed, "data", static_cast<std::uint64_t>(s))));
    }
    PipelineConfig config = spec.pipeline ? *spec.pipeline : pipeline_defaults(*problem);
    config.seed = stream_seed(rep_seed, "pipeline");
    const FederatedRun run = orchestrate(*problem, target, sources, config);
    const CombinedEstimate& c = run.combined;

    const Vector truth = true_theta(spec.example);
    for (const Estimate* e : {&c.target_only, &c.transfer, &c.full_borrow}) {
      std::vector<CoordinateResult> coords;
      for (Index j = 0; j < truth.size(); ++j) {
        const auto& ci = e->ci[static_cast<std::size_t>(j)];
        coords.push_back({e->theta(j), ci.lo, ci.hi, ci.contains(truth(j))});
      }
      out.methods.push_back(std::move(coords));
    }
    for (std::size_t s = 0; s < c.diagnostics.sites.size(); ++s) {
      SiteResult sr;
      sr.site = c.diagnostics.sites[s];
      sr.eligible = site_model(spec.example, spec.setting,
                               static_cast<Index>(std::stoi(sr.site.substr(4))), spec.n)
                        .eligible;
      sr.t = c.diagnostics.t[s];
      sr.p = c.diagnostics.p[s];
      sr.lambda_l1 = l1_norm(c.transfer.lambdas[s]);
      out.sites.push_back(std::move(sr));
    }
    out.lambda = c.lambda;
    out.c1_used = run.target.c1_used;
  } catch (const std::exception& e) {
    out.failed = true;
    out.error = e.what();
    out.methods.clear();
    out.sites.clear();
  }
  return out;
}

std::vector<CoverageRow> summarize_coverage(const SimulationSpec& spec,
                                            const std::vector<RepResult>& reps) {
  const Index d = true_theta(spec.example).size();
  std::size_t failures = 0;
  for (const auto& r : reps) failures += r.failed ? 1 : 0;
  std::vector<CoverageRow> rows;
  for (const Method m : {Method::target, Method::transfer, Method::full_borrow}) {
    for (Index j = 0; j < d; ++j) {
      CoverageRow row;
      row.method = m;
      row.coordinate = beta_index(spec.example, j);
      row.n = spec.n;
      row.reps = reps.size();
      row.failures = failures;
      std::size_t ok = 0;
      std::size_t hits = 0;
      double width = 0.0;
      for (const auto& r : reps) {
        if (r.failed) continue;
        const auto& c = r.methods[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)];
        ++ok;
        hits += c.covered ? 1 : 0;
        width += c.width();
      }
      if (ok > 0) {
        row.coverage = 100.0 * static_cast<double>(hits) / static_cast<double>(ok);
        row.mean_width = width / static_cast<double>(ok);
      } else {
        row.coverage = std::nan("");
        row.mean_width = std::nan("");
      }
      rows.push_back(row);
    }
  }
  return rows;
}

SimulationResult run_replications(const SimulationSpec& spec) {
  spec.validate();
  SimulationResult out;
  out.spec = spec;
  out.reps.resize(spec.reps);
  const bool warnings = warnings_enabled();
  set_warnings_enabled(false);
  parallel_for(spec.reps, spec.jobs, [&](std::size_t r) { out.reps[r] = run_replicate(spec, r); });
  set_warnings_enabled(warnings);
  out.coverage = summarize_coverage(spec, out.reps);
  return out;
}

std::string coverage_file_name(const SimulationSpec& spec) {
  return "coverage_" + std::string(to_string(spec.example)) + "_" +
         std::string(to_string(spec.setting)) + ".csv";
}

void write_coverage_csv(std::ostream& out, const std::vector<CoverageRow>& rows) {
  out << "method,coordinate,n,reps,coverage,mean_width,failures\n";
  for (const auto& r : rows) {
    out << to_string(r.method) << ',' << r.coordinate << ',' << r.n << ',' << r.reps << ','
        << format_double(r.coverage) << ',' << format_double(r.mean_width) << ',' << r.failures
        << '\n';
  }
}

void write_long_format(std::ostream& out, const SimulationResult& result) {
  const auto& spec = result.spec;
  out << "# example " << to_string(spec.example) << " setting " << to_string(spec.setting)
      << " n " << spec.n << " seed " << spec.seed << '\n';
  out << "# rep method coordinate estimate lo hi covered width\n";
  for (const auto& r : result.reps) {
    if (r.failed) continue;
    for (const Method m : {Method::target, Method::transfer, Method::full_borrow}) {
      const auto& coords = r.methods[static_cast<std::size_t>(m)];
      for (std::size_t j = 0; j < coords.size(); ++j) {
        const auto& c = coords[j];
        out << r.rep << ' ' << to_string(m) << ' ' << beta_index(spec.example, static_cast<Index>(j))
            << ' ' << format_double(c.estimate) << ' ' << format_double(c.lo) << ' '
            << format_double(c.hi) << ' ' << (c.covered ? 1 : 0) << ' ' << format_double(c.width())
            << '\n';
      }
    }
  }
  out << "\n\n# rep site eligible T p lambda_l1\n";
  for (const auto& r : result.reps) {
    for (const auto& s : r.sites) {
      out << r.rep << ' ' << s.site << ' ' << (s.eligible ? 1 : 0) << ' ' << format_double(s.t)
          << ' ' << format_double(s.p) << ' ' << format_double(s.lambda_l1) << '\n';
    }
  }
}

}  // namespace fedm
