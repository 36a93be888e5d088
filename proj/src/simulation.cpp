#include "tsvc/simulation.hpp"

#include <algorithm>
#include <cmath>

#include "tsvc/errors.hpp"
#include "tsvc/parallel.hpp"
#include "tsvc/rng.hpp"

namespace tsvc {

namespace {

constexpr std::uint64_t kCovariateTag = 10;  // + column index
constexpr std::uint64_t kNoiseTag = 90;

std::vector<std::vector<std::uint8_t>> cover_flags(
    const TsvcModel& model, const std::vector<CoefficientCI>& cis,
    const std::vector<std::vector<double>>& targets) {
  std::vector<std::vector<std::uint8_t>> flags(targets.size());
  for (std::size_t j = 0; j < targets.size(); ++j) {
    flags[j].assign(targets[j].size(), 0);
  }
  for (const CoefficientCI& ci : cis) {
    const double target =
        targets[static_cast<std::size_t>(ci.covariate)][static_cast<std::size_t>(ci.partition)];
    flags[static_cast<std::size_t>(ci.covariate)][static_cast<std::size_t>(ci.partition)] =
        (ci.lower <= target && target <= ci.upper) ? 1 : 0;
  }
  (void)model;
  return flags;
}

}  // namespace

const char* scenario_name(ScenarioId id) {
  switch (id) {
    case ScenarioId::linear: return "linear";
    case ScenarioId::varying: return "varying";
    case ScenarioId::varying_known_modifiers: return "varying-known";
  }
  return "?";
}

ScenarioId scenario_from_name(const std::string& name) {
  if (name == "linear") return ScenarioId::linear;
  if (name == "varying") return ScenarioId::varying;
  if (name == "varying-known" || name == "varying_known_modifiers") {
    return ScenarioId::varying_known_modifiers;
  }
  throw ConfigError("unknown scenario '" + name + "'");
}

ScenarioData generate_scenario(const ScenarioSpec& spec) {
  if (!(spec.sigma_eps > 0.0)) throw ConfigError("sigma_eps must be positive");
  if (spec.n < 2) throw ConfigError("scenario needs n >= 2");
  const Eigen::Index p = spec.scenario == ScenarioId::linear ? 2 : 3;
  const Rng base(spec.seed);

  Eigen::MatrixXd x(spec.n, p);
  {
    Rng s1 = base.child(kCovariateTag + 0);
    Rng s2 = base.child(kCovariateTag + 1);
    for (Eigen::Index i = 0; i < spec.n; ++i) {
      x(i, 0) = s1.normal();
      x(i, 1) = s2.normal();
    }
    if (p == 3) {
      Rng s3 = base.child(kCovariateTag + 2);
      for (Eigen::Index i = 0; i < spec.n; ++i) x(i, 2) = s3.bernoulli(0.5) ? 1.0 : 0.0;
    }
  }

  Eigen::VectorXd mu(spec.n);
  if (spec.scenario == ScenarioId::linear) {
    mu = 0.25 * x.col(0);
  } else {
    for (Eigen::Index i = 0; i < spec.n; ++i) {
      double beta1 = 0.0;
      if (x(i, 1) <= 0.5 && x(i, 2) == 1.0) beta1 = 0.5;
      if (x(i, 1) > 0.5) beta1 = -1.0;
      mu(i) = beta1 * x(i, 0);
    }
  }

  Eigen::VectorXd y(spec.n);
  {
    Rng noise = base.child(kNoiseTag);
    for (Eigen::Index i = 0; i < spec.n; ++i) y(i) = mu(i) + spec.sigma_eps * noise.normal();
  }

  std::vector<ColumnMeta> columns;
  columns.push_back({"x1", ColumnKind::continuous});
  columns.push_back({"x2", ColumnKind::continuous});
  if (p == 3) columns.push_back({"x3", ColumnKind::binary});

  TsvcConfig config = TsvcConfig::defaults(p, Family::gaussian());
  config.max_splits = 5;
  // Partitions must hold a tenth of the sample: with an absolute floor the
  // threshold scan reaches relatively deeper boundary quantiles as n grows
  // and the false-split rate no longer falls with n.
  config.min_node_size = std::max<int>(5, static_cast<int>(spec.n / 10));
  if (spec.scenario == ScenarioId::varying_known_modifiers) {
    config.modifier_sets = {{1, 2}, {2}, {1}};
  }

  return ScenarioData{Dataset(std::move(y), std::move(x), std::move(columns)),
                      std::move(mu), std::move(config)};
}

ReplicationRecord run_replication(const ScenarioSpec& spec,
                                  const std::vector<CiMethod>& methods,
                                  const std::vector<double>& levels, int B) {
  const ScenarioData scenario = generate_scenario(spec);
  const Eigen::Index p = scenario.data.p();
  ReplicationRecord record;
  record.splits = Eigen::MatrixXd::Zero(p, p);

  TsvcModel model;
  std::vector<std::vector<double>> targets;
  try {
    model = fit_tsvc(scenario.data, scenario.config);
    targets = best_approximating_coefficients(model.structure, scenario.config,
                                              scenario.true_mean,
                                              scenario.data.covariates());
  } catch (const Error&) {
    record.failed = true;
    return record;
  }

  for (const auto& tree : model.structure.trees) {
    for (const SplitRule& rule : tree.rules()) {
      record.splits(rule.target_covariate, rule.modifier) += 1.0;
    }
    record.leaf_counts.push_back(tree.leaf_count());
  }
  record.total_splits = model.splits_performed;

  for (CiMethod method : methods) {
    if (method == CiMethod::wald) {
      for (double level : levels) {
        record.coverage.push_back(
            {method, level, cover_flags(model, wald_ci(model, level), targets)});
      }
    } else if (method == CiMethod::parametric_percentile) {
      const BootstrapRun run =
          run_parametric_bootstrap(model, scenario.data, B, spec.seed, 1);
      for (double level : levels) {
        record.coverage.push_back(
            {method, level,
             cover_flags(model, percentile_cis_from_run(model, run, level), targets)});
      }
    } else {
      const CalibrationRun run =
          run_calibration_bootstrap(model, scenario.data, B, spec.seed, 1);
      for (double level : levels) {
        const CalibrationResult result = calibrated_cis_from_run(model, run, level);
        record.coverage.push_back({method, level, cover_flags(model, result.cis, targets)});
        record.calibration.push_back({level, result.alpha_adjusted});
      }
    }
  }
  return record;
}

CoverageCell coverage_summary(const std::vector<ReplicationRecord>& records,
                              CiMethod method, double level) {
  CoverageCell cell;
  cell.method = method;
  cell.level = level;

  std::size_t p = 0;
  for (const auto& record : records) {
    if (!record.failed) p = std::max(p, record.leaf_counts.size());
  }
  std::vector<double> sums(p, 0.0);
  std::vector<int> counts(p, 0);
  for (const auto& record : records) {
    if (record.failed) continue;
    for (const auto& slice : record.coverage) {
      if (slice.method != method || slice.level != level) continue;
      for (std::size_t j = 0; j < slice.cover.size(); ++j) {
        if (slice.cover[j].empty()) continue;
        double covered = 0.0;
        for (std::uint8_t f : slice.cover[j]) covered += f;
        sums[j] += covered / static_cast<double>(slice.cover[j].size());
        ++counts[j];
      }
    }
  }
  double total = 0.0;
  int n_covariates = 0;
  for (std::size_t j = 0; j < p; ++j) {
    const double cj = counts[j] > 0 ? sums[j] / counts[j] : 0.0;
    cell.c_j.push_back(cj);
    if (counts[j] > 0) {
      total += cj;
      ++n_covariates;
    }
  }
  cell.c_av = n_covariates > 0 ? total / n_covariates : 0.0;
  return cell;
}

SplitCountTable split_count_summary(const std::vector<ReplicationRecord>& records) {
  SplitCountTable table;
  Eigen::Index p = 0;
  int used = 0;
  for (const auto& record : records) {
    if (!record.failed) p = std::max(p, record.splits.rows());
  }
  table.mean_splits = Eigen::MatrixXd::Zero(p, p);
  for (const auto& record : records) {
    if (record.failed) continue;
    table.mean_splits += record.splits;
    table.mean_total += record.total_splits;
    ++used;
  }
  if (used > 0) {
    table.mean_splits /= used;
    table.mean_total /= used;
  }
  return table;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  return Rng(master).child(a).child(b).next_u64();
}

std::vector<CoverageReport> run_study(const std::vector<StudyCell>& cells, int R,
                                      const std::vector<CiMethod>& methods,
                                      const std::vector<double>& levels, int B,
                                      std::uint64_t master_seed, int threads) {
  if (R < 1) throw ConfigError("study needs R >= 1");
  std::vector<CoverageReport> reports;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const StudyCell& cell = cells[c];
    std::vector<ReplicationRecord> records(static_cast<std::size_t>(R));
    parallel_for(static_cast<std::size_t>(R), threads, [&](std::size_t r) {
      ScenarioSpec spec;
      spec.scenario = cell.scenario;
      spec.n = cell.n;
      spec.sigma_eps = cell.sigma_eps;
      spec.seed = derive_seed(master_seed, c, r);
      records[r] = run_replication(spec, methods, levels, B);
      records[r].replicate = static_cast<int>(r);
    });

    CoverageReport report;
    report.cell = cell;
    report.R_requested = R;
    report.B = B;
    report.master_seed = master_seed;
    report.covariate_names = {"x1", "x2"};
    if (cell.scenario != ScenarioId::linear) report.covariate_names.push_back("x3");
    for (const auto& record : records) {
      if (record.failed) ++report.excluded;
    }
    report.R_effective = R - report.excluded;
    for (CiMethod method : methods) {
      for (double level : levels) {
        report.coverage.push_back(coverage_summary(records, method, level));
      }
    }
    report.splits = split_count_summary(records);

    const bool calibrated = std::find(methods.begin(), methods.end(),
                                      CiMethod::bootstrap_calibrated) != methods.end();
    if (calibrated) {
      for (double level : levels) {
        CoverageReport::AlphaSummary summary;
        summary.level = level;
        const std::size_t p = report.covariate_names.size();
        summary.mean_alpha.assign(p, 0.0);
        std::vector<int> counts(p, 0);
        for (const auto& record : records) {
          if (record.failed) continue;
          for (const auto& slice : record.calibration) {
            if (slice.level != level) continue;
            for (std::size_t j = 0; j < slice.alpha_adjusted.size() && j < p; ++j) {
              if (std::isnan(slice.alpha_adjusted[j])) continue;
              summary.mean_alpha[j] += slice.alpha_adjusted[j];
              ++counts[j];
            }
          }
        }
        double total = 0.0;
        int n_cov = 0;
        for (std::size_t j = 0; j < p; ++j) {
          summary.mean_alpha[j] = counts[j] > 0 ? summary.mean_alpha[j] / counts[j] : 0.0;
          if (counts[j] > 0) {
            total += summary.mean_alpha[j];
            ++n_cov;
          }
        }
        summary.mean_alpha_av = n_cov > 0 ? total / n_cov : 0.0;
        report.alpha_adjusted.push_back(std::move(summary));
      }
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

}  // namespace tsvc
