#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <thread>

#include "helpers.hpp"
#include "tsvc/ci.hpp"
#include "tsvc/errors.hpp"
#include "tsvc/hazard.hpp"
#include "tsvc/parallel.hpp"
#include "tsvc/simulation.hpp"
#include "tsvc/tsvc.hpp"

using namespace tsvc;

namespace {

int worker_threads() { return resolve_threads(0); }

void report(int criterion, bool pass, const std::string& details) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, details.c_str());
  std::fflush(stdout);
  CHECK_MESSAGE(pass, "criterion ", criterion, ": ", details);
}

double elapsed_seconds(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

const CoverageCell& find_cell(const CoverageReport& report, CiMethod method, double level) {
  for (const CoverageCell& cell : report.coverage) {
    if (cell.method == method && cell.level == level) return cell;
  }
  throw std::runtime_error("coverage cell not found");
}

}  // namespace

TEST_CASE("criterion 1: split search matches exhaustive enumeration") {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(101);
  int mismatches = 0;
  for (int round = 0; round < 50; ++round) {
    const Eigen::Index n = 20 + static_cast<Eigen::Index>(rng.below(21));  // n <= 40
    const Eigen::Index p = 2 + static_cast<Eigen::Index>(rng.below(2));    // p <= 3
    const Dataset data = tsvc_test::random_dataset(rng, n, p, p == 3);
    TsvcConfig config = TsvcConfig::defaults(p, Family::gaussian());
    config.min_node_size = 3;
    const ModelStructure structure = ModelStructure::no_splits(p);

    const auto selection = select_best_split(data, structure, config);
    const auto oracle = tsvc_test::oracle_best_split(data, structure, config);
    if (selection.has_value() != oracle.has_value()) {
      ++mismatches;
      continue;
    }
    if (!selection) continue;
    const bool same_rule = selection->rule.target_covariate == oracle->candidate.covariate &&
                           selection->rule.modifier == oracle->candidate.modifier &&
                           selection->rule.threshold == oracle->candidate.threshold &&
                           selection->leaf == oracle->candidate.leaf;
    const bool same_deviance = std::fabs(selection->fit.deviance - oracle->deviance) <=
                               1e-10 * (1.0 + oracle->deviance);
    if (!same_rule || !same_deviance) ++mismatches;
  }
  const double seconds = elapsed_seconds(start);
  report(1, mismatches == 0 && seconds < 10.0,
         "50/50 datasets agree (mismatches=" + std::to_string(mismatches) +
             ", runtime=" + std::to_string(seconds) + "s, bound 10s)");
}

TEST_CASE("criterion 2: best-approximating oracle for the linear DGP") {
  ScenarioSpec spec;
  spec.scenario = ScenarioId::linear;
  spec.n = 300;
  spec.sigma_eps = 1.0;
  spec.seed = 2026;
  const ScenarioData scenario = generate_scenario(spec);
  const Eigen::MatrixXd& x = scenario.data.covariates();

  Rng rng(202);
  double worst = 0.0;
  for (int round = 0; round < 20; ++round) {
    ModelStructure structure = ModelStructure::no_splits(2);
    const int splits = 1 + static_cast<int>(rng.below(4));
    for (int s = 0; s < splits; ++s) {
      const int target = static_cast<int>(rng.below(2));
      const int modifier = 1 - target;
      auto& tree = structure.trees[static_cast<std::size_t>(target)];
      const int leaf = static_cast<int>(rng.below(tree.leaf_count()));
      const Eigen::Index row = 60 + static_cast<Eigen::Index>(rng.below(180));
      try {
        tree = tree.split_leaf(leaf, modifier, x(row, modifier));
        build_design(x, structure, scenario.config);
      } catch (const Error&) {
        structure.trees[static_cast<std::size_t>(target)] =
            ModelStructure::no_splits(2).trees[static_cast<std::size_t>(target)];
      }
    }
    const auto best = best_approximating_coefficients(structure, scenario.config,
                                                      scenario.true_mean, x);
    for (double coefficient : best[0]) worst = std::max(worst, std::fabs(coefficient - 0.25));
    for (double coefficient : best[1]) worst = std::max(worst, std::fabs(coefficient));
  }
  report(2, worst < 1e-10,
         "x1 coefficients equal 0.25 and x2 coefficients equal 0 under 20 perturbed "
         "structures (max deviation " + std::to_string(worst) + ", bound 1e-10)");
}

TEST_CASE("criterion 3: scenario-1 coverage at desk scale") {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<StudyCell> cells{{ScenarioId::linear, 200, 1.0}};
  const auto reports = run_study(cells, 200, {CiMethod::wald, CiMethod::parametric_percentile},
                                 {0.95}, 200, 30001, worker_threads());
  const double percentile_cav =
      find_cell(reports[0], CiMethod::parametric_percentile, 0.95).c_av;
  const double wald_cav = find_cell(reports[0], CiMethod::wald, 0.95).c_av;
  const double seconds = elapsed_seconds(start);
  const bool pass = percentile_cav >= 0.916 && percentile_cav <= 0.986 && wald_cav < 0.90 &&
                    seconds < 900.0;
  char buffer[256];
  std::snprintf(buffer, sizeof(buffer),
                "percentile C_av=%.3f (target [0.916, 0.986]), wald C_av=%.3f (< 0.90), "
                "runtime=%.0fs (bound 900s)",
                percentile_cav, wald_cav, seconds);
  report(3, pass, buffer);
}

TEST_CASE("criterion 4: scenario-2 method ordering at desk scale") {
  const std::vector<StudyCell> cells{{ScenarioId::varying, 200, 1.0}};
  const auto reports = run_study(
      cells, 150,
      {CiMethod::wald, CiMethod::parametric_percentile, CiMethod::bootstrap_calibrated},
      {0.95}, 150, 30002, worker_threads());
  const double percentile_cav =
      find_cell(reports[0], CiMethod::parametric_percentile, 0.95).c_av;
  const double calibrated_cav =
      find_cell(reports[0], CiMethod::bootstrap_calibrated, 0.95).c_av;
  const double wald_cav = find_cell(reports[0], CiMethod::wald, 0.95).c_av;
  const bool pass = percentile_cav > calibrated_cav && calibrated_cav > wald_cav;
  char buffer[256];
  std::snprintf(buffer, sizeof(buffer),
                "percentile C_av=%.3f > calibrated C_av=%.3f > wald C_av=%.3f",
                percentile_cav, calibrated_cav, wald_cav);
  report(4, pass, buffer);
}

TEST_CASE("criterion 5: scenario-1 split counts") {
  const std::vector<StudyCell> cells{{ScenarioId::linear, 200, 1.0},
                                     {ScenarioId::linear, 1000, 1.0}};
  const auto reports = run_study(cells, 500, {}, {0.95}, 1, 30003, worker_threads());
  const double total_200 = reports[0].splits.mean_total;
  const double total_1000 = reports[1].splits.mean_total;
  const double x1_by_x2 = reports[0].splits.mean_splits(0, 1);
  const double x2_by_x1 = reports[0].splits.mean_splits(1, 0);
  const bool pass = std::fabs(total_200 - 0.63) <= 0.15 &&
                    std::fabs(total_1000 - 0.22) <= 0.10 &&
                    std::fabs(x1_by_x2 - x2_by_x1) < 0.10;
  char buffer[256];
  std::snprintf(buffer, sizeof(buffer),
                "mean splits n=200: %.3f (0.63 +- 0.15), n=1000: %.3f (0.22 +- 0.10), "
                "|x1|x2 - x2|x1| = %.3f (< 0.10)",
                total_200, total_1000, std::fabs(x1_by_x2 - x2_by_x1));
  report(5, pass, buffer);
}

TEST_CASE("criterion 6: zero-split percentile CIs agree with Wald") {
  double ratio_sum = 0.0;
  int found = 0;
  for (std::uint64_t r = 0; found < 50 && r < 500; ++r) {
    ScenarioSpec spec;
    spec.scenario = ScenarioId::linear;
    spec.n = 200;
    spec.sigma_eps = 1.0;
    spec.seed = derive_seed(30006, 0, r);
    const ScenarioData scenario = generate_scenario(spec);
    const TsvcModel model = fit_tsvc(scenario.data, scenario.config);
    if (model.splits_performed != 0) continue;
    ++found;
    const auto percentile =
        parametric_percentile_cis(model, scenario.data, 200, 0.95, spec.seed, 1);
    const auto wald = wald_ci(model, 0.95);
    // x1 is the first coefficient in both tables.
    const double width_percentile = percentile.cis[0].upper - percentile.cis[0].lower;
    const double width_wald = wald[0].upper - wald[0].lower;
    ratio_sum += width_percentile / width_wald;
  }
  const double mean_ratio = ratio_sum / found;
  const bool pass = found == 50 && std::fabs(mean_ratio - 1.0) <= 0.15;
  char buffer[256];
  std::snprintf(buffer, sizeof(buffer),
                "mean width ratio over %d zero-split fits = %.3f (within 15%% of 1)",
                found, mean_ratio);
  report(6, pass, buffer);
}

TEST_CASE("criterion 7: average adjusted alpha of the calibration") {
  const std::vector<StudyCell> cells{{ScenarioId::linear, 200, 1.0}};
  const auto reports = run_study(cells, 200, {CiMethod::bootstrap_calibrated}, {0.95}, 200,
                                 30007, worker_threads());
  REQUIRE(!reports[0].alpha_adjusted.empty());
  const double mean_alpha = reports[0].alpha_adjusted[0].mean_alpha_av;
  const bool pass = std::fabs(mean_alpha - 0.036) <= 0.01;
  char buffer[128];
  std::snprintf(buffer, sizeof(buffer), "mean adjusted alpha = %.4f (0.036 +- 0.01)",
                mean_alpha);
  report(7, pass, buffer);
}

TEST_CASE("criterion 8: invariant suites") {
  bool pass = true;
  std::string failed;
  const auto require = [&](bool ok, const char* what) {
    if (!ok && pass) failed = what;
    pass = pass && ok;
  };

  // Partition exhaustiveness and disjointness.
  {
    ScenarioSpec spec{ScenarioId::varying, 150, 1.0, 808};
    const ScenarioData scenario = generate_scenario(spec);
    const TsvcModel model = fit_tsvc(scenario.data, scenario.config);
    for (const auto& tree : model.structure.trees) {
      std::vector<int> counts(static_cast<std::size_t>(tree.leaf_count()), 0);
      for (Eigen::Index i = 0; i < scenario.data.n(); ++i) {
        ++counts[static_cast<std::size_t>(tree.assign(scenario.data.covariates(), i))];
      }
      int total = 0;
      for (int c : counts) total += c;
      require(total == scenario.data.n(), "partition exhaustiveness");
    }

    // Deviance monotonicity and nestedness along the grown sequence.
    const auto sequence = grow_sequence(scenario.data, scenario.config);
    for (std::size_t s = 1; s < sequence.size(); ++s) {
      require(sequence[s].fit.deviance <= sequence[s - 1].fit.deviance + 1e-12,
              "deviance monotonicity");
      int changed = 0;
      for (std::size_t j = 0; j < sequence[s].structure.trees.size(); ++j) {
        const int before = sequence[s - 1].structure.trees[j].leaf_count();
        const int after = sequence[s].structure.trees[j].leaf_count();
        if (after != before) {
          ++changed;
          require(after == before + 1, "nestedness");
        }
      }
      require(changed == 1, "nestedness");
    }

    // Bootstrap-estimate identity and Wald symmetry on the fitted model.
    // Averaging a constant over leaf rows rounds at machine precision.
    const auto identity = bootstrap_estimate(model, model, scenario.data);
    for (std::size_t j = 0; j < identity.size(); ++j) {
      for (std::size_t m = 0; m < identity[j].size(); ++m) {
        require(std::fabs(identity[j][m] - model.coefficients[j][m]) <=
                    1e-14 * (1.0 + std::fabs(model.coefficients[j][m])),
                "bootstrap-estimate identity");
      }
    }
    for (const CoefficientCI& ci : wald_ci(model, 0.95)) {
      require(std::fabs((ci.upper - ci.estimate) - (ci.estimate - ci.lower)) < 1e-12,
              "wald symmetry");
    }
  }

  // Percentile of a constant distribution is a point.
  {
    const std::vector<double> constant(100, 1.75);
    const auto [lo, hi] = percentile_interval(constant, 0.95);
    require(lo == 1.75 && hi == 1.75, "percentile of constant");
  }

  // Determinism under a fixed seed and varying parallelism.
  {
    const std::vector<StudyCell> cells{{ScenarioId::linear, 80, 1.0}};
    const auto serial = run_study(cells, 4, {CiMethod::parametric_percentile}, {0.95}, 40,
                                  31415, 1);
    const auto parallel = run_study(cells, 4, {CiMethod::parametric_percentile}, {0.95}, 40,
                                    31415, 4);
    require(serial[0].coverage[0].c_av == parallel[0].coverage[0].c_av,
            "determinism across parallelism");
    require(serial[0].splits.mean_total == parallel[0].splits.mean_total,
            "determinism across parallelism");
  }

  // Discrete-hazard row counts: sum of the observed times.
  {
    Eigen::MatrixXd x(4, 2);
    x << 0.1, 2, 0.2, 5, 0.3, 1, 0.4, 3;
    Eigen::VectorXd event(4);
    event << 1, 0, 1, 1;
    const Dataset raw(event, x, {{"z", ColumnKind::continuous}, {"t", ColumnKind::ordinal}});
    const HazardExpansion expansion = expand_discrete_hazard(raw, {"t", "d"});
    require(expansion.data.n() == 2 + 5 + 1 + 3, "hazard row count");
  }

  report(8, pass, pass ? "all invariant suites hold" : "first failure: " + failed);
}

TEST_CASE("criterion 9: hand-expanded discrete-hazard oracle") {
  // Five subjects: (t, event, z): (3,1,0.5), (1,1,-1), (2,0,2), (4,0,0), (1,0,1).
  Eigen::MatrixXd x(5, 2);
  x << 0.5, 3, -1.0, 1, 2.0, 2, 0.0, 4, 1.0, 1;
  Eigen::VectorXd event(5);
  event << 1, 1, 0, 0, 0;
  const Dataset raw(event, x, {{"z", ColumnKind::continuous}, {"t", ColumnKind::ordinal}});
  const HazardExpansion expansion = expand_discrete_hazard(raw, {"t", "d"});

  // Hand expansion, one row per (subject, period): outcome, z, period, t2..t4.
  const double expected[11][6] = {
      {0, 0.5, 1, 0, 0, 0},  // subject 1, period 1
      {0, 0.5, 2, 1, 0, 0},  //            period 2
      {1, 0.5, 3, 0, 1, 0},  //            period 3, event
      {1, -1.0, 1, 0, 0, 0}, // subject 2, immediate event
      {0, 2.0, 1, 0, 0, 0},  // subject 3, censored at 2
      {0, 2.0, 2, 1, 0, 0},
      {0, 0.0, 1, 0, 0, 0},  // subject 4, censored at 4
      {0, 0.0, 2, 1, 0, 0},
      {0, 0.0, 3, 0, 1, 0},
      {0, 0.0, 4, 0, 0, 1},
      {0, 1.0, 1, 0, 0, 0},  // subject 5, censored at 1
  };

  bool pass = expansion.data.n() == 11 && expansion.data.p() == 5 && expansion.max_time == 4;
  for (Eigen::Index i = 0; pass && i < 11; ++i) {
    pass = pass && expansion.data.outcome()(i) == expected[i][0];
    for (Eigen::Index c = 0; c < 5; ++c) {
      pass = pass && expansion.data.covariates()(i, c) == expected[i][c + 1];
    }
  }
  report(9, pass, pass ? "expansion matches the 5-subject hand oracle row-for-row"
                       : "expansion deviates from the hand oracle");
}
