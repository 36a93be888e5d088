#ifndef TSVC_SIMULATION_HPP
#define TSVC_SIMULATION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "tsvc/ci.hpp"
#include "tsvc/tsvc.hpp"

namespace tsvc {

/// Data-generating processes of the coverage study:
///  - linear: y = 0.25 x1 + eps with two standard normal covariates.
///  - varying: y = 0.5 I(x2 <= 0.5 and x3 = 1) x1 - I(x2 > 0.5) x1 + eps,
///    x3 ~ Bernoulli(0.5).
///  - varying_known_modifiers: same DGP, but only x2 and x3 are admitted as
///    effect modifiers when fitting.
enum class ScenarioId { linear, varying, varying_known_modifiers };

const char* scenario_name(ScenarioId id);
ScenarioId scenario_from_name(const std::string& name);

struct ScenarioSpec {
  ScenarioId scenario = ScenarioId::linear;
  Eigen::Index n = 200;
  double sigma_eps = 1.0;
  std::uint64_t seed = 0;
};

struct ScenarioData {
  Dataset data;
  Eigen::VectorXd true_mean;
  TsvcConfig config;
};

ScenarioData generate_scenario(const ScenarioSpec& spec);

/// Everything recorded about one simulation replication.
struct ReplicationRecord {
  int replicate = 0;
  bool failed = false;
  Eigen::MatrixXd splits;        // [target covariate][modifier] split counts
  int total_splits = 0;
  std::vector<int> leaf_counts;  // coefficients per covariate in the fitted model

  struct CoverageSlice {
    CiMethod method;
    double level;
    // cover[j][m] = 1 iff the CI for coefficient (j, m) contains its
    // best-approximating target.
    std::vector<std::vector<std::uint8_t>> cover;
  };
  std::vector<CoverageSlice> coverage;

  struct CalibrationSlice {
    double level;
    std::vector<double> alpha_adjusted;  // per covariate
  };
  std::vector<CalibrationSlice> calibration;
};

/// Generates a dataset, fits the TSVC model, scores every requested CI
/// against the best-approximating coefficients of the selected structure.
ReplicationRecord run_replication(const ScenarioSpec& spec,
                                  const std::vector<CiMethod>& methods,
                                  const std::vector<double>& levels, int B);

struct CoverageCell {
  CiMethod method;
  double level;
  std::vector<double> c_j;  // per covariate with coefficients
  double c_av = 0.0;
};

/// C_j: replication average of each replication's within-model coverage
/// fraction; C_av: mean of the C_j.
CoverageCell coverage_summary(const std::vector<ReplicationRecord>& records,
                              CiMethod method, double level);

struct SplitCountTable {
  Eigen::MatrixXd mean_splits;  // per (target, modifier) pair
  double mean_total = 0.0;
};

SplitCountTable split_count_summary(const std::vector<ReplicationRecord>& records);

struct StudyCell {
  ScenarioId scenario = ScenarioId::linear;
  Eigen::Index n = 200;
  double sigma_eps = 1.0;
};

struct CoverageReport {
  StudyCell cell;
  int R_requested = 0;
  int R_effective = 0;
  int B = 0;
  std::uint64_t master_seed = 0;
  std::vector<std::string> covariate_names;
  std::vector<CoverageCell> coverage;
  SplitCountTable splits;

  struct AlphaSummary {
    double level;
    std::vector<double> mean_alpha;  // per covariate
    double mean_alpha_av = 0.0;
  };
  std::vector<AlphaSummary> alpha_adjusted;  // present when calibration was run
  int excluded = 0;
};

/// R replications per grid cell with deterministic per-replication seeds
/// derived from (master_seed, cell index, replicate index); the report is
/// identical for any thread count.
std::vector<CoverageReport> run_study(const std::vector<StudyCell>& cells, int R,
                                      const std::vector<CiMethod>& methods,
                                      const std::vector<double>& levels, int B,
                                      std::uint64_t master_seed, int threads = 1);

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b);

}  // namespace tsvc

#endif
