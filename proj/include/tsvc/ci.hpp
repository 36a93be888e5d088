#ifndef TSVC_CI_HPP
#define TSVC_CI_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "tsvc/tsvc.hpp"

namespace tsvc {

enum class CiMethod { wald, parametric_percentile, bootstrap_calibrated };

const char* ci_method_name(CiMethod method);

/// Confidence interval for one partition-specific coefficient.
struct CoefficientCI {
  int covariate = 0;   // covariate index j
  int partition = 0;   // leaf index m within tree j
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  CiMethod method = CiMethod::wald;
};

/// Symmetric normal-quantile intervals from the fit's standard errors
/// (no selection uncertainty).
std::vector<CoefficientCI> wald_ci(const TsvcModel& model, double level);

/// Outcome vector of parametric bootstrap replicate `b`: new outcomes drawn
/// from the fitted conditional distribution with covariates held fixed.
/// Draws are keyed by (seed, b, row), so results never depend on evaluation
/// order.
Eigen::VectorXd sample_parametric_outcome(const TsvcModel& model, const Dataset& data,
                                          int b, std::uint64_t seed);

/// All B replicate outcomes as columns of an n x B matrix.
Eigen::MatrixXd sample_parametric(const TsvcModel& model, const Dataset& data, int B,
                                  std::uint64_t seed);

/// Estimate of the original model's coefficient (j, m) from a bootstrap
/// model: the bootstrap coefficient function averaged over the original
/// partition's training rows.
std::vector<std::vector<double>> bootstrap_estimate(const TsvcModel& original,
                                                    const TsvcModel& boot_model,
                                                    const Dataset& data);

/// Collected bootstrap effect estimates for every coefficient of the
/// original model; estimate vectors always have length B (failed refits fall
/// back rather than being dropped, and are counted in failed_fits).
struct BootstrapRun {
  int replicate_count = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::vector<double>>> estimates;  // [j][m][b]
  int failed_fits = 0;
  std::vector<int> splits_per_replicate;
};

BootstrapRun run_parametric_bootstrap(const TsvcModel& model, const Dataset& data,
                                      int B, std::uint64_t seed, int threads = 1);

/// Percentile interval by the (B+1)-rank convention: lower order statistic
/// floor((B+1) alpha/2), upper ceil((B+1)(1 - alpha/2)). Requires
/// B >= ceil(2/alpha) so both tails are populated.
std::pair<double, double> percentile_interval(std::vector<double> estimates, double level);

std::vector<CoefficientCI> percentile_cis_from_run(const TsvcModel& model,
                                                   const BootstrapRun& run, double level);

struct PercentileResult {
  std::vector<CoefficientCI> cis;
  BootstrapRun run;
};

/// The four-step parametric bootstrap percentile procedure: sample B outcome
/// vectors from the fitted model, refit the full TSVC procedure on each,
/// average each bootstrap coefficient function over the original partitions,
/// and take percentile intervals.
PercentileResult parametric_percentile_cis(const TsvcModel& model, const Dataset& data,
                                           int B, double level, std::uint64_t seed,
                                           int threads = 1);

/// Shared resample state for bootstrap calibration: per replicate, the
/// coefficients and standard errors of the model fitted to the resample and
/// the coefficients of the same structure refitted on the original data.
/// Each resample model re-searches its split structure but is grown to the
/// original model's split count; re-running BIC pruning on resampled rows
/// systematically over-splits (the resample inherits the original sample's
/// selected quirks and stacks fresh selection noise on them).
struct CalibrationRun {
  int replicate_count = 0;
  std::uint64_t seed = 0;
  struct Coefficient {
    double estimate;
    double se;
    double refit_estimate;
  };
  // [b][j][m over the replicate model's leaves]
  std::vector<std::vector<std::vector<Coefficient>>> replicates;
  int failed_fits = 0;
};

CalibrationRun run_calibration_bootstrap(const TsvcModel& model, const Dataset& data,
                                         int B, std::uint64_t seed, int threads = 1);

struct CalibrationResult {
  std::vector<CoefficientCI> cis;
  std::vector<double> alpha_adjusted;  // per covariate; NaN for modifier-only
  int failed_fits = 0;
};

CalibrationResult calibrated_cis_from_run(const TsvcModel& model,
                                          const CalibrationRun& run, double level);

/// Wald intervals at a per-covariate alpha chosen so that, across B
/// nonparametric resamples, nested Wald intervals around the resample fits
/// cover the refit-on-original coefficients at the nominal rate.
CalibrationResult bootstrap_calibrated_cis(const TsvcModel& model, const Dataset& data,
                                           int B, double level, std::uint64_t seed,
                                           int threads = 1);

/// Interpolated adjusted alpha given coverage rates `gammas` over the alpha
/// grid: the first grid point whose coverage drops below 1 - alpha, blended
/// with its predecessor; alpha when no point qualifies, the grid floor when
/// the first point already fails.
double adjusted_alpha(const std::vector<double>& gammas,
                      const std::vector<double>& alphas, double alpha);

/// Grid of K equidistant alpha levels from 0.0001 up to alpha
/// (K = 100 for alpha 0.05, 200 for alpha 0.1, otherwise ceil(alpha/0.0005)).
std::vector<double> calibration_alpha_grid(double alpha);

/// Coefficients maximizing the fixed-structure model likelihood with the
/// response replaced by the true conditional mean (covariates fixed at the
/// observed values) -- the estimand the intervals are scored against.
std::vector<std::vector<double>> best_approximating_coefficients(
    const ModelStructure& structure, const TsvcConfig& config,
    const Eigen::VectorXd& true_mean, const Eigen::MatrixXd& covariates);

}  // namespace tsvc

#endif
