#include "tsvc/ci.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tsvc/errors.hpp"
#include "tsvc/parallel.hpp"
#include "tsvc/rng.hpp"

namespace tsvc {

namespace {

constexpr std::uint64_t kParametricTag = 0x70617261;  // stream tags for the two
constexpr std::uint64_t kResampleTag = 0x72657361;    // bootstrap flavours

void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw ConfigError("confidence level must lie in (0, 1)");
  }
}

std::vector<int> coefficient_covariates(const TsvcModel& model) {
  std::vector<int> out;
  for (std::size_t j = 0; j < model.structure.trees.size(); ++j) {
    if (model.config.has_coefficient(static_cast<int>(j))) out.push_back(static_cast<int>(j));
  }
  return out;
}

/// Fallback chain for a degenerate bootstrap refit: the plain no-split GLM,
/// then the original model itself. Returns whether a fallback was needed.
TsvcModel fit_replicate(const TsvcModel& original, const Dataset& sample, bool& failed) {
  try {
    TsvcModel model = fit_tsvc(sample, original.config);
    failed = !model.fit.converged;
    return model;
  } catch (const Error&) {
  }
  failed = true;
  TsvcConfig no_splits = original.config;
  no_splits.max_splits = 0;
  try {
    return fit_tsvc(sample, no_splits);
  } catch (const Error&) {
    return original;
  }
}

}  // namespace

const char* ci_method_name(CiMethod method) {
  switch (method) {
    case CiMethod::wald: return "wald";
    case CiMethod::parametric_percentile: return "parametric_percentile";
    case CiMethod::bootstrap_calibrated: return "bootstrap_calibrated";
  }
  return "?";
}

std::vector<CoefficientCI> wald_ci(const TsvcModel& model, double level) {
  check_level(level);
  const double z = normal_quantile(1.0 - (1.0 - level) / 2.0);
  std::vector<CoefficientCI> out;
  for (int j : coefficient_covariates(model)) {
    const auto& coefs = model.coefficients[static_cast<std::size_t>(j)];
    const auto& ses = model.standard_errors[static_cast<std::size_t>(j)];
    for (std::size_t m = 0; m < coefs.size(); ++m) {
      CoefficientCI ci;
      ci.covariate = j;
      ci.partition = static_cast<int>(m);
      ci.estimate = coefs[m];
      ci.lower = coefs[m] - z * ses[m];
      ci.upper = coefs[m] + z * ses[m];
      ci.level = level;
      ci.method = CiMethod::wald;
      out.push_back(ci);
    }
  }
  return out;
}

Eigen::VectorXd sample_parametric_outcome(const TsvcModel& model, const Dataset& data,
                                          int b, std::uint64_t seed) {
  const Eigen::VectorXd eta = model.linear_predictor(data.covariates());
  Eigen::VectorXd y(data.n());
  const Rng replicate_stream = Rng(seed).child(kParametricTag).child(static_cast<std::uint64_t>(b));
  if (model.config.family.is_gaussian()) {
    if (!(model.residual_variance >= 0.0)) {
      throw InvalidInput("parametric sampling needs a Gaussian model with residual variance");
    }
    const double sd = std::sqrt(model.residual_variance);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      Rng row_stream = replicate_stream.child(static_cast<std::uint64_t>(i));
      y(i) = eta(i) + sd * row_stream.normal();
    }
  } else {
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      Rng row_stream = replicate_stream.child(static_cast<std::uint64_t>(i));
      y(i) = row_stream.bernoulli(inverse_logit(eta(i))) ? 1.0 : 0.0;
    }
  }
  return y;
}

Eigen::MatrixXd sample_parametric(const TsvcModel& model, const Dataset& data, int B,
                                  std::uint64_t seed) {
  if (B < 1) throw ConfigError("bootstrap needs B >= 1");
  Eigen::MatrixXd samples(data.n(), B);
  for (int b = 0; b < B; ++b) {
    samples.col(b) = sample_parametric_outcome(model, data, b, seed);
  }
  return samples;
}

std::vector<std::vector<double>> bootstrap_estimate(const TsvcModel& original,
                                                    const TsvcModel& boot_model,
                                                    const Dataset& data) {
  const Eigen::MatrixXd& x = data.covariates();
  std::vector<std::vector<double>> out(static_cast<std::size_t>(data.p()));
  for (int j : coefficient_covariates(original)) {
    const PartitionTree& tree = original.structure.trees[static_cast<std::size_t>(j)];
    std::vector<double> sums(static_cast<std::size_t>(tree.leaf_count()), 0.0);
    std::vector<int> counts(static_cast<std::size_t>(tree.leaf_count()), 0);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const auto leaf = static_cast<std::size_t>(tree.assign(x, i));
      sums[leaf] += boot_model.varying_coefficient(j, x, i);
      ++counts[leaf];
    }
    auto& row = out[static_cast<std::size_t>(j)];
    row.resize(sums.size());
    for (std::size_t m = 0; m < sums.size(); ++m) {
      if (counts[m] == 0) {
        throw InvalidInput("original partition is empty on the supplied data");
      }
      row[m] = sums[m] / counts[m];
    }
  }
  return out;
}

BootstrapRun run_parametric_bootstrap(const TsvcModel& model, const Dataset& data,
                                      int B, std::uint64_t seed, int threads) {
  if (B < 1) throw ConfigError("bootstrap needs B >= 1");
  BootstrapRun run;
  run.replicate_count = B;
  run.seed = seed;
  run.estimates.resize(static_cast<std::size_t>(data.p()));
  for (int j : coefficient_covariates(model)) {
    run.estimates[static_cast<std::size_t>(j)].assign(
        static_cast<std::size_t>(model.structure.trees[static_cast<std::size_t>(j)].leaf_count()),
        std::vector<double>(static_cast<std::size_t>(B), 0.0));
  }
  run.splits_per_replicate.assign(static_cast<std::size_t>(B), 0);

  std::vector<std::uint8_t> failures(static_cast<std::size_t>(B), 0);
  parallel_for(static_cast<std::size_t>(B), threads, [&](std::size_t b) {
    const Dataset sample =
        data.with_outcome(sample_parametric_outcome(model, data, static_cast<int>(b), seed));
    bool failed = false;
    const TsvcModel replicate = fit_replicate(model, sample, failed);
    failures[b] = failed ? 1 : 0;
    run.splits_per_replicate[b] = replicate.splits_performed;
    const auto estimates = bootstrap_estimate(model, replicate, data);
    for (int j : coefficient_covariates(model)) {
      const auto& per_leaf = estimates[static_cast<std::size_t>(j)];
      for (std::size_t m = 0; m < per_leaf.size(); ++m) {
        run.estimates[static_cast<std::size_t>(j)][m][b] = per_leaf[m];
      }
    }
  });
  for (std::uint8_t f : failures) run.failed_fits += f;
  return run;
}

std::pair<double, double> percentile_interval(std::vector<double> estimates, double level) {
  check_level(level);
  const double alpha = 1.0 - level;
  const auto B = static_cast<double>(estimates.size());
  if (estimates.empty() || B < std::ceil(2.0 / alpha)) {
    throw ConfigError("percentile interval needs B >= ceil(2/alpha) bootstrap estimates");
  }
  std::sort(estimates.begin(), estimates.end());
  const auto lower_rank = static_cast<std::size_t>(std::floor((B + 1.0) * alpha / 2.0));
  const auto upper_rank = static_cast<std::size_t>(std::ceil((B + 1.0) * (1.0 - alpha / 2.0)));
  return {estimates[lower_rank - 1], estimates[upper_rank - 1]};
}

std::vector<CoefficientCI> percentile_cis_from_run(const TsvcModel& model,
                                                   const BootstrapRun& run, double level) {
  std::vector<CoefficientCI> out;
  for (int j : coefficient_covariates(model)) {
    const auto& coefs = model.coefficients[static_cast<std::size_t>(j)];
    for (std::size_t m = 0; m < coefs.size(); ++m) {
      const auto [lower, upper] =
          percentile_interval(run.estimates[static_cast<std::size_t>(j)][m], level);
      CoefficientCI ci;
      ci.covariate = j;
      ci.partition = static_cast<int>(m);
      ci.estimate = coefs[m];
      ci.lower = lower;
      ci.upper = upper;
      ci.level = level;
      ci.method = CiMethod::parametric_percentile;
      out.push_back(ci);
    }
  }
  return out;
}

PercentileResult parametric_percentile_cis(const TsvcModel& model, const Dataset& data,
                                           int B, double level, std::uint64_t seed,
                                           int threads) {
  check_level(level);
  PercentileResult result;
  result.run = run_parametric_bootstrap(model, data, B, seed, threads);
  result.cis = percentile_cis_from_run(model, result.run, level);
  return result;
}

std::vector<double> calibration_alpha_grid(double alpha) {
  constexpr double kFloor = 0.0001;
  if (!(alpha > kFloor && alpha < 1.0)) {
    throw ConfigError("calibration level out of range");
  }
  const int K = static_cast<int>(std::ceil(alpha / 0.0005));
  std::vector<double> grid(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    grid[static_cast<std::size_t>(k)] = kFloor + (alpha - kFloor) * k / (K - 1);
  }
  grid.back() = alpha;
  return grid;
}

double adjusted_alpha(const std::vector<double>& gammas,
                      const std::vector<double>& alphas, double alpha) {
  if (gammas.size() != alphas.size() || gammas.empty()) {
    throw InvalidInput("coverage and alpha grids must match");
  }
  std::size_t k = gammas.size();
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    if (gammas[i] < 1.0 - alpha) {
      k = i;
      break;
    }
  }
  if (k == gammas.size()) return alpha;  // nominal coverage everywhere
  if (k == 0) return alphas.front();     // even the widest grid interval fails
  const double f = (gammas[k - 1] - 1.0 + alpha) / (gammas[k - 1] - gammas[k]);
  return (1.0 - f) * alphas[k - 1] + f * alphas[k];
}

CalibrationRun run_calibration_bootstrap(const TsvcModel& model, const Dataset& data,
                                         int B, std::uint64_t seed, int threads) {
  if (B < 1) throw ConfigError("bootstrap needs B >= 1");
  CalibrationRun run;
  run.replicate_count = B;
  run.seed = seed;
  run.replicates.resize(static_cast<std::size_t>(B));

  std::vector<std::uint8_t> failures(static_cast<std::size_t>(B), 0);
  parallel_for(static_cast<std::size_t>(B), threads, [&](std::size_t b) {
    Rng stream = Rng(seed).child(kResampleTag).child(b);
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(data.n()));
    for (auto& r : rows) {
      r = static_cast<Eigen::Index>(stream.below(static_cast<std::uint64_t>(data.n())));
    }
    auto& slot = run.replicates[b];
    slot.resize(static_cast<std::size_t>(data.p()));
    try {
      const Dataset resample = data.subset(rows);
      // Resampled data inherits the original sample's own selected split as
      // genuine structure and adds fresh selection noise on top, so re-running
      // BIC pruning here cascades to the split cap on nearly every replicate.
      // The replicate model therefore re-searches the structure but is grown
      // to the original model's size.
      TsvcConfig boot_config = model.config;
      boot_config.max_splits = model.splits_performed;
      std::vector<TsvcModel> sequence = grow_sequence(resample, boot_config);
      const TsvcModel boot = std::move(sequence.back());
      const GlmFit refit = fit_glm(build_design(data, boot.structure, model.config),
                                   data.outcome(), model.config.family);
      for (std::size_t j = 0; j < slot.size(); ++j) {
        if (!model.config.has_coefficient(static_cast<int>(j))) continue;
        const auto& coefs = boot.coefficients[j];
        const auto& ses = boot.standard_errors[j];
        for (std::size_t m = 0; m < coefs.size(); ++m) {
          const Eigen::Index col = boot.column_of(static_cast<int>(j), static_cast<int>(m));
          slot[j].push_back({coefs[m], ses[m], refit.coefficients(col)});
        }
      }
      if (!boot.fit.converged || !refit.converged) failures[b] = 1;
    } catch (const Error&) {
      slot.clear();  // replicate excluded from the coverage rates
      failures[b] = 1;
    }
  });
  for (std::uint8_t f : failures) run.failed_fits += f;
  return run;
}

CalibrationResult calibrated_cis_from_run(const TsvcModel& model,
                                          const CalibrationRun& run, double level) {
  check_level(level);
  const double alpha = 1.0 - level;
  const std::vector<double> grid = calibration_alpha_grid(alpha);
  std::vector<double> z_grid(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    z_grid[k] = normal_quantile(1.0 - grid[k] / 2.0);
  }

  CalibrationResult result;
  result.failed_fits = run.failed_fits;
  result.alpha_adjusted.assign(static_cast<std::size_t>(model.structure.trees.size()),
                               std::numeric_limits<double>::quiet_NaN());

  for (int j : coefficient_covariates(model)) {
    std::vector<double> gammas(grid.size(), 0.0);
    int used = 0;
    for (const auto& replicate : run.replicates) {
      if (replicate.empty()) continue;
      const auto& coefs = replicate[static_cast<std::size_t>(j)];
      if (coefs.empty()) continue;
      ++used;
      for (std::size_t k = 0; k < grid.size(); ++k) {
        int covered = 0;
        for (const auto& c : coefs) {
          if (std::fabs(c.refit_estimate - c.estimate) <= z_grid[k] * c.se) ++covered;
        }
        gammas[k] += static_cast<double>(covered) / static_cast<double>(coefs.size());
      }
    }
    if (used == 0) {
      result.alpha_adjusted[static_cast<std::size_t>(j)] = alpha;
    } else {
      for (double& g : gammas) g /= used;
      result.alpha_adjusted[static_cast<std::size_t>(j)] = adjusted_alpha(gammas, grid, alpha);
    }

    const double z = normal_quantile(1.0 - result.alpha_adjusted[static_cast<std::size_t>(j)] / 2.0);
    const auto& estimates = model.coefficients[static_cast<std::size_t>(j)];
    const auto& ses = model.standard_errors[static_cast<std::size_t>(j)];
    for (std::size_t m = 0; m < estimates.size(); ++m) {
      CoefficientCI ci;
      ci.covariate = j;
      ci.partition = static_cast<int>(m);
      ci.estimate = estimates[m];
      ci.lower = estimates[m] - z * ses[m];
      ci.upper = estimates[m] + z * ses[m];
      ci.level = level;
      ci.method = CiMethod::bootstrap_calibrated;
      result.cis.push_back(ci);
    }
  }
  return result;
}

CalibrationResult bootstrap_calibrated_cis(const TsvcModel& model, const Dataset& data,
                                           int B, double level, std::uint64_t seed,
                                           int threads) {
  check_level(level);
  const CalibrationRun run = run_calibration_bootstrap(model, data, B, seed, threads);
  return calibrated_cis_from_run(model, run, level);
}

std::vector<std::vector<double>> best_approximating_coefficients(
    const ModelStructure& structure, const TsvcConfig& config,
    const Eigen::VectorXd& true_mean, const Eigen::MatrixXd& covariates) {
  const Eigen::MatrixXd design = build_design(covariates, structure, config);
  const GlmFit fit = fit_glm(design, true_mean, config.family);

  std::vector<std::vector<double>> out(structure.trees.size());
  Eigen::Index column = 1;
  for (std::size_t j = 0; j < structure.trees.size(); ++j) {
    if (!config.has_coefficient(static_cast<int>(j))) continue;
    const int leaves = structure.trees[j].leaf_count();
    for (int m = 0; m < leaves; ++m) out[j].push_back(fit.coefficients(column++));
  }
  return out;
}

}  // namespace tsvc
