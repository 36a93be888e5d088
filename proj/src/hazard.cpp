#include "tsvc/hazard.hpp"

#include <cmath>
#include <string>

#include "tsvc/errors.hpp"

namespace tsvc {

HazardExpansion expand_discrete_hazard(const Dataset& raw, const SurvivalSchema& schema) {
  const int time_col = raw.column_index(schema.time_column);
  if (time_col < 0) {
    throw InvalidInput("survival data has no time column '" + schema.time_column + "'");
  }

  std::vector<int> times(static_cast<std::size_t>(raw.n()));
  Eigen::Index total_rows = 0;
  int max_time = 0;
  for (Eigen::Index i = 0; i < raw.n(); ++i) {
    const double t = raw.covariates()(i, time_col);
    if (!(t >= 1.0) || t != std::floor(t)) {
      throw InvalidInput("event time must be a positive integer (subject " +
                         std::to_string(i + 1) + " has " + std::to_string(t) + ")");
    }
    const double event = raw.outcome()(i);
    if (event != 0.0 && event != 1.0) {
      throw InvalidInput("event flag must be 0 or 1 (subject " + std::to_string(i + 1) + ")");
    }
    times[static_cast<std::size_t>(i)] = static_cast<int>(t);
    total_rows += static_cast<Eigen::Index>(t);
    max_time = std::max(max_time, static_cast<int>(t));
  }

  std::vector<int> keep;
  for (Eigen::Index c = 0; c < raw.p(); ++c) {
    if (c != time_col) keep.push_back(static_cast<int>(c));
  }
  const Eigen::Index n_base = static_cast<Eigen::Index>(keep.size());
  const Eigen::Index n_dummies = max_time - 1;
  const Eigen::Index p_out = n_base + 1 + n_dummies;

  Eigen::VectorXd outcome(total_rows);
  Eigen::MatrixXd covariates = Eigen::MatrixXd::Zero(total_rows, p_out);
  Eigen::Index row = 0;
  for (Eigen::Index i = 0; i < raw.n(); ++i) {
    const int t_i = times[static_cast<std::size_t>(i)];
    const bool event = raw.outcome()(i) == 1.0;
    for (int period = 1; period <= t_i; ++period, ++row) {
      outcome(row) = (event && period == t_i) ? 1.0 : 0.0;
      for (Eigen::Index c = 0; c < n_base; ++c) {
        covariates(row, c) = raw.covariates()(i, keep[static_cast<std::size_t>(c)]);
      }
      covariates(row, n_base) = period;
      if (period >= 2) covariates(row, n_base + period - 1) = 1.0;
    }
  }

  std::vector<ColumnMeta> columns;
  for (int c : keep) columns.push_back(raw.column(c));
  columns.push_back({schema.time_column, ColumnKind::ordinal});
  for (int period = 2; period <= max_time; ++period) {
    columns.push_back({schema.time_column + std::to_string(period), ColumnKind::binary});
  }

  HazardExpansion expansion{
      Dataset(std::move(outcome), std::move(covariates), std::move(columns)),
      static_cast<int>(n_base),
      {},
      max_time};
  for (Eigen::Index c = n_base + 1; c < p_out; ++c) {
    expansion.dummy_columns.push_back(static_cast<int>(c));
  }
  return expansion;
}

}  // namespace tsvc
