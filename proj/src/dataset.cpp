#include "tsvc/dataset.hpp"

#include <utility>

#include "tsvc/errors.hpp"

namespace tsvc {

namespace {

void check_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) {
    throw InvalidInput(std::string(what) + " contains non-finite values");
  }
}

}  // namespace

Dataset::Dataset(Eigen::VectorXd outcome, Eigen::MatrixXd covariates,
                 std::vector<ColumnMeta> columns)
    : outcome_(std::move(outcome)),
      covariates_(std::move(covariates)),
      columns_(std::move(columns)) {
  if (outcome_.size() != covariates_.rows()) {
    throw InvalidInput("outcome length does not match covariate row count");
  }
  if (outcome_.size() < 2) throw InvalidInput("dataset needs at least 2 observations");
  if (covariates_.cols() < 1) throw InvalidInput("dataset needs at least 1 covariate");
  if (static_cast<Eigen::Index>(columns_.size()) != covariates_.cols()) {
    throw InvalidInput("column metadata does not match covariate count");
  }
  check_finite(outcome_, "outcome");
  if (!covariates_.allFinite()) {
    throw InvalidInput("covariates contain non-finite values");
  }
  for (Eigen::Index j = 0; j < covariates_.cols(); ++j) {
    if (columns_[static_cast<std::size_t>(j)].kind != ColumnKind::binary) continue;
    for (Eigen::Index i = 0; i < covariates_.rows(); ++i) {
      const double v = covariates_(i, j);
      if (v != 0.0 && v != 1.0) {
        throw InvalidInput("binary column '" + columns_[static_cast<std::size_t>(j)].name +
                           "' contains a value other than 0/1");
      }
    }
  }
}

int Dataset::column_index(const std::string& name) const {
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (columns_[j].name == name) return static_cast<int>(j);
  }
  return -1;
}

Dataset Dataset::with_outcome(Eigen::VectorXd outcome) const {
  if (outcome.size() != n()) {
    throw InvalidInput("replacement outcome has wrong length");
  }
  check_finite(outcome, "outcome");
  Dataset copy(*this);
  copy.outcome_ = std::move(outcome);
  return copy;
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), p());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= n()) throw InvalidInput("subset row index out of range");
    y(static_cast<Eigen::Index>(r)) = outcome_(rows[r]);
    x.row(static_cast<Eigen::Index>(r)) = covariates_.row(rows[r]);
  }
  return Dataset(std::move(y), std::move(x), columns_);
}

}  // namespace tsvc
