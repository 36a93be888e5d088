#ifndef TSVC_DATASET_HPP
#define TSVC_DATASET_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace tsvc {

enum class ColumnKind { continuous, binary, ordinal };

struct ColumnMeta {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
};

/// Outcome vector plus covariate matrix. Construction validates that all
/// values are finite, binary columns contain only {0, 1}, n >= 2 and p >= 1.
class Dataset {
 public:
  Dataset(Eigen::VectorXd outcome, Eigen::MatrixXd covariates,
          std::vector<ColumnMeta> columns);

  Eigen::Index n() const { return outcome_.size(); }
  Eigen::Index p() const { return covariates_.cols(); }

  const Eigen::VectorXd& outcome() const { return outcome_; }
  const Eigen::MatrixXd& covariates() const { return covariates_; }
  const std::vector<ColumnMeta>& columns() const { return columns_; }
  const ColumnMeta& column(Eigen::Index j) const { return columns_[static_cast<std::size_t>(j)]; }

  /// Index of the named covariate column, or -1.
  int column_index(const std::string& name) const;

  /// Same covariates with a replacement outcome (used by bootstrap sampling).
  Dataset with_outcome(Eigen::VectorXd outcome) const;

  /// Row subset (with repetitions allowed; used by nonparametric resampling).
  Dataset subset(const std::vector<Eigen::Index>& rows) const;

 private:
  Eigen::VectorXd outcome_;
  Eigen::MatrixXd covariates_;
  std::vector<ColumnMeta> columns_;
};

}  // namespace tsvc

#endif
