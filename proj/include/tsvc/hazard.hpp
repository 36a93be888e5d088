#ifndef TSVC_HAZARD_HPP
#define TSVC_HAZARD_HPP

#include <string>
#include <vector>

#include "tsvc/dataset.hpp"

namespace tsvc {

struct SurvivalSchema {
  std::string time_column;   // discrete event time t in {1, ..., k}
  std::string event_column;  // 1 = event observed, 0 = censored
};

/// Person-period expansion of discrete survival data. A subject observed to
/// time t contributes one row per period 1..t; the binary outcome is 1 only
/// in the final period of a subject with an observed event. The expanded
/// covariates are the subject covariates (time column removed), the current
/// period as an ordinal column, and k-1 period indicator columns carrying
/// the baseline hazard. Fitting a logistic model on the expansion yields the
/// proportional continuation ratio model.
struct HazardExpansion {
  Dataset data;
  int period_column = -1;          // index of the period column in `data`
  std::vector<int> dummy_columns;  // indices of the period indicators
  int max_time = 0;                // k
};

/// `raw` holds the event flag as its outcome and the time column among its
/// covariates. Times must be positive integers; event flags must be 0/1.
HazardExpansion expand_discrete_hazard(const Dataset& raw, const SurvivalSchema& schema);

}  // namespace tsvc

#endif
