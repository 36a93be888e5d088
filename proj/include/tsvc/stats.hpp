#ifndef TSVC_STATS_HPP
#define TSVC_STATS_HPP

namespace tsvc {

/// Quantile function of the standard normal distribution (Wichura's AS 241,
/// double-precision branch). `p` must lie strictly in (0, 1).
double normal_quantile(double p);

/// Numerically stable inverse logit, 1 / (1 + exp(-eta)).
double inverse_logit(double eta);

}  // namespace tsvc

#endif
