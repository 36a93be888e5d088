#ifndef TSVC_SERIALIZE_HPP
#define TSVC_SERIALIZE_HPP

#include <string>

#include <json.hpp>

#include "tsvc/tsvc.hpp"

namespace tsvc {

/// Lossless model document: structure (nested split rules with column names),
/// coefficients, standard errors, residual variance, BIC, and a config echo,
/// under a schema_version tag.
nlohmann::json serialize_model(const TsvcModel& model);

/// Inverse of serialize_model; rejects unknown schema versions. The restored
/// model predicts and produces Wald intervals exactly like the original.
TsvcModel deserialize_model(const nlohmann::json& document);

/// Flat human-readable rendering, one line per (covariate, partition):
/// "x1 | x2 <= 0.5 & x3 > 0 -> 0.492134 (se 0.0712)".
std::string render_model(const TsvcModel& model);

}  // namespace tsvc

#endif
