#include "tsvc/serialize.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "tsvc/errors.hpp"

namespace tsvc {

namespace {

constexpr int kSchemaVersion = 1;

const char* role_name(Role role) {
  switch (role) {
    case Role::vary: return "vary";
    case Role::fixed_effect: return "fixed";
    case Role::modifier_only: return "modifier-only";
  }
  return "?";
}

Role role_from_name(const std::string& name) {
  if (name == "vary") return Role::vary;
  if (name == "fixed") return Role::fixed_effect;
  if (name == "modifier-only") return Role::modifier_only;
  throw InvalidInput("unknown covariate role '" + name + "'");
}

const char* kind_name(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::continuous: return "continuous";
    case ColumnKind::binary: return "binary";
    case ColumnKind::ordinal: return "ordinal";
  }
  return "?";
}

ColumnKind kind_from_name(const std::string& name) {
  if (name == "continuous") return ColumnKind::continuous;
  if (name == "binary") return ColumnKind::binary;
  if (name == "ordinal") return ColumnKind::ordinal;
  throw InvalidInput("unknown column kind '" + name + "'");
}

nlohmann::json node_to_json(const PartitionTree& tree, int node,
                            const std::vector<ColumnMeta>& columns) {
  const auto& nd = tree.nodes()[static_cast<std::size_t>(node)];
  if (nd.is_leaf()) {
    return nlohmann::json{{"leaf", nd.leaf_index}};
  }
  return nlohmann::json{
      {"modifier", columns[static_cast<std::size_t>(nd.modifier)].name},
      {"threshold", nd.threshold},
      {"left", node_to_json(tree, nd.left, columns)},
      {"right", node_to_json(tree, nd.right, columns)}};
}

PartitionTree tree_from_json(const nlohmann::json& node, int covariate,
                             const std::vector<ColumnMeta>& columns) {
  PartitionTree tree = PartitionTree::single_leaf(covariate);
  // Rebuild by replaying splits depth-first; leaf numbering is DFS order, so
  // splitting the left-most pending leaf first reproduces the original ids.
  struct Pending {
    const nlohmann::json* json;
    int leaf;
  };
  std::vector<Pending> stack{{&node, 0}};
  while (!stack.empty()) {
    const Pending item = stack.back();
    stack.pop_back();
    const nlohmann::json& j = *item.json;
    if (j.contains("leaf")) continue;
    const std::string name = j.at("modifier").get<std::string>();
    int modifier = -1;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (columns[c].name == name) modifier = static_cast<int>(c);
    }
    if (modifier < 0) throw InvalidInput("model document names unknown column '" + name + "'");
    tree = tree.split_leaf(item.leaf, modifier, j.at("threshold").get<double>());
    // After the split, the left child takes this leaf index and the right
    // child the next one; leaves beyond shift by one.
    for (auto& pending : stack) {
      if (pending.leaf > item.leaf) ++pending.leaf;
    }
    stack.push_back({&j.at("right"), item.leaf + 1});
    stack.push_back({&j.at("left"), item.leaf});
  }
  return tree;
}

}  // namespace

nlohmann::json serialize_model(const TsvcModel& model) {
  nlohmann::json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["family"] = model.config.family.name();
  doc["n_train"] = model.n_train;
  doc["intercept"] = {{"estimate", model.intercept}, {"se", model.intercept_se}};
  if (std::isfinite(model.residual_variance)) {
    doc["residual_variance"] = model.residual_variance;
  } else {
    doc["residual_variance"] = nullptr;
  }
  doc["bic"] = model.bic;
  doc["deviance"] = model.fit.deviance;
  doc["log_likelihood"] = model.fit.log_likelihood;
  doc["converged"] = model.fit.converged;
  doc["splits"] = model.splits_performed;

  nlohmann::json config;
  config["max_splits"] = model.config.max_splits;
  config["min_node_size"] = model.config.min_node_size;
  config["modifier_sets"] = model.config.modifier_sets;
  doc["config"] = std::move(config);

  nlohmann::json columns = nlohmann::json::array();
  for (const ColumnMeta& meta : model.columns) {
    columns.push_back({{"name", meta.name}, {"kind", kind_name(meta.kind)}});
  }
  doc["columns"] = std::move(columns);

  nlohmann::json covariates = nlohmann::json::array();
  for (std::size_t j = 0; j < model.structure.trees.size(); ++j) {
    const PartitionTree& tree = model.structure.trees[j];
    nlohmann::json entry;
    entry["name"] = model.columns[j].name;
    entry["role"] = role_name(model.config.roles[j]);
    entry["tree"] = node_to_json(tree, 0, model.columns);
    if (model.config.has_coefficient(static_cast<int>(j))) {
      entry["coefficients"] = model.coefficients[j];
      entry["standard_errors"] = model.standard_errors[j];
      entry["partitions"] = tree.leaf_descriptions(model.columns);
    }
    covariates.push_back(std::move(entry));
  }
  doc["covariates"] = std::move(covariates);
  return doc;
}

TsvcModel deserialize_model(const nlohmann::json& doc) {
  if (!doc.contains("schema_version") ||
      doc.at("schema_version").get<int>() != kSchemaVersion) {
    throw InvalidInput("unsupported model document schema version");
  }
  TsvcModel model;
  const std::string family = doc.at("family").get<std::string>();
  model.config.family = family == "gaussian" ? Family::gaussian() : Family::binomial();
  model.n_train = doc.at("n_train").get<Eigen::Index>();
  model.intercept = doc.at("intercept").at("estimate").get<double>();
  model.intercept_se = doc.at("intercept").at("se").get<double>();
  model.residual_variance = doc.at("residual_variance").is_null()
                                ? std::numeric_limits<double>::quiet_NaN()
                                : doc.at("residual_variance").get<double>();
  model.bic = doc.at("bic").get<double>();
  model.splits_performed = doc.at("splits").get<int>();

  model.config.max_splits = doc.at("config").at("max_splits").get<int>();
  model.config.min_node_size = doc.at("config").at("min_node_size").get<int>();
  model.config.modifier_sets =
      doc.at("config").at("modifier_sets").get<std::vector<std::vector<int>>>();

  for (const auto& column : doc.at("columns")) {
    model.columns.push_back({column.at("name").get<std::string>(),
                             kind_from_name(column.at("kind").get<std::string>())});
  }

  const auto& covariates = doc.at("covariates");
  model.coefficients.resize(covariates.size());
  model.standard_errors.resize(covariates.size());
  int j = 0;
  for (const auto& entry : covariates) {
    model.config.roles.push_back(role_from_name(entry.at("role").get<std::string>()));
    model.structure.trees.push_back(tree_from_json(entry.at("tree"), j, model.columns));
    if (entry.contains("coefficients")) {
      model.coefficients[static_cast<std::size_t>(j)] =
          entry.at("coefficients").get<std::vector<double>>();
      model.standard_errors[static_cast<std::size_t>(j)] =
          entry.at("standard_errors").get<std::vector<double>>();
      if (model.coefficients[static_cast<std::size_t>(j)].size() !=
          static_cast<std::size_t>(model.structure.trees.back().leaf_count())) {
        throw InvalidInput("model document coefficients do not match the tree");
      }
    }
    ++j;
  }
  model.config.validate(static_cast<Eigen::Index>(model.structure.trees.size()));

  // Rebuild the flat coefficient vector so design-based prediction paths and
  // Wald intervals work on a restored model.
  Eigen::Index q = 1;
  for (std::size_t c = 0; c < model.coefficients.size(); ++c) {
    q += static_cast<Eigen::Index>(model.coefficients[c].size());
  }
  model.fit.family = model.config.family;
  model.fit.coefficients.resize(q);
  model.fit.covariance = Eigen::MatrixXd::Zero(q, q);
  model.fit.coefficients(0) = model.intercept;
  model.fit.covariance(0, 0) = model.intercept_se * model.intercept_se;
  Eigen::Index col = 1;
  for (std::size_t c = 0; c < model.coefficients.size(); ++c) {
    for (std::size_t m = 0; m < model.coefficients[c].size(); ++m, ++col) {
      model.fit.coefficients(col) = model.coefficients[c][m];
      model.fit.covariance(col, col) =
          model.standard_errors[c][m] * model.standard_errors[c][m];
    }
  }
  model.fit.deviance = doc.at("deviance").get<double>();
  model.fit.log_likelihood = doc.at("log_likelihood").get<double>();
  model.fit.converged = doc.at("converged").get<bool>();
  return model;
}

std::string render_model(const TsvcModel& model) {
  std::ostringstream out;
  for (std::size_t j = 0; j < model.structure.trees.size(); ++j) {
    const std::string& name = model.columns[j].name;
    if (!model.config.has_coefficient(static_cast<int>(j))) {
      out << name << " | modifier only\n";
      continue;
    }
    const auto descriptions = model.structure.trees[j].leaf_descriptions(model.columns);
    for (std::size_t m = 0; m < descriptions.size(); ++m) {
      out << name << " | " << descriptions[m] << " -> "
          << model.coefficients[j][m] << " (se " << model.standard_errors[j][m] << ")\n";
    }
  }
  out << "intercept -> " << model.intercept << " (se " << model.intercept_se << ")\n";
  return out.str();
}

}  // namespace tsvc
