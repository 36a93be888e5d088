#include "tsvc/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "tsvc/ci.hpp"
#include "tsvc/csv.hpp"
#include "tsvc/errors.hpp"
#include "tsvc/hazard.hpp"
#include "tsvc/serialize.hpp"
#include "tsvc/simulation.hpp"
#include "tsvc/tsvc.hpp"

namespace tsvc {

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct FitFlags {
  std::string data_path;
  std::string outcome;
  std::string family = "gaussian";
  int max_splits = 5;
  int min_node_size = 5;
  std::vector<std::string> vary;
  std::vector<std::string> fixed;
  std::vector<std::string> modifier_only;
  std::vector<std::string> ordinal;
  std::vector<std::string> modifier_rules;  // target=mod1,mod2
  std::string survival_time;
  std::string event_column;
};

void add_fit_flags(CLI::App* cmd, FitFlags& flags) {
  cmd->add_option("--data", flags.data_path, "input CSV file")->required();
  cmd->add_option("--outcome", flags.outcome, "outcome column name");
  cmd->add_option("--family", flags.family, "gaussian or binomial")
      ->check(CLI::IsMember({"gaussian", "binomial"}));
  cmd->add_option("--max-splits", flags.max_splits, "maximal number of splits S");
  cmd->add_option("--min-node-size", flags.min_node_size, "minimal observations per partition");
  cmd->add_option("--vary", flags.vary, "columns with splittable effects (default: all)")
      ->delimiter(',');
  cmd->add_option("--fixed", flags.fixed, "columns with never-varying linear effects")
      ->delimiter(',');
  cmd->add_option("--modifier-only", flags.modifier_only,
                  "columns used only as effect modifiers")
      ->delimiter(',');
  cmd->add_option("--ordinal", flags.ordinal, "columns to treat as ordinal")->delimiter(',');
  cmd->add_option("--modifiers", flags.modifier_rules,
                  "allowed modifiers per column, e.g. x1=x2,x3 (repeatable)");
  cmd->add_option("--survival-time", flags.survival_time,
                  "discrete event time column (enables person-period expansion)");
  cmd->add_option("--event", flags.event_column, "event indicator column (1=event, 0=censored)");
}

struct FitContext {
  Dataset data;
  TsvcConfig config;
  bool survival = false;
};

FitContext prepare_fit(const FitFlags& flags) {
  const bool survival = !flags.survival_time.empty();
  if (survival && flags.event_column.empty()) {
    throw ConfigError("--survival-time requires --event");
  }
  if (survival && flags.family == "gaussian") {
    // Person-period expansion realizes a logistic continuation ratio model.
    throw ConfigError("survival expansion requires --family binomial");
  }
  if (!survival && flags.outcome.empty()) throw ConfigError("--outcome is required");

  CsvLoadSpec load;
  load.outcome_column = survival ? flags.event_column : flags.outcome;
  load.ordinal_columns = flags.ordinal;
  if (survival) load.ordinal_columns.push_back(flags.survival_time);

  Dataset raw = load_csv(flags.data_path, load);
  const Family family = flags.family == "gaussian" ? Family::gaussian() : Family::binomial();

  std::optional<HazardExpansion> expansion;
  if (survival) {
    expansion = expand_discrete_hazard(raw, SurvivalSchema{flags.survival_time, flags.event_column});
  }
  const Dataset& data = survival ? expansion->data : raw;

  TsvcConfig config = TsvcConfig::defaults(data.p(), family);
  config.max_splits = flags.max_splits;
  config.min_node_size = flags.min_node_size;

  if (survival) {
    // Period indicators carry the baseline hazard as fixed effects; the
    // period column is the default (and only) candidate effect modifier.
    const int period = expansion->period_column;
    config.roles[static_cast<std::size_t>(period)] = Role::modifier_only;
    for (int dummy : expansion->dummy_columns) {
      config.roles[static_cast<std::size_t>(dummy)] = Role::fixed_effect;
    }
    for (Eigen::Index j = 0; j < data.p(); ++j) {
      config.modifier_sets[static_cast<std::size_t>(j)].clear();
      if (static_cast<int>(j) != period) {
        config.modifier_sets[static_cast<std::size_t>(j)].push_back(period);
      }
    }
  }

  const auto column_index = [&](const std::string& name) {
    const int j = data.column_index(name);
    if (j < 0) throw ConfigError("unknown column '" + name + "'");
    return j;
  };
  if (!flags.vary.empty()) {
    for (Eigen::Index j = 0; j < data.p(); ++j) {
      config.roles[static_cast<std::size_t>(j)] = Role::fixed_effect;
    }
    for (const std::string& name : flags.vary) {
      config.roles[static_cast<std::size_t>(column_index(name))] = Role::vary;
    }
  }
  for (const std::string& name : flags.fixed) {
    config.roles[static_cast<std::size_t>(column_index(name))] = Role::fixed_effect;
  }
  for (const std::string& name : flags.modifier_only) {
    config.roles[static_cast<std::size_t>(column_index(name))] = Role::modifier_only;
  }
  for (const std::string& rule : flags.modifier_rules) {
    const std::size_t eq = rule.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--modifiers expects target=mod1,mod2 but got '" + rule + "'");
    }
    const int target = column_index(rule.substr(0, eq));
    std::vector<int> mods;
    for (const std::string& name : split(rule.substr(eq + 1), ',')) {
      const int k = column_index(name);
      if (k == target) throw ConfigError("'" + name + "' cannot modify itself");
      mods.push_back(k);
    }
    config.modifier_sets[static_cast<std::size_t>(target)] = std::move(mods);
  }

  config.validate(data.p());
  return FitContext{data, std::move(config), survival};
}

CiMethod method_from_name(const std::string& name) {
  if (name == "wald") return CiMethod::wald;
  if (name == "percentile" || name == "parametric_percentile" || name == "parametric-percentile") {
    return CiMethod::parametric_percentile;
  }
  if (name == "calibrated" || name == "bootstrap_calibrated" || name == "bootstrap-calibrated") {
    return CiMethod::bootstrap_calibrated;
  }
  throw ConfigError("unknown CI method '" + name + "'");
}

std::string ci_table_csv(const TsvcModel& model, const std::vector<CoefficientCI>& cis) {
  std::ostringstream out;
  out << "covariate,partition,estimate,exp_estimate,method,level,lower,upper,exp_lower,exp_upper\n";
  std::vector<std::vector<std::string>> descriptions;
  for (const auto& tree : model.structure.trees) {
    descriptions.push_back(tree.leaf_descriptions(model.columns));
  }
  for (const CoefficientCI& ci : cis) {
    const auto j = static_cast<std::size_t>(ci.covariate);
    out << model.columns[j].name << ","
        << '"' << descriptions[j][static_cast<std::size_t>(ci.partition)] << '"' << ","
        << format_number(ci.estimate) << "," << format_number(std::exp(ci.estimate)) << ","
        << ci_method_name(ci.method) << "," << format_number(ci.level) << ","
        << format_number(ci.lower) << "," << format_number(ci.upper) << ","
        << format_number(std::exp(ci.lower)) << "," << format_number(std::exp(ci.upper))
        << "\n";
  }
  return out.str();
}

nlohmann::json ci_table_json(const TsvcModel& model, const std::vector<CoefficientCI>& cis) {
  nlohmann::json rows = nlohmann::json::array();
  std::vector<std::vector<std::string>> descriptions;
  for (const auto& tree : model.structure.trees) {
    descriptions.push_back(tree.leaf_descriptions(model.columns));
  }
  for (const CoefficientCI& ci : cis) {
    const auto j = static_cast<std::size_t>(ci.covariate);
    rows.push_back({{"covariate", model.columns[j].name},
                    {"partition", descriptions[j][static_cast<std::size_t>(ci.partition)]},
                    {"estimate", ci.estimate},
                    {"exp_estimate", std::exp(ci.estimate)},
                    {"method", ci_method_name(ci.method)},
                    {"level", ci.level},
                    {"lower", ci.lower},
                    {"upper", ci.upper}});
  }
  return rows;
}

int command_fit(const FitFlags& flags, const std::string& model_out,
                const std::string& tree_out, std::uint64_t seed) {
  std::cout << "seed: " << seed << "\n";
  const FitContext context = prepare_fit(flags);
  const TsvcModel model = fit_tsvc(context.data, context.config);

  write_file_atomic(model_out, serialize_model(model).dump(2) + "\n");
  const std::string rendering = render_model(model);
  if (!tree_out.empty()) write_file_atomic(tree_out, rendering);

  std::cout << "n: " << context.data.n() << "\nsplits: " << model.splits_performed
            << "\nbic: " << format_number(model.bic) << "\n"
            << rendering << "model written to " << model_out << "\n";
  return 0;
}

int command_ci(const FitFlags& flags, const std::string& model_path,
               const std::vector<std::string>& method_names, std::vector<double> levels,
               int B, std::uint64_t seed, int threads, const std::string& out_csv,
               const std::string& out_json) {
  std::cout << "seed: " << seed << "\n";

  std::vector<CiMethod> methods;
  for (const std::string& name : method_names) methods.push_back(method_from_name(name));
  if (levels.empty()) levels.push_back(0.95);
  for (double level : levels) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("levels must lie in (0, 1)");
  }
  if (B < 1) throw ConfigError("B must be >= 1");

  FitContext context = prepare_fit(flags);
  TsvcModel model;
  if (!model_path.empty()) {
    std::ifstream file(model_path);
    if (!file) throw Error("cannot open '" + model_path + "'");
    model = deserialize_model(nlohmann::json::parse(file));
    for (std::size_t j = 0; j < model.columns.size(); ++j) {
      if (context.data.column_index(model.columns[j].name) != static_cast<int>(j)) {
        throw InvalidInput("data columns do not match the saved model");
      }
    }
  } else {
    model = fit_tsvc(context.data, context.config);
  }

  std::vector<CoefficientCI> all;
  for (CiMethod method : methods) {
    if (method == CiMethod::wald) {
      for (double level : levels) {
        const auto cis = wald_ci(model, level);
        all.insert(all.end(), cis.begin(), cis.end());
      }
    } else if (method == CiMethod::parametric_percentile) {
      const BootstrapRun run = run_parametric_bootstrap(model, context.data, B, seed, threads);
      if (run.failed_fits > 0) {
        std::cerr << "note: " << run.failed_fits << " of " << B
                  << " bootstrap refits fell back or did not converge\n";
      }
      for (double level : levels) {
        const auto cis = percentile_cis_from_run(model, run, level);
        all.insert(all.end(), cis.begin(), cis.end());
      }
    } else {
      const CalibrationRun run = run_calibration_bootstrap(model, context.data, B, seed, threads);
      for (double level : levels) {
        const auto result = calibrated_cis_from_run(model, run, level);
        all.insert(all.end(), result.cis.begin(), result.cis.end());
      }
    }
  }

  write_file_atomic(out_csv, ci_table_csv(model, all));
  std::cout << "intervals written to " << out_csv << "\n";
  if (!out_json.empty()) {
    nlohmann::json doc;
    doc["schema_version"] = 1;
    doc["seed"] = seed;
    doc["B"] = B;
    doc["intervals"] = ci_table_json(model, all);
    write_file_atomic(out_json, doc.dump(2) + "\n");
    std::cout << "intervals written to " << out_json << "\n";
  }
  return 0;
}

std::string report_csv(const std::vector<CoverageReport>& reports) {
  std::ostringstream out;
  out << "scenario,n,sigma,R,R_effective,B,seed,method,level,metric,covariate,value\n";
  for (const CoverageReport& report : reports) {
    const std::string prefix = std::string(scenario_name(report.cell.scenario)) + "," +
                               std::to_string(report.cell.n) + "," +
                               format_number(report.cell.sigma_eps) + "," +
                               std::to_string(report.R_requested) + "," +
                               std::to_string(report.R_effective) + "," +
                               std::to_string(report.B) + "," +
                               std::to_string(report.master_seed) + ",";
    for (const CoverageCell& cell : report.coverage) {
      const std::string method_level =
          std::string(ci_method_name(cell.method)) + "," + format_number(cell.level) + ",";
      for (std::size_t j = 0; j < cell.c_j.size(); ++j) {
        out << prefix << method_level << "coverage," << report.covariate_names[j] << ","
            << format_number(cell.c_j[j]) << "\n";
      }
      out << prefix << method_level << "coverage,average," << format_number(cell.c_av) << "\n";
    }
    const auto& splits = report.splits.mean_splits;
    for (Eigen::Index j = 0; j < splits.rows(); ++j) {
      for (Eigen::Index k = 0; k < splits.cols(); ++k) {
        if (j == k) continue;
        out << prefix << ",,mean_splits,"
            << report.covariate_names[static_cast<std::size_t>(j)] << "|"
            << report.covariate_names[static_cast<std::size_t>(k)] << ","
            << format_number(splits(j, k)) << "\n";
      }
    }
    out << prefix << ",,mean_total_splits,total," << format_number(report.splits.mean_total)
        << "\n";
    for (const auto& alpha : report.alpha_adjusted) {
      for (std::size_t j = 0; j < alpha.mean_alpha.size(); ++j) {
        out << prefix << "bootstrap_calibrated," << format_number(alpha.level)
            << ",alpha_adjusted," << report.covariate_names[j] << ","
            << format_number(alpha.mean_alpha[j]) << "\n";
      }
      out << prefix << "bootstrap_calibrated," << format_number(alpha.level)
          << ",alpha_adjusted,average," << format_number(alpha.mean_alpha_av) << "\n";
    }
  }
  return out.str();
}

nlohmann::json report_json(const std::vector<CoverageReport>& reports) {
  nlohmann::json out = nlohmann::json::array();
  for (const CoverageReport& report : reports) {
    nlohmann::json cell;
    cell["scenario"] = scenario_name(report.cell.scenario);
    cell["n"] = report.cell.n;
    cell["sigma"] = report.cell.sigma_eps;
    cell["R"] = report.R_requested;
    cell["R_effective"] = report.R_effective;
    cell["B"] = report.B;
    cell["seed"] = report.master_seed;
    cell["excluded"] = report.excluded;
    cell["covariates"] = report.covariate_names;
    nlohmann::json coverage = nlohmann::json::array();
    for (const CoverageCell& c : report.coverage) {
      coverage.push_back({{"method", ci_method_name(c.method)},
                          {"level", c.level},
                          {"c_j", c.c_j},
                          {"c_av", c.c_av}});
    }
    cell["coverage"] = std::move(coverage);
    nlohmann::json splits;
    splits["total"] = report.splits.mean_total;
    nlohmann::json pairs = nlohmann::json::array();
    for (Eigen::Index j = 0; j < report.splits.mean_splits.rows(); ++j) {
      for (Eigen::Index k = 0; k < report.splits.mean_splits.cols(); ++k) {
        if (j == k) continue;
        pairs.push_back({{"covariate", report.covariate_names[static_cast<std::size_t>(j)]},
                         {"modifier", report.covariate_names[static_cast<std::size_t>(k)]},
                         {"mean", report.splits.mean_splits(j, k)}});
      }
    }
    splits["pairs"] = std::move(pairs);
    cell["splits"] = std::move(splits);
    if (!report.alpha_adjusted.empty()) {
      nlohmann::json alphas = nlohmann::json::array();
      for (const auto& a : report.alpha_adjusted) {
        alphas.push_back({{"level", a.level},
                          {"mean_alpha", a.mean_alpha},
                          {"mean_alpha_av", a.mean_alpha_av}});
      }
      cell["alpha_adjusted"] = std::move(alphas);
    }
    out.push_back(std::move(cell));
  }
  return out;
}

int command_simulate(const std::string& scenario, const std::vector<Eigen::Index>& ns,
                     const std::vector<double>& sigmas, int R, int B,
                     const std::vector<std::string>& method_names,
                     std::vector<double> levels, std::uint64_t seed, int threads,
                     const std::string& out_csv, const std::string& out_json) {
  std::cout << "seed: " << seed << "\n";
  std::vector<CiMethod> methods;
  for (const std::string& name : method_names) methods.push_back(method_from_name(name));
  if (levels.empty()) levels.push_back(0.95);

  std::vector<StudyCell> cells;
  for (Eigen::Index n : ns) {
    for (double sigma : sigmas) {
      cells.push_back({scenario_from_name(scenario), n, sigma});
    }
  }
  const std::vector<CoverageReport> reports =
      run_study(cells, R, methods, levels, B, seed, threads);

  write_file_atomic(out_csv, report_csv(reports));
  std::cout << "report written to " << out_csv << "\n";
  if (!out_json.empty()) {
    nlohmann::json doc;
    doc["schema_version"] = 1;
    doc["reports"] = report_json(reports);
    write_file_atomic(out_json, doc.dump(2) + "\n");
    std::cout << "report written to " << out_json << "\n";
  }
  for (const CoverageReport& report : reports) {
    std::cout << scenario_name(report.cell.scenario) << " n=" << report.cell.n
              << " sigma=" << format_number(report.cell.sigma_eps)
              << " mean_splits=" << format_number(report.splits.mean_total);
    for (const CoverageCell& c : report.coverage) {
      std::cout << " " << ci_method_name(c.method) << "@" << format_number(c.level) << "="
                << format_number(c.c_av);
    }
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Tree-structured varying coefficient models with selective confidence intervals"};
  app.require_subcommand(1);

  FitFlags fit_flags;
  std::string fit_model_out = "model.json";
  std::string fit_tree_out;
  std::uint64_t fit_seed = 1;
  CLI::App* fit = app.add_subcommand("fit", "fit a model and write a model document");
  add_fit_flags(fit, fit_flags);
  fit->add_option("--model-out", fit_model_out, "output model document (JSON)");
  fit->add_option("--tree-out", fit_tree_out, "output tree rendering (text)");
  fit->add_option("--seed", fit_seed, "random seed (echoed; fitting is deterministic)");
  fit->set_config("--config");

  FitFlags ci_flags;
  std::string ci_model_path;
  std::vector<std::string> ci_methods{"wald", "percentile"};
  std::vector<double> ci_levels{0.95};
  int ci_B = 1000;
  std::uint64_t ci_seed = 1;
  int ci_threads = 0;
  std::string ci_out = "cis.csv";
  std::string ci_json = "cis.json";
  CLI::App* ci = app.add_subcommand("ci", "confidence intervals for the partition coefficients");
  add_fit_flags(ci, ci_flags);
  ci->add_option("--model", ci_model_path, "saved model document (otherwise fits fresh)");
  ci->add_option("--methods", ci_methods, "wald, percentile, calibrated")->delimiter(',');
  ci->add_option("--levels", ci_levels, "confidence levels, e.g. 0.95,0.90")->delimiter(',');
  ci->add_option("-B,--bootstrap", ci_B, "bootstrap replicates");
  ci->add_option("--seed", ci_seed, "random seed");
  ci->add_option("--threads", ci_threads, "worker threads (0 = all cores)");
  ci->add_option("--out", ci_out, "output CSV table");
  ci->add_option("--json", ci_json, "output JSON table");
  ci->set_config("--config");

  std::string sim_scenario = "linear";
  std::vector<Eigen::Index> sim_n{200};
  std::vector<double> sim_sigma{1.0};
  int sim_R = 200;
  int sim_B = 200;
  std::vector<std::string> sim_methods{"wald", "percentile"};
  std::vector<double> sim_levels{0.95};
  std::uint64_t sim_seed = 1;
  int sim_threads = 0;
  std::string sim_out = "report.csv";
  std::string sim_json = "report.json";
  CLI::App* sim = app.add_subcommand("simulate", "run a coverage study");
  sim->add_option("--scenario", sim_scenario, "linear, varying, or varying-known");
  sim->add_option("--n", sim_n, "sample sizes")->delimiter(',');
  sim->add_option("--sigma", sim_sigma, "error standard deviations")->delimiter(',');
  sim->add_option("--R", sim_R, "replications per cell");
  sim->add_option("-B,--bootstrap", sim_B, "bootstrap replicates per CI");
  sim->add_option("--methods", sim_methods, "wald, percentile, calibrated")->delimiter(',');
  sim->add_option("--levels", sim_levels, "confidence levels")->delimiter(',');
  sim->add_option("--seed", sim_seed, "master seed");
  sim->add_option("--threads", sim_threads, "worker threads (0 = all cores)");
  sim->add_option("--out", sim_out, "output CSV report");
  sim->add_option("--json", sim_json, "output JSON report");
  sim->set_config("--config");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (fit->parsed()) {
      return command_fit(fit_flags, fit_model_out, fit_tree_out, fit_seed);
    }
    if (ci->parsed()) {
      return command_ci(ci_flags, ci_model_path, ci_methods, ci_levels, ci_B, ci_seed,
                        ci_threads, ci_out, ci_json);
    }
    if (sim->parsed()) {
      return command_simulate(sim_scenario, sim_n, sim_sigma, sim_R, sim_B, sim_methods,
                              sim_levels, sim_seed, sim_threads, sim_out, sim_json);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace tsvc
