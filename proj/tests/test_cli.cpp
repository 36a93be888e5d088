#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tsvc/cli.hpp"
#include "tsvc/csv.hpp"
#include "tsvc/rng.hpp"

using namespace tsvc;

namespace {

std::filesystem::path work_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "tsvc_cli_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream file(path);
  std::stringstream buffer;
  buffer << file.rdbuf();
  return buffer.str();
}

std::string make_gaussian_csv() {
  const auto path = work_dir() / "gaussian.csv";
  Rng rng(606);
  std::ostringstream out;
  out << "y,x1,x2\n";
  for (int i = 0; i < 60; ++i) {
    const double x1 = rng.normal();
    const double x2 = rng.normal();
    out << (0.4 * x1 + rng.normal()) << "," << x1 << "," << x2 << "\n";
  }
  write_file_atomic(path.string(), out.str());
  return path.string();
}

std::string make_survival_csv() {
  const auto path = work_dir() / "survival.csv";
  Rng rng(707);
  std::ostringstream out;
  out << "age,spread,t,d\n";
  for (int i = 0; i < 80; ++i) {
    const double age = 30 + 40 * rng.uniform();
    const int spread = rng.bernoulli(0.4) ? 1 : 0;
    const int t = 1 + static_cast<int>(rng.below(5));
    const int d = rng.bernoulli(0.8) ? 1 : 0;
    out << age << "," << spread << "," << t << "," << d << "\n";
  }
  write_file_atomic(path.string(), out.str());
  return path.string();
}

}  // namespace

TEST_CASE("fit writes a model document and a tree rendering") {
  const std::string data = make_gaussian_csv();
  const auto model_path = work_dir() / "model.json";
  const auto tree_path = work_dir() / "tree.txt";
  const int status = run_cli({"fit", "--data", data, "--outcome", "y",
                              "--model-out", model_path.string(),
                              "--tree-out", tree_path.string()});
  REQUIRE(status == 0);
  CHECK(std::filesystem::exists(model_path));
  const std::string rendering = read_file(tree_path);
  CHECK(rendering.find("x1 |") != std::string::npos);
  CHECK(rendering.find("intercept ->") != std::string::npos);
}

TEST_CASE("ci on a saved model emits symmetric wald intervals") {
  const std::string data = make_gaussian_csv();
  const auto model_path = work_dir() / "model_for_ci.json";
  REQUIRE(run_cli({"fit", "--data", data, "--outcome", "y",
                   "--model-out", model_path.string()}) == 0);

  const auto out_path = work_dir() / "cis.csv";
  const int status = run_cli({"ci", "--data", data, "--outcome", "y",
                              "--model", model_path.string(),
                              "--methods", "wald", "--levels", "0.95",
                              "--out", out_path.string()});
  REQUIRE(status == 0);
  std::ifstream file(out_path);
  std::string header;
  std::getline(file, header);
  CHECK(header ==
        "covariate,partition,estimate,exp_estimate,method,level,lower,upper,exp_lower,exp_upper");
  std::string line;
  int rows = 0;
  while (std::getline(file, line)) {
    if (line.empty()) continue;
    ++rows;
    CHECK(line.find("wald") != std::string::npos);
  }
  CHECK(rows >= 2);
}

TEST_CASE("simulate is reproducible file-for-file under a fixed seed") {
  const auto csv_a = work_dir() / "report_a.csv";
  const auto json_a = work_dir() / "report_a.json";
  const auto csv_b = work_dir() / "report_b.csv";
  const auto json_b = work_dir() / "report_b.json";
  const std::vector<std::string> base{"simulate", "--scenario", "linear",
                                      "--n", "60", "--sigma", "1", "--R", "4",
                                      "-B", "40", "--seed", "7", "--threads", "2"};
  auto args_a = base;
  args_a.insert(args_a.end(), {"--out", csv_a.string(), "--json", json_a.string()});
  auto args_b = base;
  args_b.insert(args_b.end(), {"--out", csv_b.string(), "--json", json_b.string()});
  REQUIRE(run_cli(args_a) == 0);
  REQUIRE(run_cli(args_b) == 0);
  CHECK(read_file(csv_a) == read_file(csv_b));
  CHECK(read_file(json_a) == read_file(json_b));
  CHECK(read_file(csv_a).find("coverage") != std::string::npos);
}

TEST_CASE("survival fit reproduces the continuation-ratio model form") {
  const std::string data = make_survival_csv();
  const auto model_path = work_dir() / "hazard_model.json";
  const int status = run_cli({"fit", "--data", data, "--family", "binomial",
                              "--survival-time", "t", "--event", "d",
                              "--model-out", model_path.string()});
  REQUIRE(status == 0);

  std::ifstream file(model_path);
  const auto document = nlohmann::json::parse(file);
  CHECK(document.at("family") == "binomial");
  bool saw_dummy_fixed = false, saw_period_modifier_only = false;
  for (const auto& covariate : document.at("covariates")) {
    const std::string name = covariate.at("name").get<std::string>();
    const std::string role = covariate.at("role").get<std::string>();
    if (name == "t") {
      CHECK(role == "modifier-only");
      saw_period_modifier_only = true;
    } else if (name.rfind("t", 0) == 0 && name.size() > 1) {
      CHECK(role == "fixed");
      saw_dummy_fixed = true;
    } else {
      CHECK(role == "vary");
    }
  }
  CHECK(saw_dummy_fixed);
  CHECK(saw_period_modifier_only);
}

TEST_CASE("usage errors exit with status 1, runtime errors with 2") {
  CHECK(run_cli({"frobnicate"}) == 1);
  CHECK(run_cli({"fit", "--outcome", "y"}) == 1);  // --data missing
  CHECK(run_cli({"fit", "--data", "/nonexistent.csv", "--outcome", "y"}) == 2);
  const std::string data = make_gaussian_csv();
  CHECK(run_cli({"fit", "--data", data, "--outcome", "not_a_column"}) == 2);
}
