// aladin_cli: solve / montecarlo / verify front end.
//
//   aladin_cli solve --config run.json --out out/
//   aladin_cli montecarlo --config mc.json --trials 500 --p-list 0.25,0.5,1.0 --out out/
//   aladin_cli verify invariants --out out/

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flexaladin/acceptance.hpp"
#include "flexaladin/cli.hpp"
#include "flexaladin/config.hpp"

namespace fs = std::filesystem;
using namespace flexaladin;

namespace {

std::vector<double> parse_p_list(const std::string& csv) {
  std::vector<double> ps;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      ps.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("--p-list", "not a number: '" + item + "'");
    }
  }
  if (ps.empty()) throw ValidationError("--p-list", "empty list");
  return ps;
}

RunConfig load(const std::string& path, const std::optional<std::uint64_t>& seed, const std::optional<int>& trials,
               const std::string& p_list) {
  RunConfig c = load_run_config(path);
  if (seed) c.polling.seed = *seed;
  if (trials) c.trials = *trials;
  if (!p_list.empty()) c.p_list = parse_p_list(p_list);
  validate(c);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flexible ALADIN experiment runner"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", p_list, suite;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;

  auto* solve = app.add_subcommand("solve", "run one engine and write trace.csv and summary.json");
  solve->add_option("--config", config_path, "JSON run configuration")->required();
  solve->add_option("--seed", seed, "override the polling seed");
  solve->add_option("--out", out_dir, "output directory");

  auto* mc = app.add_subcommand("montecarlo", "ensemble energy table and fitted rates");
  mc->add_option("--config", config_path, "JSON run configuration")->required();
  mc->add_option("--seed", seed, "base seed of the ensemble");
  mc->add_option("--trials", trials, "number of trials M");
  mc->add_option("--p-list", p_list, "comma-separated polling probabilities");
  mc->add_option("--out", out_dir, "output directory");

  auto* verify = app.add_subcommand("verify", "run an acceptance suite");
  verify->add_option("suite", suite, "exactness | invariants | theorem1 | reduction | theorem2 | theorem3 | polling | all")
      ->required();
  verify->add_option("--out", out_dir, "directory for verify.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kValidation;
  }

  try {
    if (*solve) return cli::cmd_solve(load(config_path, seed, std::nullopt, ""), out_dir, std::cout);
    if (*mc) return cli::cmd_montecarlo(load(config_path, seed, trials, p_list), out_dir, std::cout);

    const auto rep = acceptance::run_suite(suite);
    for (const auto& r : rep.results) {
      std::cout << acceptance::to_string(r.status) << ' ' << r.id << ' ' << r.title << ": " << r.detail << '\n';
    }
    cli::write_file(fs::path(out_dir) / "verify.json", rep.to_json().dump(2) + "\n");
    return rep.passed() ? cli::kSuccess : cli::kAcceptance;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::exit_code_for(e);
  }
}
