#include <filesystem>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "flexaladin/acceptance.hpp"
#include "flexaladin/cli.hpp"
#include "flexaladin/config.hpp"

using namespace flexaladin;
using nlohmann::json;

namespace {

const std::filesystem::path kSamples = FLEXALADIN_SAMPLES_DIR;

json two_agent_doc() {
  return json::parse(R"({
    "problem": {"type": "consensus", "agents": [
      {"family": "quadratic", "Q": 1.0, "q": 0.0},
      {"family": "quadratic", "Q": 1.0, "q": -2.0, "c": 2.0}]},
    "engine": "fc",
    "hessian": {"policy": "exact"},
    "polling": {"mode": "bernoulli", "p": 0.6},
    "K": 12,
    "seed": 5
  })");
}

std::string validation_field(const json& doc) {
  try {
    parse_run_config(doc);
  } catch (const ValidationError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST(Config, ParsesSampleFiles) {
  for (const char* name : {"two_agent_solve.json", "trig_pair_rho.json", "lad_inexact.json", "resource_ft.json",
                           "montecarlo.json"}) {
    EXPECT_NO_THROW(load_run_config(kSamples / name)) << name;
  }
}

TEST(Config, ErrorsNameTheField) {
  auto doc = two_agent_doc();
  doc["K"] = 0;
  EXPECT_EQ(validation_field(doc), "K");

  doc = two_agent_doc();
  doc["engine"] = "ft";
  EXPECT_EQ(validation_field(doc), "engine");

  doc = two_agent_doc();
  doc["trials"] = 0;
  EXPECT_EQ(validation_field(doc), "trials");

  doc = two_agent_doc();
  doc["polling"]["p"] = 1.5;
  EXPECT_EQ(validation_field(doc), "polling.p");

  doc = two_agent_doc();
  doc["problem"]["agents"][1]["Q"] = "one";
  EXPECT_EQ(validation_field(doc), "problem.agents[1].Q");

  doc = two_agent_doc();
  doc["problem"]["agents"][0]["family"] = "cubic";
  EXPECT_EQ(validation_field(doc), "problem.agents[0].family");

  doc = two_agent_doc();
  doc["p_list"] = {0.5, 0.0};
  EXPECT_EQ(validation_field(doc), "p_list");
}

TEST(Config, ErrorsMapToValidationExitCode) {
  auto doc = two_agent_doc();
  doc["K"] = 0;
  try {
    parse_run_config(doc);
    FAIL() << "expected a validation error";
  } catch (const std::exception& e) {
    EXPECT_EQ(cli::exit_code_for(e), cli::kValidation);
  }
  EXPECT_EQ(cli::exit_code_for(NumericError("x")), cli::kNumeric);
}

TEST(Config, HashIsStableAcrossRoundTrip) {
  const auto a = parse_run_config(two_agent_doc());
  const auto b = parse_run_config(to_json(a));
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(to_json(a), to_json(b));

  auto doc = two_agent_doc();
  doc["seed"] = 6;
  EXPECT_NE(config_hash(a), config_hash(parse_run_config(doc)));
}

TEST(Solve, TwoAgentSampleReachesOptimum) {
  const auto out = cli::solve(load_run_config(kSamples / "two_agent_solve.json"));
  EXPECT_LE(out.summary["oracle"]["distance"].get<double>(), 1e-10);
  EXPECT_EQ(out.summary["records"].get<int>(), 4);
  // Header plus K + 1 rows.
  EXPECT_EQ(std::count(out.csv.begin(), out.csv.end(), '\n'), 5);
  EXPECT_EQ(out.csv.substr(0, out.csv.find('\n')), "k,active_set,y_0,lambda_0_0,lambda_1_0,primal_residual,dual_sum,energy");
}

TEST(Solve, RerunIsByteIdentical) {
  const auto c = parse_run_config(two_agent_doc());
  const auto a = cli::solve(c);
  const auto b = cli::solve(c);
  EXPECT_EQ(a.csv, b.csv);
  EXPECT_EQ(a.summary.dump(), b.summary.dump());
}

TEST(Solve, ResourceSampleIsFeasible) {
  const auto out = cli::solve(load_run_config(kSamples / "resource_ft.json"));
  EXPECT_LE(out.summary["final"]["feasibility"].get<double>(), 1e-9);
  EXPECT_EQ(out.csv.substr(0, out.csv.find('\n')), "k,active_set,lambda_0,y_0_0,y_1_0,feasibility,stationarity");
}

TEST(Solve, DiagnosticSections) {
  const auto t2 = cli::solve(load_run_config(kSamples / "trig_pair_rho.json"));
  EXPECT_TRUE(t2.summary.contains("theorem2"));
  const auto t3 = cli::solve(load_run_config(kSamples / "lad_inexact.json"));
  ASSERT_TRUE(t3.summary.contains("theorem3"));
  EXPECT_DOUBLE_EQ(t3.summary["theorem3"]["G"].get<double>(), 3.0);
}

TEST(Solve, WritesOutputFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "flexaladin_solve_test";
  std::filesystem::remove_all(dir);
  std::ostringstream log;
  EXPECT_EQ(cli::cmd_solve(load_run_config(kSamples / "two_agent_solve.json"), dir, log), cli::kSuccess);
  EXPECT_TRUE(std::filesystem::exists(dir / "trace.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "summary.json"));
  std::filesystem::remove_all(dir);
}

TEST(MonteCarlo, SingleFullTrialMatchesDeterministicRun) {
  auto c = load_run_config(kSamples / "montecarlo.json");
  c.trials = 1;
  c.p_list = {1.0};
  const auto mc = cli::montecarlo(c);
  ASSERT_EQ(mc.ensembles.size(), 1u);
  const auto& e = mc.ensembles[0];

  const auto& prob = c.consensus_problem();
  const auto sol = solve_consensus_oracle(prob);
  PollingConfig full;
  full.mode = PollingMode::Full;
  const auto t = run_fc(prob, c.fc, full, c.K);
  for (std::size_t k = 0; k < t.records.size(); ++k) {
    EXPECT_NEAR(e.mean[k], energy(t.records[k], sol), 1e-12 * (1.0 + e.mean[k]));
  }
  for (double s : e.step_stderr) EXPECT_EQ(s, 0.0);
}

TEST(MonteCarlo, AlphaOrderedAcrossParticipation) {
  auto c = load_run_config(kSamples / "montecarlo.json");
  c.trials = 500;
  const auto mc = cli::montecarlo(c);
  EXPECT_TRUE(mc.alpha_monotone);
  for (const auto& e : mc.ensembles) {
    EXPECT_TRUE(e.mean_nonincreasing) << "p=" << e.p;
    EXPECT_LT(e.alpha_hat, 1.0);
  }
}

TEST(MonteCarlo, RejectsNonConsensusEngines) {
  auto c = load_run_config(kSamples / "resource_ft.json");
  EXPECT_THROW(cli::montecarlo(c), ValidationError);
}

TEST(Verify, ReductionAndInvariantSuitesPass) {
  for (const char* name : {"reduction", "invariants"}) {
    const auto rep = acceptance::run_suite(name);
    EXPECT_TRUE(rep.passed()) << rep.to_json().dump(2);
  }
}

TEST(Verify, ConstantBControlIsNotApplicable) {
  const auto rep = acceptance::run_suite("theorem3");
  bool seen = false;
  for (const auto& r : rep.results) {
    if (r.id == "9-control") {
      seen = true;
      EXPECT_EQ(r.status, acceptance::Status::NotApplicable);
    }
  }
  EXPECT_TRUE(seen);
  EXPECT_TRUE(rep.passed());
}

TEST(Verify, UnknownSuiteIsRejected) {
  EXPECT_THROW(acceptance::run_suite("nonsense"), ValidationError);
}
