#pragma once

// Command implementations behind the aladin_cli executable. Each command
// takes a validated RunConfig, writes its files into an output directory
// and returns the process exit code.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "flexaladin/config.hpp"
#include "flexaladin/diagnostics.hpp"
#include "flexaladin/errors.hpp"
#include "flexaladin/fc_aladin.hpp"
#include "flexaladin/ft_aladin.hpp"
#include "flexaladin/problem_io.hpp"

namespace flexaladin::cli {

using nlohmann::json;

enum ExitCode : int { kSuccess = 0, kValidation = 2, kNumeric = 3, kAcceptance = 4 };

/// Maps a library exception to the documented exit code.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const DimensionError*>(&e) ||
      dynamic_cast<const CapabilityError*>(&e)) {
    return kValidation;
  }
  return kNumeric;
}

/// 17 significant digits: exact for doubles and identical across reruns.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string join_indices(const std::vector<int>& v) {
  std::string s;
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (j) s += ';';
    s += std::to_string(v[j]);
  }
  return s;
}

/// k, active_set, y_0.., lambda_<i>_<j>.., primal_residual, dual_sum, energy
inline std::string trace_csv(const ConsensusTrace& t) {
  std::ostringstream os;
  const auto& r0 = t.records.front();
  const Eigen::Index n = r0.y.size();
  os << "k,active_set";
  for (Eigen::Index j = 0; j < n; ++j) os << ",y_" << j;
  for (std::size_t i = 0; i < r0.lambdas.size(); ++i)
    for (Eigen::Index j = 0; j < n; ++j) os << ",lambda_" << i << '_' << j;
  os << ",primal_residual,dual_sum,energy\n";
  for (const auto& r : t.records) {
    os << r.k << ',' << join_indices(r.active);
    for (Eigen::Index j = 0; j < n; ++j) os << ',' << fmt(r.y[j]);
    for (const auto& l : r.lambdas)
      for (Eigen::Index j = 0; j < n; ++j) os << ',' << fmt(l[j]);
    os << ',' << fmt(r.primal_residual) << ',' << fmt(r.dual_sum) << ',';
    if (r.energy) os << fmt(*r.energy);
    os << '\n';
  }
  return os.str();
}

/// k, active_set, lambda_0.., y_<i>_<j>.., feasibility, stationarity
inline std::string trace_csv(const ResourceTrace& t) {
  std::ostringstream os;
  const auto& r0 = t.records.front();
  os << "k,active_set";
  for (Eigen::Index j = 0; j < r0.lambda.size(); ++j) os << ",lambda_" << j;
  for (std::size_t i = 0; i < r0.ys.size(); ++i)
    for (Eigen::Index j = 0; j < r0.ys[i].size(); ++j) os << ",y_" << i << '_' << j;
  os << ",feasibility,stationarity\n";
  for (const auto& r : t.records) {
    os << r.k << ',' << join_indices(r.active);
    for (Eigen::Index j = 0; j < r.lambda.size(); ++j) os << ',' << fmt(r.lambda[j]);
    for (const auto& y : r.ys)
      for (Eigen::Index j = 0; j < y.size(); ++j) os << ',' << fmt(y[j]);
    os << ',' << fmt(r.feasibility) << ',' << fmt(r.stationarity) << '\n';
  }
  return os.str();
}

namespace detail {

inline json meta_json(const TraceMeta& m) {
  return {{"engine", m.engine}, {"variant", m.variant}, {"mixing", m.mixing}, {"policy", m.policy},
          {"p", m.p},           {"rho", m.rho},         {"seed", m.seed},     {"local_tolerance", m.local_tolerance}};
}

inline FcRunOptions consensus_initial(const RunConfig& c) {
  FcRunOptions o;
  if (!c.initial) return o;
  const json& in = *c.initial;
  if (in.contains("y")) o.y0 = io::to_vector(in.at("y"), "initial.y");
  if (in.contains("lambda")) {
    const json& l = in.at("lambda");
    if (!l.is_array()) throw ValidationError("initial.lambda", "expected one vector per agent");
    for (std::size_t i = 0; i < l.size(); ++i) {
      o.lambda0.push_back(io::to_vector(l[i], "initial.lambda[" + std::to_string(i) + "]"));
    }
  }
  return o;
}

inline FtRunOptions resource_initial(const RunConfig& c) {
  FtRunOptions o;
  if (!c.initial) return o;
  const json& in = *c.initial;
  if (in.contains("y")) {
    const json& y = in.at("y");
    if (!y.is_array()) throw ValidationError("initial.y", "expected one vector per agent");
    for (std::size_t i = 0; i < y.size(); ++i) {
      o.y0.push_back(io::to_vector(y[i], "initial.y[" + std::to_string(i) + "]"));
    }
  }
  if (in.contains("lambda")) o.lambda0 = io::to_vector(in.at("lambda"), "initial.lambda");
  return o;
}

inline json vectors_json(const std::vector<VectorXd>& vs) {
  json a = json::array();
  for (const auto& v : vs) a.push_back(io::from_vector(v));
  return a;
}

inline std::optional<ConsensusSolution> try_consensus_oracle(const ConsensusProblem& p) {
  try {
    return solve_consensus_oracle(p);
  } catch (const Error&) {
    return std::nullopt;
  }
}

inline std::optional<ResourceSolution> try_resource_oracle(const ResourceProblem& p) {
  try {
    return solve_resource_oracle(p);
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace detail

struct SolveOutput {
  std::variant<ConsensusTrace, ResourceTrace> trace;
  std::string csv;
  json summary;
};

/// Runs the configured engine once and builds the CSV body and JSON summary.
inline SolveOutput solve(const RunConfig& c) {
  validate(c);
  SolveOutput out;
  json s;
  s["config"] = c.source;
  s["config_hash"] = config_hash(c);
  s["problem_digest"] = io::problem_digest(c.problem);
  s["K"] = c.K;
  s["records"] = c.K + 1;

  if (c.consensus()) {
    const auto& prob = c.consensus_problem();
    FcRunOptions opts = detail::consensus_initial(c);
    const auto sol = detail::try_consensus_oracle(prob);
    if (sol && c.diagnostics.energy) opts.observers.push_back(energy_observer(*sol));
    ConsensusTrace t = run_fc(prob, c.fc, c.polling, c.K, opts);
    const auto& last = t.final();
    s["meta"] = detail::meta_json(t.meta);
    s["final"] = {{"y", io::from_vector(last.y)},
                  {"lambda", detail::vectors_json(last.lambdas)},
                  {"primal_residual", last.primal_residual},
                  {"dual_sum", last.dual_sum},
                  {"objective", prob.value(last.y)}};
    if (last.energy) s["final"]["energy"] = *last.energy;
    if (sol) {
      s["oracle"] = {{"y_star", io::from_vector(sol->y_star)},
                     {"f_star", sol->f_star},
                     {"distance", (last.y - sol->y_star).norm()}};
    }
    int clamps = 0;
    for (const auto& r : t.records) clamps += static_cast<int>(r.clamped.size());
    s["hessian_clamps"] = clamps;
    s["never_active"] = verify_coverage(t.active_sets(), prob.agents());
    if (c.diagnostics.theorem2) {
      if (!sol) throw CapabilityError("diagnostics.theorem2: no oracle solution for this problem");
      const auto r = theorem2_report(t, prob, *sol, c.fc.rho);
      s["theorem2"] = {{"gamma", r.gamma},          {"sigma", r.sigma},
                       {"bound", r.bound},          {"merit", r.merit_sequence},
                       {"ratios", r.ratios},        {"assumption_violations", r.assumption_violations},
                       {"checked", r.checked},      {"max_checked_ratio", r.max_checked_ratio}};
    }
    if (c.diagnostics.theorem3) {
      if (!sol) throw CapabilityError("diagnostics.theorem3: no oracle solution for this problem");
      if (c.K < 2) throw ValidationError("K", "theorem3 diagnostics need K >= 2");
      const auto r = theorem3_report(t, prob, *sol, t.meta.p);
      s["theorem3"] = {{"G", r.G},
                       {"G_empirical", r.G_empirical},
                       {"phi1", r.phi1},
                       {"phi2", r.phi2},
                       {"condition_ratio", r.condition_ratio},
                       {"best_gap", r.best_gap},
                       {"gap_bound", r.gap_bound}};
    }
    out.csv = trace_csv(t);
    out.trace = std::move(t);
  } else {
    const auto& prob = c.resource_problem();
    ResourceTrace t = run_ft(prob, c.ft, c.polling, c.K, detail::resource_initial(c));
    const auto& last = t.final();
    s["meta"] = detail::meta_json(t.meta);
    s["final"] = {{"lambda", io::from_vector(last.lambda)},
                  {"y", detail::vectors_json(last.ys)},
                  {"feasibility", last.feasibility},
                  {"stationarity", last.stationarity},
                  {"objective", prob.value(last.ys)}};
    if (const auto sol = detail::try_resource_oracle(prob)) {
      double dist = 0.0;
      for (std::size_t i = 0; i < last.ys.size(); ++i) dist += (last.ys[i] - sol->x_star[i]).squaredNorm();
      s["oracle"] = {{"x_star", detail::vectors_json(sol->x_star)},
                     {"lambda_star", io::from_vector(sol->lambda_star)},
                     {"f_star", sol->f_star},
                     {"distance", std::sqrt(dist)}};
    }
    int clamps = 0;
    for (const auto& r : t.records) clamps += static_cast<int>(r.clamped.size());
    s["hessian_clamps"] = clamps;
    s["never_active"] = verify_coverage(t.active_sets(), prob.agents());
    out.csv = trace_csv(t);
    out.trace = std::move(t);
  }
  out.summary = std::move(s);
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("output", "cannot write " + path.string());
  f << body;
}

inline int cmd_solve(const RunConfig& c, const std::filesystem::path& out_dir, std::ostream& log) {
  const SolveOutput r = solve(c);
  write_file(out_dir / c.trace_file, r.csv);
  write_file(out_dir / c.summary_file, r.summary.dump(2) + "\n");
  const json& f = r.summary.at("final");
  if (c.consensus()) {
    log << "primal_residual " << fmt(f.at("primal_residual").get<double>()) << "\n"
        << "dual_sum " << fmt(f.at("dual_sum").get<double>()) << "\n";
  } else {
    log << "feasibility " << fmt(f.at("feasibility").get<double>()) << "\n"
        << "stationarity " << fmt(f.at("stationarity").get<double>()) << "\n";
  }
  if (r.summary.contains("oracle")) {
    log << "distance_to_solution " << fmt(r.summary.at("oracle").at("distance").get<double>()) << "\n";
  }
  return kSuccess;
}

struct MonteCarloOutput {
  std::vector<TrialEnsemble> ensembles;
  /// alpha_hat(p_{j+1}) <= alpha_hat(p_j) + slack across the p list.
  bool alpha_monotone = true;
  std::string csv;
  json summary;
};

/// Slack on the alpha_hat ordering across the p list.
inline constexpr double kAlphaOrderSlack = 0.02;

/// Ensemble of `c.trials` runs for each p in c.p_list (or the polling p).
inline MonteCarloOutput montecarlo(const RunConfig& c) {
  validate(c);
  if (c.engine != Engine::FC || !c.consensus()) {
    throw ValidationError("engine", "montecarlo needs engine fc on a consensus problem");
  }
  MonteCarloOutput out;
  std::vector<double> ps = c.p_list;
  if (ps.empty()) ps.push_back(c.polling.mode == PollingMode::Full ? 1.0 : c.polling.p);
  const FcRunOptions opts = detail::consensus_initial(c);
  for (double p : ps) {
    out.ensembles.push_back(theorem1_ensemble(c.consensus_problem(), c.fc, p, c.K, c.trials, c.polling.seed, opts));
  }
  for (std::size_t j = 1; j < out.ensembles.size(); ++j) {
    if (out.ensembles[j].alpha_hat > out.ensembles[j - 1].alpha_hat + kAlphaOrderSlack) out.alpha_monotone = false;
  }

  std::ostringstream os;
  os << "k";
  for (double p : ps) os << ",mean_energy_p" << fmt(p) << ",step_stderr_p" << fmt(p);
  os << '\n';
  for (int k = 0; k <= c.K; ++k) {
    os << k;
    for (const auto& e : out.ensembles) {
      os << ',' << fmt(e.mean[static_cast<std::size_t>(k)]) << ',';
      if (k < c.K) os << fmt(e.step_stderr[static_cast<std::size_t>(k)]);
    }
    os << '\n';
  }
  out.csv = os.str();

  json s;
  s["config"] = c.source;
  s["config_hash"] = config_hash(c);
  s["problem_digest"] = io::problem_digest(c.problem);
  s["trials"] = c.trials;
  s["K"] = c.K;
  json rows = json::array();
  for (const auto& e : out.ensembles) {
    rows.push_back({{"p", e.p},
                    {"alpha_hat", e.alpha_hat},
                    {"max_step_ratio", e.max_step_ratio},
                    {"mean_nonincreasing", e.mean_nonincreasing},
                    {"increasing_steps", e.increasing_steps},
                    {"never_active", e.never_active}});
  }
  s["ensembles"] = std::move(rows);
  s["alpha_monotone"] = out.alpha_monotone;
  out.summary = std::move(s);
  return out;
}

inline int cmd_montecarlo(const RunConfig& c, const std::filesystem::path& out_dir, std::ostream& log) {
  const MonteCarloOutput r = montecarlo(c);
  write_file(out_dir / "energy.csv", r.csv);
  write_file(out_dir / "montecarlo.json", r.summary.dump(2) + "\n");
  for (const auto& e : r.ensembles) {
    log << "p " << fmt(e.p) << " alpha_hat " << fmt(e.alpha_hat)
        << (e.mean_nonincreasing ? " nonincreasing" : " increasing") << "\n";
  }
  log << "alpha_monotone " << (r.alpha_monotone ? "true" : "false") << "\n";
  return kSuccess;
}

}  // namespace flexaladin::cli
