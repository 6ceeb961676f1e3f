#pragma once

// Run configuration: one JSON document per run.
//
//   {"problem": {...} | "problem_file": "lad.json",
//    "engine": "fc" | "fc_inexact" | "ft",
//    "variant": {"prox": "B" | "rho", "rho": 1, "mixing": "realized" | "mean_field", "mixing_p": 0.7},
//    "hessian": {"policy": "exact" | "fixed" | "schedule" | "bfgs", "floor": 1e-4,
//                "scale": 1, "matrix": [[...]], "matrices": [[[...]], ...],
//                "beta0": 1, "exponent": 0.5, "B0": [[...]]},
//    "local_tolerance": 1e-10,
//    "polling": {"mode": "bernoulli" | "fixed_size" | "full", "p": 0.7, "size": 2,
//                "force_full_first_round": true},
//    "K": 50, "seed": 42, "trials": 100, "p_list": [0.25, 0.5, 1.0],
//    "initial": {"y": ..., "lambda": ...},
//    "diagnostics": {"energy": true, "theorem2": false, "theorem3": false},
//    "output": {"trace": "trace.csv", "summary": "summary.json"}}

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flexaladin/errors.hpp"
#include "flexaladin/fc_aladin.hpp"
#include "flexaladin/ft_aladin.hpp"
#include "flexaladin/local_solver.hpp"
#include "flexaladin/polling.hpp"
#include "flexaladin/problem_io.hpp"

namespace flexaladin {

enum class Engine { FT, FC, FCInexact };

inline std::string to_string(Engine e) {
  switch (e) {
    case Engine::FT: return "ft";
    case Engine::FC: return "fc";
    case Engine::FCInexact: return "fc_inexact";
  }
  return "?";
}

struct Diagnostics {
  bool energy = true;
  bool theorem2 = false;
  bool theorem3 = false;
};

struct RunConfig {
  io::Problem problem;
  Engine engine = Engine::FC;
  FcConfig fc;
  FtConfig ft;
  PollingConfig polling;
  int K = 50;
  int trials = 100;
  std::vector<double> p_list;
  /// Consensus: y0 (n) and lambda0 (N x n). Resource: y0 (N blocks) and lambda0 (m).
  std::optional<nlohmann::json> initial;
  Diagnostics diagnostics;
  std::string trace_file = "trace.csv";
  std::string summary_file = "summary.json";
  /// The document as given, before defaults were filled in.
  nlohmann::json source;

  bool consensus() const { return std::holds_alternative<ConsensusProblem>(problem); }
  const ConsensusProblem& consensus_problem() const { return std::get<ConsensusProblem>(problem); }
  const ResourceProblem& resource_problem() const { return std::get<ResourceProblem>(problem); }
  const HessianPolicy& hessian() const { return engine == Engine::FT ? ft.hessian : fc.hessian; }
  const std::vector<HessianPolicy>& agent_hessian() const {
    return engine == Engine::FT ? ft.agent_hessian : fc.agent_hessian;
  }
};

namespace detail {

using nlohmann::json;

inline std::string get_string(const json& j, const std::string& key, const std::string& def,
                              const std::string& path) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_string()) throw ValidationError(path + "." + key, "expected a string");
  return j.at(key).get<std::string>();
}

inline double get_number(const json& j, const std::string& key, double def, const std::string& path) {
  if (!j.contains(key)) return def;
  return io::to_number(j.at(key), path + "." + key);
}

inline long long get_integer(const json& j, const std::string& key, long long def, const std::string& path) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_number_integer()) throw ValidationError(path + "." + key, "expected an integer");
  return j.at(key).get<long long>();
}

inline bool get_bool(const json& j, const std::string& key, bool def, const std::string& path) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_boolean()) throw ValidationError(path + "." + key, "expected true or false");
  return j.at(key).get<bool>();
}

inline void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ValidationError(path, "expected an object");
}

inline std::vector<HessianPolicy> parse_hessian(const json& j, std::vector<HessianPolicy>& per_agent) {
  const std::string path = "hessian";
  require_object(j, path);
  const std::string policy = get_string(j, "policy", "exact", path);
  const double floor = get_number(j, "floor", 1e-4, path);
  if (!(floor > 0.0)) throw ValidationError(path + ".floor", "must be positive");
  per_agent.clear();
  if (policy == "exact") return {HessianPolicy::exact(floor)};
  if (policy == "fixed") {
    if (j.contains("matrices")) {
      const json& ms = j.at("matrices");
      if (!ms.is_array() || ms.empty()) throw ValidationError(path + ".matrices", "expected one matrix per agent");
      for (std::size_t i = 0; i < ms.size(); ++i) {
        per_agent.push_back(
            HessianPolicy::fixed(io::to_matrix(ms[i], path + ".matrices[" + std::to_string(i) + "]"), floor));
      }
      return {HessianPolicy::fixed_scaled(1.0, floor)};
    }
    if (j.contains("matrix")) return {HessianPolicy::fixed(io::to_matrix(j.at("matrix"), path + ".matrix"), floor)};
    const double scale = get_number(j, "scale", 1.0, path);
    if (!(scale > 0.0)) throw ValidationError(path + ".scale", "must be positive");
    return {HessianPolicy::fixed_scaled(scale, floor)};
  }
  if (policy == "schedule") {
    const double beta0 = get_number(j, "beta0", 1.0, path);
    if (!(beta0 > 0.0)) throw ValidationError(path + ".beta0", "must be positive");
    return {HessianPolicy::schedule(beta0, get_number(j, "exponent", 0.5, path), floor)};
  }
  if (policy == "bfgs") {
    if (!j.contains("B0")) throw ValidationError(path + ".B0", "missing");
    return {HessianPolicy::bfgs(io::to_matrix(j.at("B0"), path + ".B0"), floor)};
  }
  throw ValidationError(path + ".policy", "unknown policy '" + policy + "'");
}

inline json hessian_to_json(const HessianPolicy& h, const std::vector<HessianPolicy>& per_agent) {
  json j = {{"policy", h.name()}, {"floor", h.floor}};
  if (!per_agent.empty()) {
    json ms = json::array();
    for (const auto& a : per_agent) ms.push_back(io::from_matrix(std::get<HessianPolicy::FixedMatrix>(a.kind).B));
    j["matrices"] = std::move(ms);
    return j;
  }
  if (const auto* f = std::get_if<HessianPolicy::FixedMatrix>(&h.kind)) {
    if (f->B.size() > 0) j["matrix"] = io::from_matrix(f->B);
    else j["scale"] = f->scale;
  } else if (const auto* s = std::get_if<HessianPolicy::ScalarSchedule>(&h.kind)) {
    j["beta0"] = s->beta0;
    j["exponent"] = s->exponent;
  } else if (const auto* b = std::get_if<HessianPolicy::DampedBFGS>(&h.kind)) {
    j["B0"] = io::from_matrix(b->B0);
  }
  return j;
}

inline PollingConfig parse_polling(const json& j) {
  const std::string path = "polling";
  require_object(j, path);
  PollingConfig pc;
  const std::string mode = get_string(j, "mode", "bernoulli", path);
  if (mode == "bernoulli") pc.mode = PollingMode::Bernoulli;
  else if (mode == "fixed_size") pc.mode = PollingMode::FixedSize;
  else if (mode == "full") pc.mode = PollingMode::Full;
  else throw ValidationError(path + ".mode", "expected bernoulli, fixed_size or full");
  pc.p = get_number(j, "p", 1.0, path);
  pc.size = static_cast<int>(get_integer(j, "size", 1, path));
  pc.force_full_first_round = get_bool(j, "force_full_first_round", true, path);
  return pc;
}

inline std::string to_string(PollingMode m) {
  switch (m) {
    case PollingMode::Bernoulli: return "bernoulli";
    case PollingMode::FixedSize: return "fixed_size";
    case PollingMode::Full: return "full";
  }
  return "?";
}

inline std::uint64_t parse_seed(const json& j) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<long long>() >= 0) return static_cast<std::uint64_t>(j.get<long long>());
  throw ValidationError("seed", "expected a non-negative integer");
}

}  // namespace detail

/// Checks engine/problem compatibility and every engine-side option.
inline void validate(const RunConfig& c) {
  if (c.K < 1) throw ValidationError("K", "must be at least 1");
  if (c.trials < 1) throw ValidationError("trials", "must be at least 1");
  for (double p : c.p_list) {
    if (!(p > 0.0 && p <= 1.0)) throw ValidationError("p_list", "entries must lie in (0, 1]");
  }
  if (c.engine == Engine::FT && c.consensus()) {
    throw ValidationError("engine", "engine 'ft' needs a resource problem, got a consensus problem");
  }
  if (c.engine != Engine::FT && !c.consensus()) {
    throw ValidationError("engine", "engine '" + to_string(c.engine) + "' needs a consensus problem");
  }
  const int N = std::visit([](const auto& p) { return p.agents(); }, c.problem);
  c.polling.validate(N);
  if (!c.agent_hessian().empty() && static_cast<int>(c.agent_hessian().size()) != N) {
    throw ValidationError("hessian.matrices", "need one matrix per agent");
  }
  if (c.engine == Engine::FT) {
    c.ft.validate();
  } else {
    c.fc.validate();
    if (c.engine == Engine::FC && !c.consensus_problem().all_smooth()) {
      throw ValidationError("engine", "exact local solves need smooth objectives; use fc_inexact");
    }
  }
  if (c.diagnostics.theorem2 && !(c.engine == Engine::FC && c.fc.variant == FcVariant::ExactRhoProx)) {
    throw ValidationError("diagnostics.theorem2", "needs engine fc with variant.prox = rho");
  }
  if (c.diagnostics.theorem3 && c.engine != Engine::FCInexact) {
    throw ValidationError("diagnostics.theorem3", "needs engine fc_inexact");
  }
}

/// Parses a configuration document. Relative `problem_file` paths are
/// resolved against `base_dir`.
inline RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  using detail::get_number;
  detail::require_object(j, "config");
  RunConfig c;
  c.source = j;

  if (j.contains("problem") && j.contains("problem_file")) {
    throw ValidationError("problem", "give either problem or problem_file, not both");
  }
  if (j.contains("problem")) {
    c.problem = io::parse_problem(j.at("problem"));
  } else if (j.contains("problem_file")) {
    if (!j.at("problem_file").is_string()) throw ValidationError("problem_file", "expected a path");
    std::filesystem::path pf = j.at("problem_file").get<std::string>();
    if (pf.is_relative()) pf = base_dir / pf;
    std::ifstream in(pf);
    if (!in) throw ValidationError("problem_file", "cannot open " + pf.string());
    nlohmann::json pj;
    try {
      pj = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("problem_file", std::string("invalid JSON: ") + e.what());
    }
    c.problem = io::parse_problem(pj);
  } else {
    throw ValidationError("problem", "missing (give problem or problem_file)");
  }

  const std::string engine = detail::get_string(j, "engine", "fc", "config");
  if (engine == "ft") c.engine = Engine::FT;
  else if (engine == "fc") c.engine = Engine::FC;
  else if (engine == "fc_inexact") c.engine = Engine::FCInexact;
  else throw ValidationError("engine", "expected ft, fc or fc_inexact, got '" + engine + "'");

  const nlohmann::json variant = j.value("variant", nlohmann::json::object());
  detail::require_object(variant, "variant");
  const std::string prox = detail::get_string(variant, "prox", "B", "variant");
  if (prox != "B" && prox != "rho") throw ValidationError("variant.prox", "expected B or rho");
  c.fc.rho = get_number(variant, "rho", 1.0, "variant");
  const std::string mixing = detail::get_string(variant, "mixing", "realized", "variant");
  if (mixing == "realized") c.fc.mixing = Mixing::Realized;
  else if (mixing == "mean_field") c.fc.mixing = Mixing::MeanField;
  else throw ValidationError("variant.mixing", "expected realized or mean_field");
  if (variant.contains("mixing_p")) c.fc.mixing_p = get_number(variant, "mixing_p", 1.0, "variant");
  if (c.engine == Engine::FCInexact) {
    c.fc.variant = FcVariant::Inexact;
  } else {
    c.fc.variant = prox == "rho" ? FcVariant::ExactRhoProx : FcVariant::ExactBProx;
    if (c.engine == Engine::FC && c.fc.mixing == Mixing::MeanField) {
      throw ValidationError("variant.mixing", "mean_field requires engine fc_inexact");
    }
  }

  std::vector<HessianPolicy> per_agent;
  const HessianPolicy h = detail::parse_hessian(j.value("hessian", nlohmann::json::object()), per_agent).front();
  c.fc.hessian = c.ft.hessian = h;
  c.fc.agent_hessian = c.ft.agent_hessian = per_agent;
  c.fc.local_tolerance = c.ft.local_tolerance = get_number(j, "local_tolerance", 1e-10, "config");

  c.polling = detail::parse_polling(j.value("polling", nlohmann::json::object()));
  if (j.contains("seed")) c.polling.seed = detail::parse_seed(j.at("seed"));
  c.K = static_cast<int>(detail::get_integer(j, "K", 50, "config"));
  c.trials = static_cast<int>(detail::get_integer(j, "trials", 100, "config"));
  if (j.contains("p_list")) {
    const VectorXd ps = io::to_vector(j.at("p_list"), "p_list");
    c.p_list.assign(ps.data(), ps.data() + ps.size());
  }
  if (j.contains("initial")) {
    detail::require_object(j.at("initial"), "initial");
    c.initial = j.at("initial");
  }
  const nlohmann::json diag = j.value("diagnostics", nlohmann::json::object());
  detail::require_object(diag, "diagnostics");
  c.diagnostics.energy = detail::get_bool(diag, "energy", true, "diagnostics");
  c.diagnostics.theorem2 = detail::get_bool(diag, "theorem2", false, "diagnostics");
  c.diagnostics.theorem3 = detail::get_bool(diag, "theorem3", false, "diagnostics");
  const nlohmann::json out = j.value("output", nlohmann::json::object());
  detail::require_object(out, "output");
  c.trace_file = detail::get_string(out, "trace", "trace.csv", "output");
  c.summary_file = detail::get_string(out, "summary", "summary.json", "output");

  validate(c);
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config", "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config", std::string("invalid JSON: ") + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

/// Canonical form with every default written out and the problem inlined.
inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["problem"] = io::problem_to_json(c.problem);
  j["engine"] = to_string(c.engine);
  j["variant"] = {{"prox", c.fc.variant == FcVariant::ExactRhoProx ? "rho" : "B"},
                  {"rho", c.fc.rho},
                  {"mixing", to_string(c.fc.mixing)}};
  if (c.fc.mixing_p) j["variant"]["mixing_p"] = *c.fc.mixing_p;
  j["hessian"] = detail::hessian_to_json(c.hessian(), c.agent_hessian());
  j["local_tolerance"] = c.fc.local_tolerance;
  j["polling"] = {{"mode", detail::to_string(c.polling.mode)},
                  {"p", c.polling.p},
                  {"size", c.polling.size},
                  {"force_full_first_round", c.polling.force_full_first_round}};
  j["seed"] = c.polling.seed;
  j["K"] = c.K;
  j["trials"] = c.trials;
  j["p_list"] = c.p_list;
  if (c.initial) j["initial"] = *c.initial;
  j["diagnostics"] = {{"energy", c.diagnostics.energy},
                      {"theorem2", c.diagnostics.theorem2},
                      {"theorem3", c.diagnostics.theorem3}};
  j["output"] = {{"trace", c.trace_file}, {"summary", c.summary_file}};
  return j;
}

/// Hash of the canonical form; stable under parse/serialize round trips.
inline std::string config_hash(const RunConfig& c) { return io::fnv1a_hex(to_json(c).dump()); }

}  // namespace flexaladin
