#pragma once

// JSON description of consensus and resource problems.
//
//   {"type": "consensus",
//    "agents": [{"family": "quadratic", "Q": [[1]], "q": [0], "c": 0},
//               {"family": "abs_deviation", "c": [5]},
//               {"family": "trig_quadratic", "a": 1, "b": 1.5, "c": 0, "n": 1}],
//    "oracle_bracket": [0, 4]}
//
//   {"type": "resource", "b": [2],
//    "agents": [{"family": "quadratic", "Q": [[1]], "q": [0], "A": [[1]]}, ...]}
//
// Scalars are accepted wherever a 1-vector or 1x1 matrix is expected.

#include <cstdint>
#include <cstdio>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "flexaladin/errors.hpp"
#include "flexaladin/objectives.hpp"

namespace flexaladin::io {

using nlohmann::json;

using Problem = std::variant<ConsensusProblem, ResourceProblem>;

inline const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(path + "." + key, "missing");
  return j.at(key);
}

inline double to_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError(path, "expected a number");
  return j.get<double>();
}

inline VectorXd to_vector(const json& j, const std::string& path) {
  if (j.is_number()) return VectorXd::Constant(1, j.get<double>());
  if (!j.is_array()) throw ValidationError(path, "expected an array of numbers");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t r = 0; r < j.size(); ++r) v[static_cast<Eigen::Index>(r)] = to_number(j[r], path);
  return v;
}

inline MatrixXd to_matrix(const json& j, const std::string& path) {
  if (j.is_number()) return MatrixXd::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ValidationError(path, "expected a nonempty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) throw ValidationError(path, "rows must be nonempty arrays");
  MatrixXd M(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ValidationError(path, "ragged rows");
    for (std::size_t c = 0; c < cols; ++c) {
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = to_number(j[r][c], path);
    }
  }
  return M;
}

inline json from_vector(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index r = 0; r < v.size(); ++r) a.push_back(v[r]);
  return a;
}

inline json from_matrix(const MatrixXd& M) {
  json a = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    a.push_back(std::move(row));
  }
  return a;
}

inline ObjectivePtr parse_objective(const json& j, const std::string& path) {
  const json& fam = require(j, "family", path);
  if (!fam.is_string()) throw ValidationError(path + ".family", "expected a string");
  const std::string family = fam.get<std::string>();
  try {
    if (family == "quadratic") {
      MatrixXd Q = to_matrix(require(j, "Q", path), path + ".Q");
      VectorXd q = j.contains("q") ? to_vector(j.at("q"), path + ".q") : VectorXd::Zero(Q.rows());
      const double c = j.contains("c") ? to_number(j.at("c"), path + ".c") : 0.0;
      if (Q.rows() != Q.cols() || Q.rows() != q.size()) {
        throw ValidationError(path + ".Q", "must be square and match the size of q");
      }
      return std::make_shared<QuadraticObjective>(std::move(Q), std::move(q), c);
    }
    if (family == "abs_deviation") {
      return std::make_shared<AbsDeviationObjective>(to_vector(require(j, "c", path), path + ".c"));
    }
    if (family == "trig_quadratic") {
      const double a = to_number(require(j, "a", path), path + ".a");
      const double b = to_number(require(j, "b", path), path + ".b");
      const double c = j.contains("c") ? to_number(j.at("c"), path + ".c") : 0.0;
      const json& nj = j.contains("n") ? j.at("n") : json(1);
      if (!nj.is_number_integer() || nj.get<long long>() < 1) {
        throw ValidationError(path + ".n", "expected a positive integer");
      }
      return std::make_shared<TrigQuadraticObjective>(a, b, c, nj.get<Eigen::Index>());
    }
  } catch (const ValidationError& e) {
    if (e.field().rfind(path, 0) == 0) throw;
    throw ValidationError(path + "." + e.field(), e.message());
  }
  throw ValidationError(path + ".family", "unknown family '" + family + "'");
}

inline json objective_to_json(const Objective& f) {
  if (const auto* q = dynamic_cast<const QuadraticObjective*>(&f)) {
    return {{"family", "quadratic"}, {"Q", from_matrix(q->Q())}, {"q", from_vector(q->q())}, {"c", q->c()}};
  }
  if (const auto* a = dynamic_cast<const AbsDeviationObjective*>(&f)) {
    return {{"family", "abs_deviation"}, {"c", from_vector(a->center())}};
  }
  if (const auto* t = dynamic_cast<const TrigQuadraticObjective*>(&f)) {
    return {{"family", "trig_quadratic"}, {"a", t->a()}, {"b", t->b()}, {"c", t->c()}, {"n", t->dimension()}};
  }
  throw CapabilityError("objective family '" + f.family() + "' has no JSON form");
}

inline Problem parse_problem(const json& j, const std::string& path = "problem") {
  if (!j.is_object()) throw ValidationError(path, "expected an object");
  const json& type = require(j, "type", path);
  if (!type.is_string()) throw ValidationError(path + ".type", "expected a string");
  const json& agents = require(j, "agents", path);
  if (!agents.is_array() || agents.empty()) throw ValidationError(path + ".agents", "need at least one agent");

  std::vector<ObjectivePtr> objs;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    objs.push_back(parse_objective(agents[i], path + ".agents[" + std::to_string(i) + "]"));
  }

  const std::string t = type.get<std::string>();
  if (t == "consensus") {
    std::optional<std::pair<double, double>> bracket;
    if (j.contains("oracle_bracket")) {
      const VectorXd br = to_vector(j.at("oracle_bracket"), path + ".oracle_bracket");
      if (br.size() != 2) throw ValidationError(path + ".oracle_bracket", "expected [lo, hi]");
      bracket = std::make_pair(br[0], br[1]);
    }
    try {
      return ConsensusProblem(std::move(objs), bracket);
    } catch (const ValidationError& e) {
      throw ValidationError(path + "." + e.field(), e.message());
    }
  }
  if (t == "resource") {
    VectorXd b = to_vector(require(j, "b", path), path + ".b");
    std::vector<MatrixXd> A;
    for (std::size_t i = 0; i < agents.size(); ++i) {
      const std::string ap = path + ".agents[" + std::to_string(i) + "]";
      A.push_back(to_matrix(require(agents[i], "A", ap), ap + ".A"));
    }
    try {
      ResourceProblem p(std::move(objs), std::move(A), std::move(b));
      p.validate();
      return p;
    } catch (const ValidationError& e) {
      throw ValidationError(path + "." + e.field(), e.message());
    }
  }
  throw ValidationError(path + ".type", "expected 'consensus' or 'resource', got '" + t + "'");
}

inline json problem_to_json(const Problem& p) {
  return std::visit(
      [](const auto& prob) -> json {
        using T = std::decay_t<decltype(prob)>;
        json agents = json::array();
        for (std::size_t i = 0; i < prob.objectives.size(); ++i) {
          json a = objective_to_json(*prob.objectives[i]);
          if constexpr (std::is_same_v<T, ResourceProblem>) a["A"] = from_matrix(prob.A[i]);
          agents.push_back(std::move(a));
        }
        json j = {{"agents", std::move(agents)}};
        if constexpr (std::is_same_v<T, ConsensusProblem>) {
          j["type"] = "consensus";
          if (prob.oracle_bracket) j["oracle_bracket"] = {prob.oracle_bracket->first, prob.oracle_bracket->second};
        } else {
          j["type"] = "resource";
          j["b"] = from_vector(prob.b);
        }
        return j;
      },
      p);
}

/// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Digest of the canonical JSON form of a problem.
inline std::string problem_digest(const Problem& p) { return fnv1a_hex(problem_to_json(p).dump()); }

}  // namespace flexaladin::io
