#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "flexaladin/errors.hpp"

namespace flexaladin {

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stateless 64-bit draw addressed by (seed, k, i):
/// splitmix64(splitmix64(splitmix64(seed) ^ k) ^ i).
constexpr std::uint64_t polling_key(std::uint64_t seed, std::uint64_t k, std::uint64_t i) noexcept {
  return splitmix64(splitmix64(splitmix64(seed) ^ k) ^ i);
}

/// Uniform in [0, 1) from the top 53 bits.
constexpr double polling_uniform(std::uint64_t seed, std::uint64_t k, std::uint64_t i) noexcept {
  return static_cast<double>(polling_key(seed, k, i) >> 11) * 0x1.0p-53;
}

enum class PollingMode { Bernoulli, FixedSize, Full };

struct PollingConfig {
  double p = 1.0;
  std::uint64_t seed = 0;
  bool force_full_first_round = true;
  PollingMode mode = PollingMode::Bernoulli;
  /// Number of agents per round in FixedSize mode.
  int size = 1;

  void validate(int N) const {
    if (mode == PollingMode::Bernoulli && !(p > 0.0 && p <= 1.0)) {
      throw ValidationError("polling.p", "must lie in (0, 1]");
    }
    if (mode == PollingMode::FixedSize && (size < 1 || size > N)) {
      throw ValidationError("polling.size", "must lie in [1, N]");
    }
  }
};

/// Agents (0-based, ascending, unique) that perform a local update at iteration k.
struct ActiveSet {
  int k = 0;
  std::vector<int> members;

  bool contains(int i) const { return std::binary_search(members.begin(), members.end(), i); }
  bool operator==(const ActiveSet&) const = default;
};

/// Draws C^k. Bernoulli mode includes agent i iff u(seed, k, i) < p; the
/// result is independent of evaluation order. Empty sets are permitted.
inline ActiveSet draw_active_set(const PollingConfig& cfg, int N, int k) {
  if (N < 1) throw ValidationError("N", "need at least one agent");
  if (k < 1) throw ValidationError("k", "iterations are numbered from 1");
  cfg.validate(N);

  ActiveSet set{k, {}};
  if (cfg.mode == PollingMode::Full || (k == 1 && cfg.force_full_first_round)) {
    set.members.resize(static_cast<std::size_t>(N));
    std::iota(set.members.begin(), set.members.end(), 0);
    return set;
  }
  const auto kk = static_cast<std::uint64_t>(k);
  if (cfg.mode == PollingMode::Bernoulli) {
    for (int i = 0; i < N; ++i) {
      if (polling_uniform(cfg.seed, kk, static_cast<std::uint64_t>(i)) < cfg.p) set.members.push_back(i);
    }
    return set;
  }
  // FixedSize: the `size` agents with the smallest keys.
  std::vector<int> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return polling_key(cfg.seed, kk, static_cast<std::uint64_t>(a)) <
           polling_key(cfg.seed, kk, static_cast<std::uint64_t>(b));
  });
  set.members.assign(order.begin(), order.begin() + cfg.size);
  std::sort(set.members.begin(), set.members.end());
  return set;
}

/// Agents that never appear in any of the given sets. Empty result means
/// every agent was active at least once.
inline std::vector<int> verify_coverage(const std::vector<ActiveSet>& sets, int N) {
  if (sets.empty()) throw ValidationError("sets", "need at least one active set");
  std::vector<bool> seen(static_cast<std::size_t>(N), false);
  for (const auto& s : sets) {
    for (int i : s.members) {
      if (i >= 0 && i < N) seen[static_cast<std::size_t>(i)] = true;
    }
  }
  std::vector<int> missing;
  for (int i = 0; i < N; ++i) {
    if (!seen[static_cast<std::size_t>(i)]) missing.push_back(i);
  }
  return missing;
}

}  // namespace flexaladin
