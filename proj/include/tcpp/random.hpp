/**
 * @file random.hpp
 * @brief Seeded generators for trees, models, stopping times and claims.
 */
#pragma once

#include "tcpp/scenario.hpp"
#include "tcpp/tree.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace tcpp {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi_inclusive) {
  return std::uniform_int_distribution<std::size_t>(lo, hi_inclusive)(rng);
}

inline bool coin(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

/// Probability vector of length n; each component is zeroed with probability `zero_prob`
/// (at least one component always stays positive).
inline std::vector<double> random_kernel(Rng& rng, std::size_t n, double zero_prob = 0.0) {
  std::vector<double> k(n);
  double s = 0.0;
  for (auto& v : k) {
    v = coin(rng, zero_prob) ? 0.0 : uniform(rng, 0.05, 1.0);
    s += v;
  }
  if (s == 0.0) {
    k[uniform_index(rng, 0, n - 1)] = 1.0;
    s = 1.0;
  }
  for (auto& v : k) v /= s;
  return k;
}

/// Event tree with per-node branching drawn from [min_branch, max_branch] and random positive weights.
inline FiltrationTree random_tree(Rng& rng, std::size_t horizon, std::size_t min_branch, std::size_t max_branch) {
  std::vector<std::optional<NodeId>> parents{std::nullopt};
  std::vector<double> prob{1.0};
  std::vector<NodeId> level{0};
  for (std::size_t t = 0; t < horizon; ++t) {
    std::vector<NodeId> next;
    for (NodeId v : level) {
      const std::size_t b = uniform_index(rng, min_branch, max_branch);
      const auto k = random_kernel(rng, b);
      for (std::size_t c = 0; c < b; ++c) {
        parents.emplace_back(v);
        prob.push_back(prob[v] * k[c]);
        next.push_back(parents.size() - 1);
      }
    }
    level = std::move(next);
  }
  double total = 0.0;
  for (NodeId v : level) total += prob[v];
  std::vector<std::pair<NodeId, double>> w;
  for (NodeId v : level) w.emplace_back(v, prob[v] / total);
  return {std::move(parents), w};
}

struct ModelOptions {
  std::size_t min_menu = 1;
  std::size_t max_menu = 3;
  double penalty_prob = 0.5;    ///< chance that a non-anchor entry carries a positive penalty
  double max_penalty = 0.5;
  double zero_component_prob = 0.0;
};

/// Random normalized model: every menu holds at least one zero-penalty entry.
inline ScenarioModel random_model(Rng& rng, const FiltrationTree& tree, const ModelOptions& opt = {}) {
  std::vector<std::vector<MenuEntry>> menus(tree.size());
  for (NodeId v : tree.internal_nodes()) {
    const std::size_t b = tree.children(v).size();
    const std::size_t m = uniform_index(rng, opt.min_menu, opt.max_menu);
    const std::size_t anchor = uniform_index(rng, 0, m - 1);
    for (std::size_t e = 0; e < m; ++e) {
      MenuEntry entry{random_kernel(rng, b, opt.zero_component_prob), 0.0};
      if (e != anchor && coin(rng, opt.penalty_prob)) entry.penalty = uniform(rng, 0.01, opt.max_penalty);
      menus[v].push_back(std::move(entry));
    }
  }
  return {tree, std::move(menus)};
}

/// Random stopping time between lo and hi (lo <= hi required); each node between them
/// stops with probability `stop_prob`.
inline StoppingTime random_stopping_time_between(const FiltrationTree& tree, const StoppingTime& lo,
                                                 const StoppingTime& hi, Rng& rng, double stop_prob = 0.4) {
  std::vector<NodeId> cut;
  std::vector<NodeId> stack(lo.cut().begin(), lo.cut().end());
  while (!stack.empty()) {
    const NodeId v = stack.back();
    stack.pop_back();
    if (hi.contains(v) || coin(rng, stop_prob)) {
      cut.push_back(v);
      continue;
    }
    for (NodeId c : tree.children(v)) stack.push_back(c);
  }
  return StoppingTime::from_cut(tree, std::move(cut));
}

inline StoppingTime random_stopping_time(const FiltrationTree& tree, Rng& rng, double stop_prob = 0.4) {
  return random_stopping_time_between(tree, StoppingTime::root(tree), StoppingTime::terminal(tree), rng, stop_prob);
}

inline Claim random_claim(const StoppingTime& at, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(at.size());
  for (auto& x : v) x = uniform(rng, lo, hi);
  return {at, std::move(v)};
}

}  // namespace tcpp
