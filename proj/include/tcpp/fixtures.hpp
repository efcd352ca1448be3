/**
 * @file fixtures.hpp
 * @brief Hand-built families that are not time consistent, used by the
 *        checks' documentation, the tests and the acceptance suite.
 */
#pragma once

#include "tcpp/family.hpp"
#include "tcpp/tree.hpp"

#include <algorithm>
#include <memory>

namespace tcpp::fixtures {

inline std::size_t latest_time_below(const FiltrationTree& tree, NodeId n, const StoppingTime& tau) {
  std::size_t t = tree.time(n);
  for (NodeId v : tau.cut())
    if (tree.is_ancestor_or_self(n, v)) t = std::max(t, tree.time(v));
  return t;
}

inline std::size_t earliest_time_below(const FiltrationTree& tree, NodeId n, const StoppingTime& tau) {
  std::size_t t = tree.horizon();
  for (NodeId v : tau.cut())
    if (tree.is_ancestor_or_self(n, v)) t = std::min(t, tree.time(v));
  return t;
}

/// Two-period binary tree with P uniform and two members: P itself at zero
/// penalty, and the measure with kernel (0.9, 0.1) at every node whose penalty
/// grows with the square of the remaining horizon, k * h^2. Penalties of this
/// shape are not additive across time, so the family is not time consistent:
/// for X = 1 on the up-up leaf, Pi_{0,2}(X) = 0.61 while Pi_{0,1}(Pi_{1,2}(X)) = 0.715.
inline MeasureFamily horizon_penalty_family(double k = 0.05) {
  const auto tree = FiltrationTree::regular(2, {0.5, 0.5});
  KernelField uniform(tree.size()), skewed(tree.size());
  for (NodeId v : tree.internal_nodes()) {
    uniform[v] = {0.5, 0.5};
    skewed[v] = {0.9, 0.1};
  }
  MeasureFamily fam{tree, {uniform, skewed}, {}};
  fam.penalty = [tree, k](NodeId n, const StoppingTime& tau, std::size_t i) {
    if (i == 0) return 0.0;
    const double h = static_cast<double>(latest_time_below(tree, n, tau) - tree.time(n));
    return k * h * h;
  };
  return fam;
}

/// The claim exhibiting the failure of `horizon_penalty_family`: 1 on the up-up leaf.
inline Claim horizon_penalty_witness_claim(const FiltrationTree& tree) {
  std::vector<double> v(tree.num_leaves(), 0.0);
  v[0] = 1.0;
  return {StoppingTime::terminal(tree), std::move(v)};
}

/// All eight selections of the rectangular menu {(1/2,1/2) at 0, (0.9,0.1) at k}
/// on the two-period binary tree, but each member is only charged for the
/// nodes before the earliest date at which tau stops below n. For
/// deterministic tau this is exactly the rectangular penalty, so every chain
/// of deterministic times is consistent; across a stopping time that stops
/// early on one branch the later branch goes uncharged and consistency fails.
inline MeasureFamily early_stop_family(double k = 0.05) {
  const auto tree = FiltrationTree::regular(2, {0.5, 0.5});
  auto kernels = std::make_shared<std::vector<KernelField>>();
  auto steps = std::make_shared<std::vector<std::vector<double>>>();
  const auto internal = tree.internal_nodes();
  for (std::size_t mask = 0; mask < (1u << internal.size()); ++mask) {
    KernelField kf(tree.size());
    std::vector<double> pen(tree.size(), 0.0);
    for (std::size_t j = 0; j < internal.size(); ++j) {
      const bool skew = (mask >> j) & 1u;
      kf[internal[j]] = skew ? std::vector<double>{0.9, 0.1} : std::vector<double>{0.5, 0.5};
      pen[internal[j]] = skew ? k : 0.0;
    }
    kernels->push_back(std::move(kf));
    steps->push_back(std::move(pen));
  }
  MeasureFamily fam{tree, *kernels, {}};
  fam.penalty = [tree, kernels, steps](NodeId n, const StoppingTime& tau, std::size_t i) {
    const std::size_t stop = earliest_time_below(tree, n, tau);
    const auto& pen = (*steps)[i];
    return expected_step_sum(tree, (*kernels)[i], n, tau,
                             [&](NodeId v) { return tree.time(v) < stop ? pen[v] : 0.0; });
  };
  return fam;
}

/// Stops at the up node at time 1 and runs to the leaves on the down branch.
inline StoppingTime early_stop_time(const FiltrationTree& tree) { return StoppingTime::from_cut(tree, {1, 5, 6}); }

/// The claim exhibiting the failure of `early_stop_family`: 1 on the down-up leaf.
inline Claim early_stop_witness_claim(const FiltrationTree& tree) {
  std::vector<double> v(tree.num_leaves(), 0.0);
  v[2] = 1.0;
  return {StoppingTime::terminal(tree), std::move(v)};
}

}  // namespace tcpp::fixtures
