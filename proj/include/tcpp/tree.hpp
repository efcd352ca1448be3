/**
 * @file tree.hpp
 * @brief Finite filtered probability space as an event tree.
 *
 * Atoms of F_t are the nodes at time t, Omega is the set of leaves, P is a
 * strictly positive weight on leaves. Stopping times are antichains of nodes
 * met exactly once by every root-to-leaf path; a claim at a stopping time is a
 * value per cut node, so F_tau measurability is structural.
 */
#pragma once

#include "tcpp/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tcpp {

using NodeId = std::size_t;
inline constexpr std::size_t npos = static_cast<std::size_t>(-1);

class FiltrationTree {
 public:
  /// `parents[i]` is the parent of node i (nullopt for the root). Children keep
  /// the order in which they appear. `leaf_weights` pairs each leaf with P({leaf}).
  FiltrationTree(std::vector<std::optional<NodeId>> parents,
                 const std::vector<std::pair<NodeId, double>>& leaf_weights) {
    const std::size_t n = parents.size();
    if (n < 2) throw Error(Errc::invalid_tree, "a tree needs a root and at least one child");
    parent_ = std::move(parents);
    children_.assign(n, {});
    std::size_t roots = 0;
    for (NodeId i = 0; i < n; ++i) {
      if (!parent_[i]) {
        root_ = i;
        ++roots;
        continue;
      }
      if (*parent_[i] >= n || *parent_[i] == i)
        throw Error(Errc::invalid_tree, "node " + std::to_string(i) + " has an invalid parent");
      children_[*parent_[i]].push_back(i);
    }
    if (roots != 1) throw Error(Errc::invalid_tree, "expected exactly one root, found " + std::to_string(roots));

    time_.assign(n, npos);
    time_[root_] = 0;
    std::vector<NodeId> stack{root_};
    std::size_t seen = 0;
    while (!stack.empty()) {
      const NodeId v = stack.back();
      stack.pop_back();
      ++seen;
      for (NodeId c : children_[v]) {
        time_[c] = time_[v] + 1;
        stack.push_back(c);
      }
    }
    if (seen != n) throw Error(Errc::invalid_tree, "some nodes are not reachable from the root (cycle)");

    horizon_ = 0;
    for (NodeId i = 0; i < n; ++i)
      if (children_[i].empty()) horizon_ = std::max(horizon_, time_[i]);
    for (NodeId i = 0; i < n; ++i) {
      if (children_[i].empty()) {
        if (time_[i] != horizon_)
          throw Error(Errc::invalid_tree, "leaf " + std::to_string(i) + " is at time " +
                                              std::to_string(time_[i]) + " but the horizon is " +
                                              std::to_string(horizon_));
        leaf_index_.push_back(leaves_.size());
        leaves_.push_back(i);
      } else {
        leaf_index_.push_back(npos);
      }
    }

    weights_.assign(leaves_.size(), -1.0);
    for (const auto& [node, w] : leaf_weights) {
      if (node >= n || !children_[node].empty())
        throw Error(Errc::invalid_tree, "weight given for non-leaf node " + std::to_string(node));
      if (!(w > 0.0) || !std::isfinite(w))
        throw Error(Errc::invalid_tree, "leaf " + std::to_string(node) + " must have a strictly positive weight");
      if (weights_[leaf_index_[node]] >= 0.0)
        throw Error(Errc::invalid_tree, "duplicate weight for leaf " + std::to_string(node));
      weights_[leaf_index_[node]] = w;
    }
    double total = 0.0;
    for (std::size_t k = 0; k < leaves_.size(); ++k) {
      if (weights_[k] < 0.0)
        throw Error(Errc::invalid_tree, "leaf " + std::to_string(leaves_[k]) + " has no weight");
      total += weights_[k];
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw Error(Errc::invalid_tree, "leaf weights sum to " + std::to_string(total) + ", expected 1");

    under_.assign(n, {});
    mass_.assign(n, 0.0);
    for (std::size_t k = 0; k < leaves_.size(); ++k) {
      for (NodeId v = leaves_[k];; v = *parent_[v]) {
        under_[v].push_back(k);
        mass_[v] += weights_[k];
        if (!parent_[v]) break;
      }
    }
  }

  /// Every node has `step.size()` children; P's one-step kernel is `step` everywhere.
  /// Nodes are numbered breadth first, children consecutively.
  static FiltrationTree regular(std::size_t horizon, const std::vector<double>& step) {
    if (horizon == 0 || step.empty()) throw Error(Errc::invalid_tree, "regular tree needs horizon >= 1 and branching >= 1");
    std::vector<std::optional<NodeId>> parents{std::nullopt};
    std::vector<double> prob{1.0};
    std::vector<NodeId> level{0};
    for (std::size_t t = 0; t < horizon; ++t) {
      std::vector<NodeId> next;
      for (NodeId v : level)
        for (double p : step) {
          parents.emplace_back(v);
          prob.push_back(prob[v] * p);
          next.push_back(parents.size() - 1);
        }
      level = std::move(next);
    }
    std::vector<std::pair<NodeId, double>> w;
    for (NodeId v : level) w.emplace_back(v, prob[v]);
    return FiltrationTree(std::move(parents), w);
  }

  [[nodiscard]] std::size_t size() const { return parent_.size(); }
  [[nodiscard]] std::size_t horizon() const { return horizon_; }
  [[nodiscard]] NodeId root() const { return root_; }
  [[nodiscard]] std::size_t time(NodeId v) const { return time_.at(v); }
  [[nodiscard]] std::optional<NodeId> parent(NodeId v) const { return parent_.at(v); }
  [[nodiscard]] std::span<const NodeId> children(NodeId v) const { return children_.at(v); }
  [[nodiscard]] bool is_leaf(NodeId v) const { return children_.at(v).empty(); }
  [[nodiscard]] bool contains(NodeId v) const { return v < size(); }

  [[nodiscard]] std::span<const NodeId> leaves() const { return leaves_; }
  [[nodiscard]] std::size_t num_leaves() const { return leaves_.size(); }
  [[nodiscard]] std::size_t leaf_index(NodeId v) const { return leaf_index_.at(v); }
  [[nodiscard]] std::span<const double> leaf_weights() const { return weights_; }
  /// Indices (into leaves()) of the leaves below or at v.
  [[nodiscard]] std::span<const std::size_t> leaves_under(NodeId v) const { return under_.at(v); }
  /// P(atom v).
  [[nodiscard]] double mass(NodeId v) const { return mass_.at(v); }

  [[nodiscard]] std::vector<double> reference_kernel(NodeId v) const {
    std::vector<double> k;
    for (NodeId c : children(v)) k.push_back(mass_[c] / mass_[v]);
    return k;
  }

  [[nodiscard]] std::size_t child_position(NodeId child) const {
    const auto p = parent_.at(child);
    if (!p) return npos;
    const auto& ch = children_[*p];
    return static_cast<std::size_t>(std::find(ch.begin(), ch.end(), child) - ch.begin());
  }

  [[nodiscard]] NodeId ancestor_at(NodeId v, std::size_t t) const {
    while (time_[v] > t) v = *parent_[v];
    return v;
  }

  [[nodiscard]] bool is_ancestor_or_self(NodeId a, NodeId b) const {
    return time_[a] <= time_[b] && ancestor_at(b, time_[a]) == a;
  }

  [[nodiscard]] std::vector<NodeId> internal_nodes() const {
    std::vector<NodeId> out;
    for (NodeId v = 0; v < size(); ++v)
      if (!is_leaf(v)) out.push_back(v);
    return out;
  }

  [[nodiscard]] std::vector<NodeId> nodes_at(std::size_t t) const {
    std::vector<NodeId> out;
    for (NodeId v = 0; v < size(); ++v)
      if (time_[v] == t) out.push_back(v);
    return out;
  }

  /// Parents before children.
  [[nodiscard]] std::vector<NodeId> topological_order() const {
    std::vector<NodeId> order(size());
    for (NodeId v = 0; v < size(); ++v) order[v] = v;
    std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return time_[a] < time_[b]; });
    return order;
  }

  friend bool operator==(const FiltrationTree& a, const FiltrationTree& b) {
    return a.parent_ == b.parent_ && a.weights_ == b.weights_;
  }

 private:
  std::vector<std::optional<NodeId>> parent_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<std::size_t> time_;
  NodeId root_ = 0;
  std::size_t horizon_ = 0;
  std::vector<NodeId> leaves_;
  std::vector<std::size_t> leaf_index_;
  std::vector<double> weights_;
  std::vector<std::vector<std::size_t>> under_;
  std::vector<double> mass_;
};

/// Stopping time as an antichain hit exactly once by every root-to-leaf path.
class StoppingTime {
 public:
  StoppingTime() = default;

  static StoppingTime from_cut(const FiltrationTree& tree, std::vector<NodeId> cut) {
    StoppingTime st;
    std::sort(cut.begin(), cut.end());
    cut.erase(std::unique(cut.begin(), cut.end()), cut.end());
    st.slot_.assign(tree.size(), npos);
    for (std::size_t k = 0; k < cut.size(); ++k) {
      if (!tree.contains(cut[k]))
        throw Error(Errc::foreign_node, "stopping time references node " + std::to_string(cut[k]) +
                                            " which is not in the tree");
      st.slot_[cut[k]] = k;
    }
    for (NodeId leaf : tree.leaves()) {
      std::size_t hits = 0;
      for (NodeId v = leaf;; v = *tree.parent(v)) {
        if (st.slot_[v] != npos) ++hits;
        if (!tree.parent(v)) break;
      }
      if (hits != 1)
        throw Error(Errc::invalid_stopping_time, "path to leaf " + std::to_string(leaf) + " meets the cut " +
                                                     std::to_string(hits) + " times");
    }
    st.cut_ = std::move(cut);
    return st;
  }

  static StoppingTime root(const FiltrationTree& tree) { return from_cut(tree, {tree.root()}); }
  static StoppingTime terminal(const FiltrationTree& tree) {
    return from_cut(tree, {tree.leaves().begin(), tree.leaves().end()});
  }
  static StoppingTime at_time(const FiltrationTree& tree, std::size_t t) {
    return from_cut(tree, tree.nodes_at(std::min(t, tree.horizon())));
  }

  [[nodiscard]] std::span<const NodeId> cut() const { return cut_; }
  [[nodiscard]] std::size_t size() const { return cut_.size(); }
  [[nodiscard]] bool contains(NodeId v) const { return v < slot_.size() && slot_[v] != npos; }
  /// Position of v within cut(), or npos.
  [[nodiscard]] std::size_t slot(NodeId v) const { return v < slot_.size() ? slot_[v] : npos; }

  /// The cut node that is an ancestor of (or equal to) v, if any.
  [[nodiscard]] std::optional<NodeId> atom_above(const FiltrationTree& tree, NodeId v) const {
    for (;;) {
      if (contains(v)) return v;
      const auto p = tree.parent(v);
      if (!p) return std::nullopt;
      v = *p;
    }
  }

  [[nodiscard]] NodeId atom_of_leaf(const FiltrationTree& tree, NodeId leaf) const {
    return *atom_above(tree, leaf);
  }

  [[nodiscard]] std::string describe() const {
    std::string s = "{";
    for (std::size_t k = 0; k < cut_.size(); ++k) s += (k ? "," : "") + std::to_string(cut_[k]);
    return s + "}";
  }

  friend bool operator==(const StoppingTime& a, const StoppingTime& b) { return a.cut_ == b.cut_; }

 private:
  std::vector<NodeId> cut_;
  std::vector<std::size_t> slot_;
};

/// a <= b: on every path the node of `a` is at or above the node of `b`.
inline bool precedes(const FiltrationTree& tree, const StoppingTime& a, const StoppingTime& b) {
  for (NodeId leaf : tree.leaves()) {
    if (tree.time(a.atom_of_leaf(tree, leaf)) > tree.time(b.atom_of_leaf(tree, leaf))) return false;
  }
  return true;
}

/// The atoms of F_tau, i.e. the cut itself.
inline std::vector<NodeId> sigma_algebra_nodes(const FiltrationTree& tree, const StoppingTime& tau) {
  for (NodeId v : tau.cut())
    if (!tree.contains(v)) throw Error(Errc::foreign_node, "node " + std::to_string(v) + " not in tree");
  return {tau.cut().begin(), tau.cut().end()};
}

/// Bounded F_tau-measurable position: one value per atom of F_tau.
struct Claim {
  StoppingTime at;
  std::vector<double> values;  ///< aligned with at.cut()

  Claim() = default;
  Claim(StoppingTime when, std::vector<double> v) : at(std::move(when)), values(std::move(v)) {
    if (values.size() != at.size()) throw Error(Errc::invariant_violation, "claim needs one value per cut node");
  }

  static Claim constant(const StoppingTime& when, double c) { return {when, std::vector<double>(when.size(), c)}; }

  [[nodiscard]] double at_node(NodeId v) const {
    const std::size_t k = at.slot(v);
    if (k == npos) throw Error(Errc::foreign_node, "node " + std::to_string(v) + " is not an atom of this claim");
    return values[k];
  }

  /// Same position viewed at a later stopping time (constant on each old atom).
  [[nodiscard]] Claim lifted_to(const FiltrationTree& tree, const StoppingTime& later) const {
    std::vector<double> v(later.size());
    for (std::size_t k = 0; k < later.size(); ++k) {
      const auto a = at.atom_above(tree, later.cut()[k]);
      if (!a) throw Error(Errc::precondition_violation, "lift target is not later than the claim's stopping time");
      v[k] = values[at.slot(*a)];
    }
    return {later, std::move(v)};
  }

  /// Value on every leaf (F_infinity view).
  [[nodiscard]] std::vector<double> leaf_values(const FiltrationTree& tree) const {
    std::vector<double> v(tree.num_leaves());
    for (std::size_t k = 0; k < tree.num_leaves(); ++k) v[k] = values[at.slot(at.atom_of_leaf(tree, tree.leaves()[k]))];
    return v;
  }

  friend bool operator==(const Claim& a, const Claim& b) { return a.at == b.at && a.values == b.values; }
};

template <class F>
Claim combine(const Claim& a, const Claim& b, F f) {
  if (!(a.at == b.at)) throw Error(Errc::precondition_violation, "claims live at different stopping times");
  std::vector<double> v(a.values.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = f(a.values[k], b.values[k]);
  return {a.at, std::move(v)};
}

inline Claim operator+(const Claim& a, const Claim& b) { return combine(a, b, std::plus<>{}); }
inline Claim operator-(const Claim& a, const Claim& b) { return combine(a, b, std::minus<>{}); }
inline Claim operator*(double s, const Claim& a) {
  Claim out = a;
  for (double& v : out.values) v *= s;
  return out;
}
inline Claim operator-(const Claim& a) { return -1.0 * a; }

/// Claim whose atoms may be undefined (conditioning on null atoms).
struct PartialClaim {
  StoppingTime at;
  std::vector<std::optional<double>> values;

  [[nodiscard]] bool complete() const {
    return std::all_of(values.begin(), values.end(), [](const auto& v) { return v.has_value(); });
  }
  [[nodiscard]] Claim value_or(double fallback) const {
    std::vector<double> v(values.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = values[k].value_or(fallback);
    return {at, std::move(v)};
  }
  /// Throws when any atom is undefined.
  [[nodiscard]] Claim value() const {
    if (!complete()) throw Error(Errc::mass_mismatch, "conditioning on an atom of zero mass");
    return value_or(0.0);
  }
};

/// Probability measure given by its density dQ/dP on leaves.
struct Measure {
  std::vector<double> density;

  static Measure reference(const FiltrationTree& tree) { return {std::vector<double>(tree.num_leaves(), 1.0)}; }

  static Measure from_masses(const FiltrationTree& tree, const std::vector<double>& masses) {
    if (masses.size() != tree.num_leaves()) throw Error(Errc::invariant_violation, "one mass per leaf required");
    Measure m;
    m.density.resize(masses.size());
    for (std::size_t k = 0; k < masses.size(); ++k) m.density[k] = masses[k] / tree.leaf_weights()[k];
    return m;
  }

  [[nodiscard]] double leaf_mass(const FiltrationTree& tree, std::size_t leaf) const {
    return density[leaf] * tree.leaf_weights()[leaf];
  }
  [[nodiscard]] std::vector<double> masses(const FiltrationTree& tree) const {
    std::vector<double> m(density.size());
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = leaf_mass(tree, k);
    return m;
  }
  /// Q(atom v).
  [[nodiscard]] double mass(const FiltrationTree& tree, NodeId v) const {
    double s = 0.0;
    for (std::size_t k : tree.leaves_under(v)) s += leaf_mass(tree, k);
    return s;
  }
  [[nodiscard]] bool is_probability(const FiltrationTree& tree, double tol = 1e-9) const {
    if (density.size() != tree.num_leaves()) return false;
    double s = 0.0;
    for (std::size_t k = 0; k < density.size(); ++k) {
      if (density[k] < 0.0) return false;
      s += leaf_mass(tree, k);
    }
    return std::abs(s - 1.0) <= tol;
  }
  [[nodiscard]] bool is_equivalent(double floor = 0.0) const {
    return std::all_of(density.begin(), density.end(), [&](double d) { return d > floor; });
  }
  [[nodiscard]] double expectation(const FiltrationTree& tree, const Claim& x) const {
    const auto v = x.leaf_values(tree);
    double s = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) s += leaf_mass(tree, k) * v[k];
    return s;
  }

  friend bool operator==(const Measure&, const Measure&) = default;
};

/// E_Q(X | F_sigma) atom by atom; atoms of zero Q-mass are left undefined.
inline PartialClaim conditional_expectation(const FiltrationTree& tree, const Measure& q, const Claim& x,
                                            const StoppingTime& sigma) {
  if (!precedes(tree, sigma, x.at))
    throw Error(Errc::precondition_violation, "conditioning stopping time is not before the claim's maturity");
  const auto xv = x.leaf_values(tree);
  PartialClaim out{sigma, std::vector<std::optional<double>>(sigma.size())};
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    double mass = 0.0, num = 0.0;
    for (std::size_t leaf : tree.leaves_under(sigma.cut()[k])) {
      const double m = q.leaf_mass(tree, leaf);
      mass += m;
      num += m * xv[leaf];
    }
    if (mass > 0.0) out.values[k] = num / mass;
  }
  return out;
}

/// Atomwise maximum of claims sharing a stopping time.
inline Claim essential_supremum(std::span<const Claim> claims) {
  if (claims.empty()) throw Error(Errc::empty_list, "essential supremum of an empty family");
  Claim out = claims.front();
  for (const auto& c : claims.subspan(1)) out = combine(out, c, [](double a, double b) { return std::max(a, b); });
  return out;
}

/// Q1 on F_sigma followed by Q2's conditional law after sigma.
inline Measure paste_measures(const FiltrationTree& tree, const Measure& q1, const Measure& q2,
                              const StoppingTime& sigma) {
  Measure out{std::vector<double>(tree.num_leaves(), 0.0)};
  for (NodeId atom : sigma.cut()) {
    const double m1 = q1.mass(tree, atom);
    if (m1 == 0.0) continue;
    const double m2 = q2.mass(tree, atom);
    if (m2 <= 0.0)
      throw Error(Errc::mass_mismatch, "second measure has no conditional law at atom " + std::to_string(atom) +
                                           " which the first measure charges");
    for (std::size_t leaf : tree.leaves_under(atom)) out.density[leaf] = m1 * q2.density[leaf] / m2;
  }
  return out;
}

}  // namespace tcpp
