/**
 * @file scenario.hpp
 * @brief Rectangular scenario models: the computational form of a time-consistent
 *        pricing procedure on a finite tree.
 *
 * Every internal node carries a finite menu of (transition kernel, one-step
 * penalty) entries. A selection picks one entry per node; its measure is the
 * product of the chosen kernels along each path and its penalty between two
 * stopping times is the expected sum of the chosen one-step penalties. Because
 * the per-node choices are independent the family is stable under pasting and
 * the aggregated penalties satisfy the cocycle identity by construction.
 *
 * Mixtures of selections are represented by "flows": a weight w(v, e) >= 0
 * per node and entry with sum_e w(v, e) equal to the mass reaching v. Every
 * mixture induces a flow and every flow is realized by a mixture (choose the
 * entry at v with probability w(v, e) / mass(v), independently per node), with
 * the same leaf law and the same expected penalty. This keeps the conjugate
 * and no-free-lunch programs polynomial in the tree size.
 */
#pragma once

#include "tcpp/error.hpp"
#include "tcpp/lp.hpp"
#include "tcpp/tree.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tcpp {

struct MenuEntry {
  std::vector<double> kernel;  ///< probability per child, in child order
  double penalty = 0.0;

  friend bool operator==(const MenuEntry&, const MenuEntry&) = default;
};

class ScenarioModel {
 public:
  /// `menus[v]` must be nonempty for internal nodes and empty for leaves.
  /// Penalty normalization (nonnegative, zero minimum per node) is not enforced
  /// here; `normalization_report()` and the axiom checks diagnose it.
  ScenarioModel(FiltrationTree tree, std::vector<std::vector<MenuEntry>> menus)
      : tree_(std::move(tree)), menus_(std::move(menus)) {
    if (menus_.size() != tree_.size())
      throw Error(Errc::invalid_model, "menus must be given for every node (empty for leaves)");
    for (NodeId v = 0; v < tree_.size(); ++v) {
      const auto where = "node " + std::to_string(v);
      if (tree_.is_leaf(v)) {
        if (!menus_[v].empty()) throw Error(Errc::invalid_model, where + " is a leaf but has a menu");
        continue;
      }
      if (menus_[v].empty()) throw Error(Errc::invalid_model, where + " has an empty menu");
      for (std::size_t e = 0; e < menus_[v].size(); ++e) {
        const auto& entry = menus_[v][e];
        const auto at = where + " entry " + std::to_string(e);
        if (entry.kernel.size() != tree_.children(v).size())
          throw Error(Errc::invalid_model, at + ": kernel has " + std::to_string(entry.kernel.size()) +
                                               " components for " + std::to_string(tree_.children(v).size()) +
                                               " children");
        double sum = 0.0;
        for (double q : entry.kernel) {
          if (!(q >= 0.0) || !std::isfinite(q)) throw Error(Errc::invalid_model, at + ": negative kernel component");
          sum += q;
        }
        if (std::abs(sum - 1.0) > 1e-9)
          throw Error(Errc::invalid_model, at + ": kernel sums to " + std::to_string(sum));
        if (!std::isfinite(entry.penalty)) throw Error(Errc::invalid_model, at + ": penalty is not finite");
      }
    }
  }

  /// P's own kernels at zero penalty: the linear procedure E_P.
  static ScenarioModel reference(const FiltrationTree& tree) {
    std::vector<std::vector<MenuEntry>> menus(tree.size());
    for (NodeId v : tree.internal_nodes()) menus[v].push_back({tree.reference_kernel(v), 0.0});
    return {tree, std::move(menus)};
  }

  [[nodiscard]] const FiltrationTree& tree() const { return tree_; }
  [[nodiscard]] std::span<const MenuEntry> menu(NodeId v) const { return menus_.at(v); }
  [[nodiscard]] const std::vector<std::vector<MenuEntry>>& menus() const { return menus_; }

  /// Nodes whose menu has a negative penalty or no zero-penalty entry.
  [[nodiscard]] CheckReport normalization_report(double tol = 1e-12) const {
    CheckReport r;
    for (NodeId v : tree_.internal_nodes()) {
      ++r.cases;
      double lo = std::numeric_limits<double>::infinity();
      for (const auto& e : menus_[v]) lo = std::min(lo, e.penalty);
      if (lo < -tol)
        r.add("normalization", "node " + std::to_string(v), -lo, "negative penalty " + std::to_string(lo));
      else if (lo > tol)
        r.add("normalization", "node " + std::to_string(v), lo, "no zero-penalty entry; minimum is " + std::to_string(lo));
    }
    return r;
  }

  [[nodiscard]] bool is_normalized(double tol = 1e-12) const { return normalization_report(tol).passed(); }

  [[nodiscard]] bool all_penalties_zero() const {
    for (const auto& m : menus_)
      for (const auto& e : m)
        if (e.penalty != 0.0) return false;
    return true;
  }

  /// Number of selections, saturating at `cap + 1`.
  [[nodiscard]] std::size_t selection_count(std::size_t cap) const {
    std::size_t count = 1;
    for (const auto& m : menus_) {
      if (m.empty()) continue;
      if (count > (cap + 1) / m.size()) return cap + 1;
      count *= m.size();
    }
    return count;
  }

  friend bool operator==(const ScenarioModel& a, const ScenarioModel& b) {
    return a.tree_ == b.tree_ && a.menus_ == b.menus_;
  }

 private:
  FiltrationTree tree_;
  std::vector<std::vector<MenuEntry>> menus_;
};

/// One menu index per node (ignored at leaves): an element of the stable set.
struct MeasureSelection {
  std::vector<std::size_t> choice;

  friend bool operator==(const MeasureSelection&, const MeasureSelection&) = default;
};

inline void validate_selection(const ScenarioModel& model, const MeasureSelection& sel) {
  if (sel.choice.size() != model.tree().size())
    throw Error(Errc::precondition_violation, "selection must have one entry per node");
  for (NodeId v : model.tree().internal_nodes())
    if (sel.choice[v] >= model.menu(v).size())
      throw Error(Errc::precondition_violation, "selection index out of range at node " + std::to_string(v));
}

/// Calls f(selection) for every selection restricted to `nodes` (other entries stay 0).
template <class F>
void for_each_selection_on(const ScenarioModel& model, std::span<const NodeId> nodes, std::size_t cap, F&& f) {
  std::size_t count = 1;
  for (NodeId v : nodes) {
    const std::size_t m = model.menu(v).size();
    if (count > cap / m)
      throw Error(Errc::enumeration_overflow, "more than " + std::to_string(cap) + " selections to enumerate");
    count *= m;
  }
  MeasureSelection sel{std::vector<std::size_t>(model.tree().size(), 0)};
  for (;;) {
    f(static_cast<const MeasureSelection&>(sel));
    std::size_t k = 0;
    for (; k < nodes.size(); ++k) {
      if (++sel.choice[nodes[k]] < model.menu(nodes[k]).size()) break;
      sel.choice[nodes[k]] = 0;
    }
    if (k == nodes.size()) return;
  }
}

template <class F>
void for_each_selection(const ScenarioModel& model, std::size_t cap, F&& f) {
  const auto nodes = model.tree().internal_nodes();
  for_each_selection_on(model, nodes, cap, std::forward<F>(f));
}

/// Nodes strictly above `tau` inside the subtree of `top` (the decision nodes between them).
inline std::vector<NodeId> nodes_between(const FiltrationTree& tree, NodeId top, const StoppingTime& tau) {
  std::vector<NodeId> out;
  std::vector<NodeId> stack{top};
  while (!stack.empty()) {
    const NodeId v = stack.back();
    stack.pop_back();
    if (tau.contains(v)) continue;
    if (tree.is_leaf(v))
      throw Error(Errc::precondition_violation, "stopping time does not lie below node " + std::to_string(top));
    out.push_back(v);
    for (NodeId c : tree.children(v)) stack.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::span<const double> selected_kernel(const ScenarioModel& model, const MeasureSelection& sel, NodeId v) {
  return model.menu(v)[sel.choice[v]].kernel;
}

/// Leaf densities of the product-of-kernels measure.
inline Measure selection_to_measure(const ScenarioModel& model, const MeasureSelection& sel) {
  validate_selection(model, sel);
  const auto& tree = model.tree();
  std::vector<double> node_mass(tree.size(), 0.0);
  node_mass[tree.root()] = 1.0;
  for (NodeId v : tree.topological_order()) {
    if (tree.is_leaf(v)) continue;
    const auto k = selected_kernel(model, sel, v);
    const auto ch = tree.children(v);
    for (std::size_t c = 0; c < ch.size(); ++c) node_mass[ch[c]] = node_mass[v] * k[c];
  }
  std::vector<double> masses(tree.num_leaves());
  for (std::size_t k = 0; k < masses.size(); ++k) masses[k] = node_mass[tree.leaves()[k]];
  return Measure::from_masses(tree, masses);
}

/// Conditional law at node `top` over the atoms of `tau` below it, using per-node kernels.
/// Returned vector is aligned with tau.cut() (zero outside the subtree of top).
template <class KernelOf>
std::vector<double> kernel_conditional_law(const FiltrationTree& tree, KernelOf&& kernel_of, NodeId top,
                                           const StoppingTime& tau) {
  std::vector<double> law(tau.size(), 0.0);
  std::vector<std::pair<NodeId, double>> stack{{top, 1.0}};
  while (!stack.empty()) {
    const auto [v, m] = stack.back();
    stack.pop_back();
    if (tau.contains(v)) {
      law[tau.slot(v)] += m;
      continue;
    }
    if (tree.is_leaf(v)) throw Error(Errc::precondition_violation, "stopping time is not below node " + std::to_string(top));
    const auto ch = tree.children(v);
    const auto k = kernel_of(v);
    for (std::size_t c = 0; c < ch.size(); ++c)
      if (k[c] != 0.0) stack.emplace_back(ch[c], m * k[c]);
  }
  return law;
}

/// Kernel-based E(X | node top); defined at every node, also off the support.
template <class KernelOf>
double kernel_expectation(const FiltrationTree& tree, KernelOf&& kernel_of, const Claim& x, NodeId top) {
  const auto law = kernel_conditional_law(tree, kernel_of, top, x.at);
  double s = 0.0;
  for (std::size_t k = 0; k < law.size(); ++k) s += law[k] * x.values[k];
  return s;
}

/// Cumulative penalty alpha_{nu,tau}(Q) of a selection: expected sum of the chosen
/// one-step penalties at decision nodes between nu and tau, conditioned on each nu atom.
inline Claim aggregate_penalty(const ScenarioModel& model, const MeasureSelection& sel, const StoppingTime& nu,
                               const StoppingTime& tau) {
  validate_selection(model, sel);
  const auto& tree = model.tree();
  if (!precedes(tree, nu, tau)) throw Error(Errc::precondition_violation, "aggregate_penalty needs nu <= tau");
  std::vector<double> g(tree.size(), 0.0);
  // Children before parents: g(v) = penalty(v) + sum_c q_c g(c) above tau, 0 on tau.
  auto order = tree.topological_order();
  std::vector<bool> below_tau(tree.size(), false);
  for (NodeId v : order) {
    const auto p = tree.parent(v);
    below_tau[v] = tau.contains(v) || (p && below_tau[*p]);
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeId v = *it;
    if (below_tau[v]) continue;
    const auto& entry = model.menu(v)[sel.choice[v]];
    double s = entry.penalty;
    const auto ch = tree.children(v);
    for (std::size_t c = 0; c < ch.size(); ++c) s += entry.kernel[c] * g[ch[c]];
    g[v] = s;
  }
  std::vector<double> out(nu.size());
  for (std::size_t k = 0; k < nu.size(); ++k) out[k] = g[nu.cut()[k]];
  return {nu, std::move(out)};
}

/// Mixture-of-selections polytope from `top` down to `tau`, expressed through flow weights.
struct FlowPolytope {
  lp::LinearProgram program;
  std::vector<std::vector<std::size_t>> weight;  ///< weight[v][e]: variable index or npos
  std::vector<NodeId> decision_nodes;

  /// Linear form of the mass reaching atom `c` of tau (c must be strictly below top).
  [[nodiscard]] std::vector<std::pair<std::size_t, double>> mass_terms(const ScenarioModel& model, NodeId c) const {
    const auto& tree = model.tree();
    const NodeId p = *tree.parent(c);
    const std::size_t pos = tree.child_position(c);
    std::vector<std::pair<std::size_t, double>> terms;
    for (std::size_t e = 0; e < weight[p].size(); ++e)
      if (weight[p][e] != npos) terms.emplace_back(weight[p][e], model.menu(p)[e].kernel[pos]);
    return terms;
  }
};

/// Builds the flow constraints; `allowed(v, e)` filters menu entries, `cost(v, e)` sets the objective.
template <class Allowed, class Cost>
FlowPolytope build_flow_polytope(const ScenarioModel& model, NodeId top, const StoppingTime& tau, Allowed&& allowed,
                                 Cost&& cost, lp::Sense sense = lp::Sense::minimize) {
  const auto& tree = model.tree();
  FlowPolytope fp;
  fp.program = lp::LinearProgram(0, sense);
  fp.weight.assign(tree.size(), {});
  fp.decision_nodes = nodes_between(tree, top, tau);
  for (NodeId v : fp.decision_nodes) {
    fp.weight[v].assign(model.menu(v).size(), npos);
    for (std::size_t e = 0; e < model.menu(v).size(); ++e)
      if (allowed(v, e)) fp.weight[v][e] = fp.program.add_variable(cost(v, e));
  }
  for (NodeId v : fp.decision_nodes) {
    std::vector<std::pair<std::size_t, double>> terms;
    for (std::size_t idx : fp.weight[v])
      if (idx != npos) terms.emplace_back(idx, 1.0);
    if (v == top) {
      fp.program.add_constraint(terms, lp::Relation::equal, 1.0);
    } else {
      for (auto [idx, a] : fp.mass_terms(model, v)) terms.emplace_back(idx, -a);
      fp.program.add_constraint(terms, lp::Relation::equal, 0.0);
    }
  }
  return fp;
}

/// Conjugate of Pi_{top,tau} at one conditional law (aligned with tau.cut(), supported below top).
/// +infinity when the law is outside the convex hull of the menu-generated laws.
inline double minimal_penalty_at(const ScenarioModel& model, NodeId top, const StoppingTime& tau,
                                 const std::vector<double>& law, const NumericSettings& settings = {}) {
  const auto& tree = model.tree();
  if (law.size() != tau.size()) throw Error(Errc::precondition_violation, "law must be aligned with the stopping time");
  if (tau.contains(top)) return std::abs(law[tau.slot(top)] - 1.0) <= settings.feasibility_tol ? 0.0 : kInfinity;
  auto fp = build_flow_polytope(
      model, top, tau, [](NodeId, std::size_t) { return true; },
      [&](NodeId v, std::size_t e) { return model.menu(v)[e].penalty; });
  for (std::size_t k = 0; k < tau.size(); ++k) {
    const NodeId c = tau.cut()[k];
    if (!tree.is_ancestor_or_self(top, c)) {
      if (law[k] > settings.feasibility_tol) return kInfinity;
      continue;
    }
    fp.program.add_constraint(fp.mass_terms(model, c), lp::Relation::equal, law[k]);
  }
  const auto sol = lp::solve(fp.program, settings);
  if (sol.status != lp::Status::optimal) return kInfinity;
  return sol.value;
}

/// alpha^m_{sigma,tau}(R) per sigma atom; undefined on R-null atoms.
inline PartialClaim minimal_penalty(const ScenarioModel& model, const Measure& r, const StoppingTime& sigma,
                                    const StoppingTime& tau, const NumericSettings& settings = {}) {
  const auto& tree = model.tree();
  if (!precedes(tree, sigma, tau)) throw Error(Errc::precondition_violation, "minimal_penalty needs sigma <= tau");
  PartialClaim out{sigma, std::vector<std::optional<double>>(sigma.size())};
  for (std::size_t a = 0; a < sigma.size(); ++a) {
    const NodeId top = sigma.cut()[a];
    const double m = r.mass(tree, top);
    if (!(m > 0.0)) continue;
    std::vector<double> law(tau.size(), 0.0);
    for (std::size_t k = 0; k < tau.size(); ++k)
      if (tree.is_ancestor_or_self(top, tau.cut()[k])) law[k] = r.mass(tree, tau.cut()[k]) / m;
    out.values[a] = minimal_penalty_at(model, top, tau, law, settings);
  }
  return out;
}

/// Every leaf must be charged by at least one selection; reports the top of each dead subtree.
inline CheckReport check_nondegenerate(const ScenarioModel& model) {
  const auto& tree = model.tree();
  CheckReport r;
  std::vector<bool> charged(tree.size(), false);
  charged[tree.root()] = true;
  for (NodeId v : tree.topological_order()) {
    if (tree.is_leaf(v) || !charged[v]) continue;
    const auto ch = tree.children(v);
    for (std::size_t c = 0; c < ch.size(); ++c) {
      ++r.cases;
      for (const auto& e : model.menu(v))
        if (e.kernel[c] > 0.0) charged[ch[c]] = true;
      if (!charged[ch[c]])
        r.add("non-degeneracy", "node " + std::to_string(ch[c]), tree.mass(ch[c]),
              "every menu entry at node " + std::to_string(v) + " kills child " + std::to_string(ch[c]) +
                  "; its subtree has P-mass " + std::to_string(tree.mass(ch[c])));
    }
  }
  return r;
}

/// The model with each menu restricted to its zero-penalty entries.
inline ScenarioModel zero_penalty_submodel(const ScenarioModel& model, double tol = 1e-12) {
  std::vector<std::vector<MenuEntry>> menus(model.tree().size());
  for (NodeId v : model.tree().internal_nodes()) {
    for (const auto& e : model.menu(v))
      if (std::abs(e.penalty) <= tol) menus[v].push_back({e.kernel, 0.0});
    if (menus[v].empty())
      throw Error(Errc::invalid_model, "node " + std::to_string(v) + " has no zero-penalty entry (model not normalized)");
  }
  return {model.tree(), std::move(menus)};
}

}  // namespace tcpp
