/**
 * @file family.hpp
 * @brief Explicit dual families: finitely many measures, each given by its
 *        per-node transition kernels, with a penalty attached to every
 *        (node, stopping time, member) triple.
 *
 * A family prices by the dual formula
 *
 *   Pi_{sigma,tau}(X)(n) = max_i ( E_i(X | n) - alpha(n, tau, i) )   for each atom n of sigma,
 *
 * which makes it the natural input for checks that must also accept
 * families that are not rectangular (and so not time consistent).
 */
#pragma once

#include "tcpp/scenario.hpp"
#include "tcpp/tree.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tcpp {

/// Kernel per node (empty at leaves).
using KernelField = std::vector<std::vector<double>>;

/// alpha(n, tau, member): cumulative penalty from atom n down to tau (tau must lie below n).
using PenaltyProcess = std::function<double(NodeId, const StoppingTime&, std::size_t)>;

struct MeasureFamily {
  FiltrationTree tree;
  std::vector<KernelField> members;
  PenaltyProcess penalty;
};

/// E[ sum of step(v) over nodes v strictly between `top` and `tau` ] under `kernels`.
template <class Step>
double expected_step_sum(const FiltrationTree& tree, const KernelField& kernels, NodeId top, const StoppingTime& tau,
                         Step&& step) {
  double total = 0.0;
  std::vector<std::pair<NodeId, double>> stack{{top, 1.0}};
  while (!stack.empty()) {
    const auto [v, m] = stack.back();
    stack.pop_back();
    if (tau.contains(v)) continue;
    if (tree.is_leaf(v)) throw Error(Errc::precondition_violation, "stopping time is not below node " + std::to_string(top));
    total += m * step(v);
    const auto ch = tree.children(v);
    for (std::size_t c = 0; c < ch.size(); ++c)
      if (kernels[v][c] != 0.0) stack.emplace_back(ch[c], m * kernels[v][c]);
  }
  return total;
}

/// Every selection of the model as an explicit member, with its aggregated penalty.
inline MeasureFamily family_from_model(const ScenarioModel& model, std::size_t cap) {
  auto steps = std::make_shared<std::vector<std::vector<double>>>();
  MeasureFamily fam{model.tree(), {}, {}};
  for_each_selection(model, cap, [&](const MeasureSelection& s) {
    KernelField k(model.tree().size());
    std::vector<double> pen(model.tree().size(), 0.0);
    for (NodeId v : model.tree().internal_nodes()) {
      k[v] = model.menu(v)[s.choice[v]].kernel;
      pen[v] = model.menu(v)[s.choice[v]].penalty;
    }
    fam.members.push_back(std::move(k));
    steps->push_back(std::move(pen));
  });
  auto kernels = std::make_shared<std::vector<KernelField>>(fam.members);
  fam.penalty = [tree = model.tree(), kernels, steps](NodeId n, const StoppingTime& tau, std::size_t i) {
    const auto& pen = (*steps)[i];
    return expected_step_sum(tree, (*kernels)[i], n, tau, [&](NodeId v) { return pen[v]; });
  };
  return fam;
}

inline std::vector<double> member_law(const MeasureFamily& fam, std::size_t i, NodeId top, const StoppingTime& tau) {
  const auto& k = fam.members[i];
  return kernel_conditional_law(fam.tree, [&](NodeId v) { return std::span<const double>(k[v]); }, top, tau);
}

/// Dual-formula price of X at sigma: atomwise maximum over members.
inline Claim family_price(const MeasureFamily& fam, const Claim& x, const StoppingTime& sigma) {
  if (fam.members.empty()) throw Error(Errc::empty_list, "family has no members");
  if (!precedes(fam.tree, sigma, x.at)) throw Error(Errc::precondition_violation, "price needs sigma <= maturity");
  std::vector<double> out(sigma.size(), -kInfinity);
  for (std::size_t a = 0; a < sigma.size(); ++a) {
    const NodeId n = sigma.cut()[a];
    for (std::size_t i = 0; i < fam.members.size(); ++i) {
      const auto law = member_law(fam, i, n, x.at);
      double e = 0.0;
      for (std::size_t k = 0; k < law.size(); ++k) e += law[k] * x.values[k];
      out[a] = std::max(out[a], e - fam.penalty(n, x.at, i));
    }
  }
  return {sigma, std::move(out)};
}

/// All cuts of the subtree of `top` that lie at or above `tau`, at most `cap` of them.
inline std::vector<std::vector<NodeId>> local_cuts(const FiltrationTree& tree, NodeId top, const StoppingTime& tau,
                                                   std::size_t cap) {
  std::function<std::vector<std::vector<NodeId>>(NodeId)> rec = [&](NodeId v) {
    std::vector<std::vector<NodeId>> out{{v}};
    if (tau.contains(v)) return out;
    if (tree.is_leaf(v)) throw Error(Errc::precondition_violation, "stopping time is not below node " + std::to_string(top));
    std::vector<std::vector<NodeId>> acc{{}};
    for (NodeId c : tree.children(v)) {
      const auto sub = rec(c);
      if (acc.size() * sub.size() > cap)
        throw Error(Errc::enumeration_overflow, "more than " + std::to_string(cap) + " stopping times to enumerate");
      std::vector<std::vector<NodeId>> next;
      next.reserve(acc.size() * sub.size());
      for (const auto& a : acc)
        for (const auto& s : sub) {
          auto merged = a;
          merged.insert(merged.end(), s.begin(), s.end());
          next.push_back(std::move(merged));
        }
      acc = std::move(next);
    }
    if (acc.size() + 1 > cap)
      throw Error(Errc::enumeration_overflow, "more than " + std::to_string(cap) + " stopping times to enumerate");
    out.insert(out.end(), acc.begin(), acc.end());
    return out;
  };
  return rec(top);
}

/// Every stopping time of the tree (throws enumeration-overflow beyond `cap`).
inline std::vector<StoppingTime> all_stopping_times(const FiltrationTree& tree, std::size_t cap) {
  std::vector<StoppingTime> out;
  for (auto& cut : local_cuts(tree, tree.root(), StoppingTime::terminal(tree), cap))
    out.push_back(StoppingTime::from_cut(tree, std::move(cut)));
  return out;
}

/// Deterministic times plus every cut obtained from one of them by splitting or
/// merging the children of a single node. Small trees get every stopping time.
inline std::vector<StoppingTime> cocycle_generating_set(const FiltrationTree& tree, std::size_t exhaustive_limit = 64) {
  try {
    auto all = all_stopping_times(tree, exhaustive_limit);
    return all;
  } catch (const Error& e) {
    if (e.code() != Errc::enumeration_overflow) throw;
  }
  std::vector<StoppingTime> out;
  auto push = [&](std::vector<NodeId> cut) {
    auto st = StoppingTime::from_cut(tree, std::move(cut));
    for (const auto& s : out)
      if (s == st) return;
    out.push_back(std::move(st));
  };
  for (std::size_t t = 0; t <= tree.horizon(); ++t) {
    const auto level = tree.nodes_at(t);
    push(level);
    if (t == tree.horizon()) continue;
    for (NodeId v : level) {
      std::vector<NodeId> split, merge;
      for (NodeId u : level) {
        if (u == v) {
          for (NodeId c : tree.children(u)) split.push_back(c);
          merge.push_back(u);
        } else {
          split.push_back(u);
          for (NodeId c : tree.children(u)) merge.push_back(c);
        }
      }
      push(std::move(split));
      push(std::move(merge));
    }
  }
  return out;
}

/// alpha(n, tau) = alpha(n, sigma) + E_i( alpha(., tau) at sigma | n ) for all nu <= sigma <= tau in `times`
/// and every atom n of nu and every member.
inline CheckReport check_cocycle(const MeasureFamily& fam, std::span<const StoppingTime> times, double tol = 1e-9) {
  CheckReport report;
  const auto& tree = fam.tree;
  for (const auto& nu : times)
    for (const auto& sigma : times) {
      if (!precedes(tree, nu, sigma)) continue;
      for (const auto& tau : times) {
        if (!precedes(tree, sigma, tau)) continue;
        for (NodeId n : nu.cut())
          for (std::size_t i = 0; i < fam.members.size(); ++i) {
            ++report.cases;
            const double lhs = fam.penalty(n, tau, i);
            const auto law = member_law(fam, i, n, sigma);
            double rhs = fam.penalty(n, sigma, i);
            for (std::size_t k = 0; k < sigma.size(); ++k)
              if (law[k] != 0.0) rhs += law[k] * fam.penalty(sigma.cut()[k], tau, i);
            const double defect = std::abs(lhs - rhs);
            if (defect > tol)
              report.add("cocycle", "node " + std::to_string(n), defect,
                         "member " + std::to_string(i) + ", nu=" + nu.describe() + " sigma=" + sigma.describe() +
                             " tau=" + tau.describe() + ": alpha(nu,tau)=" + std::to_string(lhs) +
                             " but alpha(nu,sigma)+E[alpha(sigma,tau)]=" + std::to_string(rhs));
          }
      }
    }
  return report;
}

inline CheckReport check_cocycle(const MeasureFamily& fam, double tol = 1e-9) {
  const auto times = cocycle_generating_set(fam.tree);
  return check_cocycle(fam, times, tol);
}

}  // namespace tcpp
