/**
 * @file pricing.hpp
 * @brief Backward-induction pricing for scenario models, the enumerated dual
 *        formula used as its oracle, and the property checks (axioms,
 *        sublinearity, time consistency, supermartingale sandwich, American
 *        claims).
 *
 * Checks that make sense for arbitrary procedures are templates over an
 * evaluator: any callable `(const Claim& x, const StoppingTime& sigma) -> Claim`.
 */
#pragma once

#include "tcpp/family.hpp"
#include "tcpp/lp.hpp"
#include "tcpp/random.hpp"
#include "tcpp/scenario.hpp"
#include "tcpp/tree.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace tcpp {

struct PriceDetail {
  Claim value;                      ///< at sigma
  std::vector<double> node_value;   ///< per node between sigma and the maturity, NaN elsewhere
  std::vector<std::size_t> choice;  ///< maximizing menu entry per decision node (lowest index on ties), npos elsewhere
};

inline PriceDetail price_detailed(const ScenarioModel& model, const Claim& x, const StoppingTime& sigma) {
  const auto& tree = model.tree();
  if (!precedes(tree, sigma, x.at)) throw Error(Errc::precondition_violation, "price needs sigma <= maturity of X");
  PriceDetail d;
  d.node_value.assign(tree.size(), std::numeric_limits<double>::quiet_NaN());
  d.choice.assign(tree.size(), npos);
  std::vector<NodeId> region;
  for (NodeId a : sigma.cut()) {
    std::vector<NodeId> stack{a};
    while (!stack.empty()) {
      const NodeId v = stack.back();
      stack.pop_back();
      region.push_back(v);
      if (x.at.contains(v)) continue;
      for (NodeId c : tree.children(v)) stack.push_back(c);
    }
  }
  std::sort(region.begin(), region.end(), [&](NodeId a, NodeId b) { return tree.time(a) > tree.time(b); });
  for (NodeId v : region) {
    if (x.at.contains(v)) {
      d.node_value[v] = x.at_node(v);
      continue;
    }
    const auto ch = tree.children(v);
    const auto menu = model.menu(v);
    double best = -kInfinity;
    for (std::size_t e = 0; e < menu.size(); ++e) {
      double s = -menu[e].penalty;
      for (std::size_t c = 0; c < ch.size(); ++c)
        if (menu[e].kernel[c] != 0.0) s += menu[e].kernel[c] * d.node_value[ch[c]];
      if (s > best) {
        best = s;
        d.choice[v] = e;
      }
    }
    d.node_value[v] = best;
  }
  std::vector<double> out(sigma.size());
  for (std::size_t k = 0; k < sigma.size(); ++k) out[k] = d.node_value[sigma.cut()[k]];
  d.value = Claim(sigma, std::move(out));
  return d;
}

/// Ask price Pi_{sigma, X.at}(X).
inline Claim price(const ScenarioModel& model, const Claim& x, const StoppingTime& sigma) {
  return price_detailed(model, x, sigma).value;
}

struct BidAsk {
  Claim bid;
  Claim ask;
};

inline BidAsk bid_ask(const ScenarioModel& model, const Claim& x, const StoppingTime& sigma) {
  return {-price(model, -x, sigma), price(model, x, sigma)};
}

/// Dual formula evaluated by enumerating every selection below each atom of sigma.
inline Claim enumerated_price(const ScenarioModel& model, const Claim& x, const StoppingTime& sigma,
                              std::size_t cap) {
  const auto& tree = model.tree();
  if (!precedes(tree, sigma, x.at)) throw Error(Errc::precondition_violation, "price needs sigma <= maturity of X");
  std::vector<double> out(sigma.size(), -kInfinity);
  for (std::size_t a = 0; a < sigma.size(); ++a) {
    const NodeId n = sigma.cut()[a];
    const auto nodes = nodes_between(tree, n, x.at);
    for_each_selection_on(model, nodes, cap, [&](const MeasureSelection& s) {
      KernelField k(tree.size());
      for (NodeId v : nodes) k[v] = model.menu(v)[s.choice[v]].kernel;
      const double e = kernel_expectation(tree, [&](NodeId v) { return std::span<const double>(k[v]); }, x, n);
      const double pen = expected_step_sum(tree, k, n, x.at,
                                           [&](NodeId v) { return model.menu(v)[s.choice[v]].penalty; });
      out[a] = std::max(out[a], e - pen);
    });
  }
  return {sigma, std::move(out)};
}

/// Prices through a supplied penalty in place of the model's own (dual formula over all selections).
/// With `minimal_penalty` as the supplied penalty this is the bidual of the procedure.
template <class PenaltyOf>
Claim price_with_penalty(const ScenarioModel& model, const Claim& x, const StoppingTime& sigma, std::size_t cap,
                         PenaltyOf&& penalty_of) {
  const auto& tree = model.tree();
  std::vector<double> out(sigma.size(), -kInfinity);
  for (std::size_t a = 0; a < sigma.size(); ++a) {
    const NodeId n = sigma.cut()[a];
    const auto nodes = nodes_between(tree, n, x.at);
    for_each_selection_on(model, nodes, cap, [&](const MeasureSelection& s) {
      auto kernel_of = [&](NodeId v) { return selected_kernel(model, s, v); };
      const auto law = kernel_conditional_law(tree, kernel_of, n, x.at);
      double e = 0.0;
      for (std::size_t k = 0; k < law.size(); ++k) e += law[k] * x.values[k];
      out[a] = std::max(out[a], e - penalty_of(n, law));
    });
  }
  return {sigma, std::move(out)};
}

// ---------------------------------------------------------------------------
// Axioms

struct AxiomSample {
  Claim x;
  Claim y;
  StoppingTime sigma;
  Claim z;  ///< F_sigma-measurable shift
};

inline std::vector<AxiomSample> sample_axiom_cases(const FiltrationTree& tree, Rng& rng, std::size_t count,
                                                   double magnitude = 1.0) {
  std::vector<AxiomSample> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto tau = random_stopping_time(tree, rng, 0.3);
    const auto sigma = random_stopping_time_between(tree, StoppingTime::root(tree), tau, rng);
    out.push_back({random_claim(tau, rng, -magnitude, magnitude), random_claim(tau, rng, -magnitude, magnitude), sigma,
                   random_claim(sigma, rng, -magnitude, magnitude)});
  }
  return out;
}

namespace detail {

inline std::string values_string(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(12);
  os << "(";
  for (std::size_t k = 0; k < v.size(); ++k) os << (k ? ", " : "") << v[k];
  os << ")";
  return os.str();
}

}  // namespace detail

/// Monotonicity, translation invariance, convexity (at each lambda) and normalization.
template <class Evaluator>
CheckReport check_axioms(Evaluator&& eval, const FiltrationTree& tree, std::span<const AxiomSample> samples,
                         std::span<const double> lambdas, double tol = 1e-12) {
  CheckReport r;
  auto compare = [&](const char* what, std::size_t s, const StoppingTime& sigma, const std::vector<double>& lhs,
                     const std::vector<double>& rhs, bool equality, const std::string& claim) {
    for (std::size_t k = 0; k < lhs.size(); ++k) {
      ++r.cases;
      const double defect = equality ? std::abs(lhs[k] - rhs[k]) : lhs[k] - rhs[k];
      if (defect > tol)
        r.add(what, "sample " + std::to_string(s) + ", node " + std::to_string(sigma.cut()[k]), defect,
              claim + ": " + std::to_string(lhs[k]) + (equality ? " != " : " > ") + std::to_string(rhs[k]));
    }
  };
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& c = samples[s];
    const auto px = eval(c.x, c.sigma);
    const auto py = eval(c.y, c.sigma);
    const auto xs = "X=" + detail::values_string(c.x.values);

    const auto hi = combine(c.x, c.y, [](double a, double b) { return std::max(a, b); });
    const auto phi = eval(hi, c.sigma);
    compare("monotonicity", s, c.sigma, px.values, phi.values, false, xs + " <= max(X,Y)");
    compare("monotonicity", s, c.sigma, py.values, phi.values, false, "Y <= max(X,Y)");

    const auto shifted = eval(c.x + c.z.lifted_to(tree, c.x.at), c.sigma);
    compare("translation", s, c.sigma, shifted.values, (px + c.z).values, true, xs + ", Z=" + detail::values_string(c.z.values));

    for (double lam : lambdas) {
      const auto mix = eval(lam * c.x + (1.0 - lam) * c.y, c.sigma);
      compare("convexity", s, c.sigma, mix.values, (lam * px + (1.0 - lam) * py).values, false,
              xs + ", lambda=" + std::to_string(lam));
    }

    const auto zero = eval(Claim::constant(c.x.at, 0.0), c.sigma);
    compare("normalization", s, c.sigma, zero.values, std::vector<double>(c.sigma.size(), 0.0), true, "X=0");
  }
  return r;
}

inline CheckReport check_axioms(const ScenarioModel& model, std::span<const AxiomSample> samples,
                                std::span<const double> lambdas, double tol = 1e-12) {
  return check_axioms([&](const Claim& x, const StoppingTime& s) { return price(model, x, s); }, model.tree(), samples,
                      lambdas, tol);
}

// ---------------------------------------------------------------------------
// Sublinearity

struct SublinearWitness {
  NodeId node = 0;
  Claim x;  ///< at the deterministic time after `node`, supported on its children
  StoppingTime sigma;
  std::vector<double> lambdas;
  std::vector<double> scaled_price;       ///< Pi(lambda X) at node
  std::vector<double> price_times_lambda; ///< lambda Pi(X) at node
};

struct SublinearReport {
  bool sublinear = false;
  std::optional<SublinearWitness> witness;
  double max_sampled_defect = 0.0;  ///< max |Pi(lambda X) - lambda Pi(X)| over random samples
  std::size_t samples = 0;
};

/// Structural answer (all penalties zero) with a constructed witness of strict
/// superlinearity when some positive-penalty entry can be made the unique maximizer.
inline SublinearReport check_sublinear(const ScenarioModel& model, Rng& rng, std::size_t samples = 100,
                                       const NumericSettings& settings = {}) {
  const auto& tree = model.tree();
  SublinearReport rep;
  rep.sublinear = model.all_penalties_zero();
  const std::vector<double> lambdas{2.0, 5.0, 17.0};

  for (std::size_t s = 0; s < samples; ++s) {
    const auto tau = random_stopping_time(tree, rng, 0.3);
    const auto sigma = random_stopping_time_between(tree, StoppingTime::root(tree), tau, rng);
    const auto x = random_claim(tau, rng);
    const auto px = price(model, x, sigma);
    for (double lam : lambdas) {
      const auto pl = price(model, lam * x, sigma);
      for (std::size_t k = 0; k < pl.values.size(); ++k)
        rep.max_sampled_defect = std::max(rep.max_sampled_defect, std::abs(pl.values[k] - lam * px.values[k]));
      ++rep.samples;
    }
  }
  if (rep.sublinear) return rep;

  for (NodeId n : tree.internal_nodes()) {
    const auto menu = model.menu(n);
    const std::size_t b = tree.children(n).size();
    for (std::size_t star = 0; star < menu.size() && !rep.witness; ++star) {
      if (!(menu[star].penalty > 0.0)) continue;
      // maximize t s.t. (q* - q_e) x - t >= p* - p_e for e != *, x in [-1, 1]^b, t <= 1
      lp::LinearProgram p(b + 1, lp::Sense::maximize);
      p.objective[b] = 1.0;
      for (std::size_t c = 0; c < b; ++c) p.lower[c] = -1.0, p.upper[c] = 1.0;
      p.lower[b] = -kInfinity;
      p.upper[b] = 1.0;
      for (std::size_t e = 0; e < menu.size(); ++e) {
        if (e == star) continue;
        std::vector<double> row(b + 1);
        for (std::size_t c = 0; c < b; ++c) row[c] = menu[star].kernel[c] - menu[e].kernel[c];
        row[b] = -1.0;
        p.add_constraint(row, lp::Relation::greater_equal, menu[star].penalty - menu[e].penalty);
      }
      const auto sol = lp::solve(p, settings);
      if (sol.status != lp::Status::optimal || sol.value <= 1e-9) continue;

      SublinearWitness w;
      w.node = n;
      w.sigma = StoppingTime::at_time(tree, tree.time(n));
      const auto later = StoppingTime::at_time(tree, tree.time(n) + 1);
      std::vector<double> xv(later.size(), 0.0);
      for (std::size_t c = 0; c < b; ++c) xv[later.slot(tree.children(n)[c])] = sol.point[c];
      w.x = Claim(later, std::move(xv));
      const double base = price(model, w.x, w.sigma).at_node(n);
      bool strict = true;
      for (double lam : lambdas) {
        const double scaled = price(model, lam * w.x, w.sigma).at_node(n);
        w.lambdas.push_back(lam);
        w.scaled_price.push_back(scaled);
        w.price_times_lambda.push_back(lam * base);
        strict = strict && scaled > lam * base;
      }
      if (strict) rep.witness = std::move(w);
    }
    if (rep.witness) break;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Time consistency

struct StoppingChain {
  StoppingTime nu;
  StoppingTime sigma;
  StoppingTime tau;
};

/// Every deterministic triple s <= t <= u plus `random_count` chains whose middle time is random.
inline std::vector<StoppingChain> default_chains(const FiltrationTree& tree, Rng& rng, std::size_t random_count) {
  std::vector<StoppingChain> out;
  const std::size_t T = tree.horizon();
  for (std::size_t s = 0; s <= T; ++s)
    for (std::size_t t = s; t <= T; ++t)
      for (std::size_t u = t; u <= T; ++u)
        out.push_back({StoppingTime::at_time(tree, s), StoppingTime::at_time(tree, t), StoppingTime::at_time(tree, u)});
  for (std::size_t k = 0; k < random_count; ++k) {
    const auto tau = random_stopping_time(tree, rng, 0.2);
    const auto sigma = random_stopping_time_between(tree, StoppingTime::root(tree), tau, rng, 0.4);
    const auto nu = random_stopping_time_between(tree, StoppingTime::root(tree), sigma, rng, 0.5);
    out.push_back({nu, sigma, tau});
  }
  return out;
}

/// Pi_{nu,sigma}(Pi_{sigma,tau}(X)) == Pi_{nu,tau}(X) on `claims_per_chain` random claims per chain.
template <class Evaluator>
CheckReport check_time_consistency(Evaluator&& eval, const FiltrationTree& tree, std::span<const StoppingChain> chains,
                                   Rng& rng, std::size_t claims_per_chain, double tol = 1e-9,
                                   std::span<const Claim> extra_terminal_claims = {}) {
  CheckReport r;
  auto run = [&](const StoppingChain& ch, const Claim& x) {
    const auto inner = eval(x, ch.sigma);
    const auto composed = eval(inner, ch.nu);
    const auto direct = eval(x, ch.nu);
    for (std::size_t k = 0; k < direct.values.size(); ++k) {
      ++r.cases;
      const double defect = std::abs(composed.values[k] - direct.values[k]);
      if (defect > tol)
        r.add("time-consistency", "node " + std::to_string(ch.nu.cut()[k]), defect,
              "nu=" + ch.nu.describe() + " sigma=" + ch.sigma.describe() + " tau=" + ch.tau.describe() +
                  " X=" + detail::values_string(x.values) + ": composed " + std::to_string(composed.values[k]) +
                  " vs direct " + std::to_string(direct.values[k]));
    }
  };
  for (const auto& ch : chains) {
    if (!precedes(tree, ch.nu, ch.sigma) || !precedes(tree, ch.sigma, ch.tau))
      throw Error(Errc::precondition_violation, "chain is not ordered nu <= sigma <= tau");
    for (std::size_t k = 0; k < claims_per_chain; ++k) run(ch, random_claim(ch.tau, rng));
    for (const auto& x : extra_terminal_claims)
      if (x.at == ch.tau) run(ch, x);
  }
  return r;
}

inline CheckReport check_time_consistency(const ScenarioModel& model, std::span<const StoppingChain> chains, Rng& rng,
                                          std::size_t claims_per_chain, double tol = 1e-9) {
  return check_time_consistency([&](const Claim& x, const StoppingTime& s) { return price(model, x, s); },
                                model.tree(), chains, rng, claims_per_chain, tol);
}

// ---------------------------------------------------------------------------
// Supermartingale sandwich

/// For R equivalent with zero minimal penalty: bid <= E_R(X | F_sigma) <= ask at every sigma in `times`,
/// ask is a one-step R-supermartingale and bid a one-step R-submartingale.
inline CheckReport check_supermartingale(const ScenarioModel& model, std::span<const Claim> claims, const Measure& r,
                                         std::span<const StoppingTime> times, const NumericSettings& settings = {}) {
  const auto& tree = model.tree();
  CheckReport rep;
  const auto root = StoppingTime::root(tree), term = StoppingTime::terminal(tree);
  if (!r.is_probability(tree) || !r.is_equivalent(settings.positivity_floor)) {
    rep.add("precondition", "measure", 0.0, "R is not a probability measure equivalent to P");
    return rep;
  }
  const double alpha = *minimal_penalty(model, r, root, term, settings).values[0];
  if (!(alpha <= settings.check_tol)) {
    rep.add("precondition", "measure", alpha, "R has positive minimal penalty " + std::to_string(alpha));
    return rep;
  }
  const double tol = settings.check_tol;
  for (std::size_t j = 0; j < claims.size(); ++j) {
    const auto& x = claims[j];
    const auto ask = price_detailed(model, x, root).node_value;
    const auto bid_neg = price_detailed(model, -x, root).node_value;
    for (NodeId v = 0; v < tree.size(); ++v) {
      if (std::isnan(ask[v]) || x.at.contains(v)) continue;
      double e_ask = 0.0, e_bid = 0.0;
      for (NodeId c : tree.children(v)) {
        const double w = r.mass(tree, c) / r.mass(tree, v);
        e_ask += w * ask[c];
        e_bid += w * -bid_neg[c];
      }
      rep.cases += 2;
      if (e_ask > ask[v] + tol)
        rep.add("supermartingale", "claim " + std::to_string(j) + ", node " + std::to_string(v), e_ask - ask[v],
                "E_R(ask next) = " + std::to_string(e_ask) + " > ask = " + std::to_string(ask[v]));
      if (e_bid < -bid_neg[v] - tol)
        rep.add("submartingale", "claim " + std::to_string(j) + ", node " + std::to_string(v), -bid_neg[v] - e_bid,
                "E_R(bid next) = " + std::to_string(e_bid) + " < bid = " + std::to_string(-bid_neg[v]));
    }
    for (const auto& sigma : times) {
      if (!precedes(tree, sigma, x.at)) continue;
      const auto cond = conditional_expectation(tree, r, x, sigma).value();
      const auto ba = bid_ask(model, x, sigma);
      for (std::size_t k = 0; k < sigma.size(); ++k) {
        rep.cases += 2;
        const auto where = "claim " + std::to_string(j) + ", node " + std::to_string(sigma.cut()[k]);
        if (ba.bid.values[k] > cond.values[k] + tol)
          rep.add("sandwich", where, ba.bid.values[k] - cond.values[k],
                  "bid " + std::to_string(ba.bid.values[k]) + " > E_R " + std::to_string(cond.values[k]));
        if (cond.values[k] > ba.ask.values[k] + tol)
          rep.add("sandwich", where, cond.values[k] - ba.ask.values[k],
                  "E_R " + std::to_string(cond.values[k]) + " > ask " + std::to_string(ba.ask.values[k]));
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// American claims

struct AmericanResult {
  Claim value;      ///< esssup over stopping times nu <= sigma <= tau of Pi_{nu,sigma}(Y_sigma) (enumerated)
  Claim induction;  ///< U = max(Y, one-step price of U), stopped at tau
  double max_gap = 0.0;
  bool agree = true;
  std::size_t stopping_times = 0;  ///< local cuts enumerated
};

/// `payoff` holds Y at every node (an adapted process).
inline AmericanResult american_price(const ScenarioModel& model, const std::vector<double>& payoff,
                                     const StoppingTime& nu, const StoppingTime& tau, std::size_t cap,
                                     double agreement_tol = 1e-9) {
  const auto& tree = model.tree();
  if (payoff.size() != tree.size()) throw Error(Errc::precondition_violation, "payoff must be given at every node");
  if (!precedes(tree, nu, tau)) throw Error(Errc::precondition_violation, "american_price needs nu <= tau");
  AmericanResult res;
  std::vector<double> best(nu.size(), -kInfinity);
  for (std::size_t a = 0; a < nu.size(); ++a) {
    const NodeId n = nu.cut()[a];
    const auto cuts = local_cuts(tree, n, tau, cap);
    res.stopping_times += cuts.size();
    for (const auto& local : cuts) {
      auto full = local;
      for (NodeId other : nu.cut())
        if (other != n) full.push_back(other);
      const auto sigma = StoppingTime::from_cut(tree, full);
      std::vector<double> y(sigma.size());
      for (std::size_t k = 0; k < sigma.size(); ++k) y[k] = payoff[sigma.cut()[k]];
      best[a] = std::max(best[a], price(model, Claim(sigma, std::move(y)), nu).at_node(n));
    }
  }
  res.value = Claim(nu, std::move(best));

  std::vector<double> u(tree.size(), std::numeric_limits<double>::quiet_NaN());
  std::function<double(NodeId)> snell = [&](NodeId v) {
    if (tau.contains(v)) return u[v] = payoff[v];
    const auto ch = tree.children(v);
    std::vector<double> child(ch.size());
    for (std::size_t c = 0; c < ch.size(); ++c) child[c] = snell(ch[c]);
    double cont = -kInfinity;
    for (const auto& e : model.menu(v)) {
      double s = -e.penalty;
      for (std::size_t c = 0; c < ch.size(); ++c) s += e.kernel[c] * child[c];
      cont = std::max(cont, s);
    }
    return u[v] = std::max(payoff[v], cont);
  };
  std::vector<double> ind(nu.size());
  for (std::size_t a = 0; a < nu.size(); ++a) ind[a] = snell(nu.cut()[a]);
  res.induction = Claim(nu, std::move(ind));
  for (std::size_t a = 0; a < nu.size(); ++a)
    res.max_gap = std::max(res.max_gap, std::abs(res.value.values[a] - res.induction.values[a]));
  res.agree = res.max_gap <= agreement_tol;
  return res;
}

}  // namespace tcpp
