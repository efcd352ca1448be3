/**
 * @file nfl.hpp
 * @brief No Free Lunch: static free lunches, zero-penalty equivalent measures,
 *        zero-cost strategies and the four-way verdict.
 *
 * For a normalized model (zero minimum penalty at every node) the four
 * characterizations are decided as follows:
 *  - static: does some X >= 0 with sum X = 1 have a nonpositive price at
 *    small scale? Near zero only zero-penalty entries matter, so this is the
 *    LP  min v_root  s.t.  v_n >= q . v_children  for every zero-penalty
 *    entry q, v_leaf = X >= 0, sum X = 1; a free lunch exists iff the optimum
 *    is <= 0, and eps * X is then a priced-at-zero certificate;
 *  - measure: maximize the smallest leaf mass over mixtures of zero-penalty
 *    selections (flow polytope);
 *  - sandwich: at each node, maximize the smallest component over the hull
 *    of the zero-penalty kernels; an equivalent R with bid <= E_R <= ask at
 *    every stopping time exists iff all these are positive, and the product
 *    of the local maximizers is checked on sampled claims;
 *  - multiperiod: sampled zero-cost strategies have E_R <= 0 under the
 *    measure found above.
 */
#pragma once

#include "tcpp/lp.hpp"
#include "tcpp/pricing.hpp"
#include "tcpp/random.hpp"
#include "tcpp/scenario.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tcpp {

enum class CertificateKind { none, static_arbitrage_claim, zero_penalty_equivalent_measure };

inline std::string to_string(CertificateKind k) {
  switch (k) {
    case CertificateKind::none: return "none";
    case CertificateKind::static_arbitrage_claim: return "static-arbitrage-claim";
    case CertificateKind::zero_penalty_equivalent_measure: return "zero-penalty-equivalent-measure";
  }
  return "unknown";
}

struct FreeLunchCertificate {
  CertificateKind kind = CertificateKind::none;
  std::optional<Claim> claim;      ///< terminal, >= 0, nonzero, root price <= 1e-9
  std::optional<Measure> measure;  ///< equivalent, zero minimal penalty
  double margin = 0.0;             ///< LP optimum behind the certificate (v_root, or the smallest leaf mass)
};

namespace detail {

inline void require_normalized(const ScenarioModel& model, double tol) {
  const auto rep = model.normalization_report(tol);
  if (!rep.passed())
    throw Error(Errc::precondition_violation,
                "free lunch analysis needs a normalized model: " + rep.violations.front().location + " " +
                    rep.violations.front().detail);
}

}  // namespace detail

inline FreeLunchCertificate find_static_free_lunch(const ScenarioModel& model, const NumericSettings& settings = {}) {
  const auto& tree = model.tree();
  detail::require_normalized(model, settings.zero_penalty_tol);
  // Variables: v_n for internal nodes (free), X for leaves (>= 0).
  lp::LinearProgram p(tree.size(), lp::Sense::minimize);
  for (NodeId v = 0; v < tree.size(); ++v)
    if (!tree.is_leaf(v)) p.lower[v] = -kInfinity;
  p.objective[tree.root()] = 1.0;
  for (NodeId v : tree.internal_nodes()) {
    const auto ch = tree.children(v);
    for (const auto& e : model.menu(v)) {
      if (std::abs(e.penalty) > settings.zero_penalty_tol) continue;
      std::vector<std::pair<std::size_t, double>> terms{{v, 1.0}};
      for (std::size_t c = 0; c < ch.size(); ++c)
        if (e.kernel[c] != 0.0) terms.emplace_back(ch[c], -e.kernel[c]);
      p.add_constraint(terms, lp::Relation::greater_equal, 0.0);
    }
  }
  std::vector<std::pair<std::size_t, double>> total;
  for (NodeId leaf : tree.leaves()) total.emplace_back(leaf, 1.0);
  p.add_constraint(total, lp::Relation::equal, 1.0);
  const auto sol = lp::solve(p, settings);
  if (sol.status != lp::Status::optimal)
    throw Error(Errc::numerical_breakdown, "static free lunch program did not reach an optimum");

  FreeLunchCertificate cert;
  cert.margin = sol.value;
  if (sol.value > settings.check_tol) return cert;

  std::vector<double> x(tree.num_leaves());
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = std::max(0.0, sol.point[tree.leaves()[k]]);
  Claim claim(StoppingTime::terminal(tree), std::move(x));
  const auto root = StoppingTime::root(tree);
  // Shrink until the positive-penalty entries are inactive.
  for (int halvings = 0; halvings < 200; ++halvings) {
    if (price(model, claim, root).values[0] <= settings.check_tol) {
      cert.kind = CertificateKind::static_arbitrage_claim;
      cert.claim = std::move(claim);
      return cert;
    }
    claim = 0.5 * claim;
  }
  throw Error(Errc::numerical_breakdown, "could not scale the static free lunch to a nonpositive price");
}

inline FreeLunchCertificate find_zero_penalty_equivalent_measure(const ScenarioModel& model,
                                                                 const NumericSettings& settings = {}) {
  const auto& tree = model.tree();
  detail::require_normalized(model, settings.zero_penalty_tol);
  const auto term = StoppingTime::terminal(tree);
  auto fp = build_flow_polytope(
      model, tree.root(), term,
      [&](NodeId v, std::size_t e) { return std::abs(model.menu(v)[e].penalty) <= settings.zero_penalty_tol; },
      [](NodeId, std::size_t) { return 0.0; }, lp::Sense::maximize);
  const std::size_t s = fp.program.add_variable(1.0, -kInfinity, 1.0);
  for (NodeId leaf : tree.leaves()) {
    auto terms = fp.mass_terms(model, leaf);
    terms.emplace_back(s, -1.0);
    fp.program.add_constraint(terms, lp::Relation::greater_equal, 0.0);
  }
  const auto sol = lp::solve(fp.program, settings);
  if (sol.status != lp::Status::optimal)
    throw Error(Errc::numerical_breakdown, "zero-penalty measure program did not reach an optimum");
  FreeLunchCertificate cert;
  cert.margin = sol.value;
  if (sol.value <= settings.positivity_floor) return cert;
  std::vector<double> masses(tree.num_leaves());
  double total = 0.0;
  for (std::size_t k = 0; k < masses.size(); ++k) {
    double m = 0.0;
    for (auto [idx, a] : fp.mass_terms(model, tree.leaves()[k])) m += a * sol.point[idx];
    total += (masses[k] = std::max(m, 0.0));
  }
  for (auto& m : masses) m /= total;
  cert.kind = CertificateKind::zero_penalty_equivalent_measure;
  cert.measure = Measure::from_masses(tree, masses);
  return cert;
}

/// Product measure of per-node kernels maximizing the smallest component over the hull of the
/// zero-penalty kernels; nullopt when some node cannot charge all of its children.
inline std::optional<Measure> local_zero_penalty_measure(const ScenarioModel& model, double* margin = nullptr,
                                                         const NumericSettings& settings = {}) {
  const auto& tree = model.tree();
  std::vector<double> node_mass(tree.size(), 0.0);
  node_mass[tree.root()] = 1.0;
  double worst = kInfinity;
  for (NodeId v : tree.topological_order()) {
    if (tree.is_leaf(v)) continue;
    std::vector<const MenuEntry*> zero;
    for (const auto& e : model.menu(v))
      if (std::abs(e.penalty) <= settings.zero_penalty_tol) zero.push_back(&e);
    const std::size_t b = tree.children(v).size();
    lp::LinearProgram p(zero.size() + 1, lp::Sense::maximize);
    p.objective[zero.size()] = 1.0;
    p.lower[zero.size()] = -kInfinity;
    std::vector<double> sum(zero.size() + 1, 1.0);
    sum[zero.size()] = 0.0;
    p.add_constraint(sum, lp::Relation::equal, 1.0);
    for (std::size_t c = 0; c < b; ++c) {
      std::vector<double> row(zero.size() + 1);
      for (std::size_t j = 0; j < zero.size(); ++j) row[j] = zero[j]->kernel[c];
      row[zero.size()] = -1.0;
      p.add_constraint(row, lp::Relation::greater_equal, 0.0);
    }
    const auto sol = lp::solve(p, settings);
    if (sol.status != lp::Status::optimal) return std::nullopt;
    worst = std::min(worst, sol.value);
    if (sol.value <= settings.positivity_floor) {
      if (margin) *margin = worst;
      return std::nullopt;
    }
    const auto ch = tree.children(v);
    for (std::size_t c = 0; c < b; ++c) {
      double q = 0.0;
      for (std::size_t j = 0; j < zero.size(); ++j) q += sol.point[j] * zero[j]->kernel[c];
      node_mass[ch[c]] = node_mass[v] * q;
    }
  }
  if (margin) *margin = worst;
  std::vector<double> masses(tree.num_leaves());
  for (std::size_t k = 0; k < masses.size(); ++k) masses[k] = node_mass[tree.leaves()[k]];
  return Measure::from_masses(tree, masses);
}

// ---------------------------------------------------------------------------
// Zero-cost strategies

struct Swap {
  StoppingTime tau;
  Claim z;  ///< bought at tau, terminal payoff
  Claim y;  ///< sold at tau, terminal payoff
};

struct ZeroCostStrategy {
  Claim initial;  ///< X0, terminal, with Pi_{0,T}(X0) <= 0
  std::vector<Swap> swaps;

  static ZeroCostStrategy zero(const FiltrationTree& tree) {
    return {Claim::constant(StoppingTime::terminal(tree), 0.0), {}};
  }

  /// X0 + sum (Z_i - Y_i).
  [[nodiscard]] Claim terminal_value() const {
    Claim out = initial;
    for (const auto& s : swaps) out = out + s.z - s.y;
    return out;
  }
};

/// Random strategy whose self-financing constraints bind: Z_i is shifted so that
/// ask_{tau_i}(Z_i) = bid_{tau_i}(Y_i), and X0 is shifted to a zero price.
inline ZeroCostStrategy sample_zero_cost(const ScenarioModel& model, Rng& rng, std::size_t n_swaps) {
  const auto& tree = model.tree();
  const auto root = StoppingTime::root(tree), term = StoppingTime::terminal(tree);
  ZeroCostStrategy s;
  const auto x = random_claim(term, rng);
  s.initial = x - Claim::constant(term, price(model, x, root).values[0]);
  StoppingTime tau = root;
  for (std::size_t i = 0; i < n_swaps; ++i) {
    tau = random_stopping_time_between(tree, tau, term, rng, 0.5);
    const auto y = random_claim(term, rng, 0.0, 1.0);
    const auto zp = random_claim(term, rng);
    const auto shift = (price(model, -y, tau) + price(model, zp, tau)).lifted_to(tree, term);
    s.swaps.push_back({tau, zp - shift, y});
  }
  return s;
}

/// Self-financing (ask of Z <= bid of Y at each tau_i), zero initial cost, nondecreasing times.
inline CheckReport validate_strategy(const ScenarioModel& model, const ZeroCostStrategy& s, double tol = 1e-9) {
  const auto& tree = model.tree();
  CheckReport r;
  const auto root = StoppingTime::root(tree);
  ++r.cases;
  const double p0 = price(model, s.initial, root).values[0];
  if (p0 > tol) r.add("initial-cost", "root", p0, "Pi(X0) = " + std::to_string(p0));
  StoppingTime prev = root;
  for (std::size_t i = 0; i < s.swaps.size(); ++i) {
    const auto& sw = s.swaps[i];
    ++r.cases;
    if (!precedes(tree, prev, sw.tau)) r.add("order", "swap " + std::to_string(i), 0.0, "stopping times decrease");
    prev = sw.tau;
    const auto ask = price(model, sw.z, sw.tau);
    const auto bid = -price(model, -sw.y, sw.tau);
    for (std::size_t k = 0; k < ask.values.size(); ++k) {
      ++r.cases;
      if (ask.values[k] > bid.values[k] + tol)
        r.add("self-financing", "swap " + std::to_string(i) + ", node " + std::to_string(sw.tau.cut()[k]),
              ask.values[k] - bid.values[k]);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Verdict

struct NflOptions {
  std::size_t k0_samples = 100;
  std::size_t swaps_per_strategy = 3;
  std::size_t sandwich_claims = 30;
  std::size_t sandwich_times = 10;
};

struct NflVerdict {
  bool no_free_lunch = false;
  bool multiperiod = false;  ///< i)   sampled K0 elements have E_R <= 0 under the certificate measure
  bool static_nfl = false;   ///< ii)  no static free lunch
  bool measure = false;      ///< iii) an equivalent zero-penalty measure exists
  bool sandwich = false;     ///< iv)  an equivalent R with bid <= E_R(X | F_sigma) at sampled X, sigma
  FreeLunchCertificate static_certificate;
  FreeLunchCertificate measure_certificate;
  std::optional<Measure> sandwich_measure;
  double sandwich_margin = 0.0;
  double max_k0_expectation = -kInfinity;
  CheckReport details;  ///< violations found while sampling
};

inline NflVerdict nfl_verdict(const ScenarioModel& model, Rng& rng, const NflOptions& opt = {},
                              const NumericSettings& settings = {}) {
  const auto& tree = model.tree();
  NflVerdict v;
  v.static_certificate = find_static_free_lunch(model, settings);
  v.static_nfl = v.static_certificate.kind == CertificateKind::none;
  v.measure_certificate = find_zero_penalty_equivalent_measure(model, settings);
  v.measure = v.measure_certificate.kind != CertificateKind::none;

  v.sandwich_measure = local_zero_penalty_measure(model, &v.sandwich_margin, settings);
  v.sandwich = v.sandwich_measure.has_value();
  if (v.sandwich) {
    const auto term = StoppingTime::terminal(tree);
    for (std::size_t j = 0; j < opt.sandwich_claims; ++j) {
      const auto x = random_claim(term, rng);
      for (std::size_t s = 0; s < opt.sandwich_times; ++s) {
        const auto sigma = random_stopping_time(tree, rng);
        const auto cond = conditional_expectation(tree, *v.sandwich_measure, x, sigma).value();
        const auto ba = bid_ask(model, x, sigma);
        for (std::size_t k = 0; k < sigma.size(); ++k) {
          ++v.details.cases;
          const double gap = std::max(ba.bid.values[k] - cond.values[k], cond.values[k] - ba.ask.values[k]);
          if (gap > settings.check_tol) {
            v.sandwich = false;
            v.details.add("sandwich", "node " + std::to_string(sigma.cut()[k]), gap);
          }
        }
      }
    }
  }

  if (v.measure) {
    v.multiperiod = true;
    for (std::size_t j = 0; j < opt.k0_samples; ++j) {
      const auto s = sample_zero_cost(model, rng, opt.swaps_per_strategy);
      const double e = v.measure_certificate.measure->expectation(tree, s.terminal_value());
      ++v.details.cases;
      v.max_k0_expectation = std::max(v.max_k0_expectation, e);
      if (e > settings.check_tol) {
        v.multiperiod = false;
        v.details.add("multiperiod", "strategy " + std::to_string(j), e, "E_R of a zero-cost position is positive");
      }
    }
  } else if (v.static_certificate.claim) {
    // The static claim is itself a zero-cost position (X0 with no swaps) that is >= 0 and nonzero.
    v.multiperiod = false;
  } else {
    v.multiperiod = true;  // nothing found either way; the disagreement below reports it
  }

  if (!(v.multiperiod == v.static_nfl && v.static_nfl == v.measure && v.measure == v.sandwich))
    throw Error(Errc::inconsistent_verdicts,
                std::string("multiperiod=") + (v.multiperiod ? "nfl" : "lunch") + " static=" +
                    (v.static_nfl ? "nfl" : "lunch") + " measure=" + (v.measure ? "found" : "none") +
                    " sandwich=" + (v.sandwich ? "holds" : "fails"));
  v.no_free_lunch = v.static_nfl;
  return v;
}

}  // namespace tcpp
