/**
 * @file market.hpp
 * @brief Reference assets, the martingale-measure polytope and the bounds built on it:
 *        surreplication, calibration to quotes, good deals and portfolio constraints.
 *
 * Measures are optimized over leaf masses Q >= 0 with sum 1. The martingale
 * condition at node n for asset k is linear in those masses:
 *   sum over children c of (S(c) - S(n)) * Q(c) = 0.
 * Asset values are discounted by a numeraire identically equal to 1.
 */
#pragma once

#include "tcpp/lp.hpp"
#include "tcpp/pricing.hpp"
#include "tcpp/random.hpp"
#include "tcpp/scenario.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace tcpp {

struct AssetProcess {
  std::string name;
  std::vector<double> values;  ///< one per node
};

using Assets = std::vector<AssetProcess>;

struct QuotedOption {
  std::string name;
  Claim payoff;
  double bid = 0.0;
  double ask = 0.0;
};

/// Compact polyhedron of admissible positions (one weight per asset), stored as vertices.
struct ConstraintSet {
  std::vector<std::vector<double>> vertices;

  [[nodiscard]] std::size_t dimension() const { return vertices.empty() ? 0 : vertices.front().size(); }

  static ConstraintSet zero(std::size_t d) { return {{std::vector<double>(d, 0.0)}}; }

  /// [-m, m] on asset k, zero elsewhere.
  static ConstraintSet segment(std::size_t d, std::size_t k, double m) {
    ConstraintSet h{{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)}};
    h.vertices[0][k] = -m;
    h.vertices[1][k] = m;
    return h;
  }

  /// Vertices of {h : A h <= b} by solving every d-subset of rows (d <= 4).
  static ConstraintSet from_facets(const std::vector<std::vector<double>>& a, const std::vector<double>& b,
                                   double tol = 1e-9);
};

/// Upper bound A >= 1 on the one-step second moment of dQ/dP, globally or per node.
struct GoodDealCaps {
  double global = kInfinity;
  std::vector<double> per_node;  ///< empty, or one per node (NaN falls back to `global`)

  [[nodiscard]] double at(NodeId v) const {
    if (v < per_node.size() && !std::isnan(per_node[v])) return per_node[v];
    return global;
  }
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  [[nodiscard]] bool contains(const Interval& o, double tol = 1e-9) const {
    return o.lower >= lower - tol && o.upper <= upper + tol;
  }
  [[nodiscard]] double width() const { return upper - lower; }
};

struct MmeBounds {
  double sub = 0.0;
  double sup = 0.0;
  bool equivalent = false;  ///< some martingale measure charges every leaf
  double margin = 0.0;      ///< largest achievable smallest leaf mass
};

inline void validate_assets(const FiltrationTree& tree, const Assets& assets) {
  for (const auto& a : assets) {
    if (a.values.size() != tree.size())
      throw Error(Errc::invariant_violation, "asset '" + a.name + "' needs one value per node");
    for (std::size_t v = 0; v < a.values.size(); ++v)
      if (!std::isfinite(a.values[v]))
        throw Error(Errc::invariant_violation, "asset '" + a.name + "' is not finite at node " + std::to_string(v));
  }
}

inline void validate_quotes(const FiltrationTree& tree, const std::vector<QuotedOption>& quotes) {
  for (std::size_t l = 0; l < quotes.size(); ++l) {
    const auto& q = quotes[l];
    if (!(q.bid <= q.ask))
      throw Error(Errc::invariant_violation, "quote " + std::to_string(l) + " has bid above ask");
    for (NodeId v : q.payoff.at.cut())
      if (v >= tree.size())
        throw Error(Errc::invariant_violation, "quote " + std::to_string(l) + " payoff is not on this tree");
  }
}

namespace detail {

inline std::vector<double> leaf_row(const FiltrationTree& tree, const Claim& x) { return x.leaf_values(tree); }

/// Leaf-mass variables with sum 1 and the martingale rows; extra variables are appended by callers.
inline lp::LinearProgram martingale_program(const FiltrationTree& tree, const Assets& assets, lp::Sense sense) {
  validate_assets(tree, assets);
  const std::size_t n = tree.num_leaves();
  lp::LinearProgram p(n, sense);
  p.add_constraint(std::vector<double>(n, 1.0), lp::Relation::equal, 1.0);
  for (NodeId v : tree.internal_nodes())
    for (const auto& a : assets) {
      std::vector<double> row(n, 0.0);
      bool any = false;
      for (NodeId c : tree.children(v)) {
        const double d = a.values[c] - a.values[v];
        if (d == 0.0) continue;
        any = true;
        for (std::size_t leaf : tree.leaves_under(c)) row[leaf] = d;
      }
      if (any) p.add_constraint(std::move(row), lp::Relation::equal, 0.0);
    }
  return p;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

/// Appends s <= Q(leaf) for every leaf and maximizes s.
inline std::size_t add_margin_objective(lp::LinearProgram& p, std::size_t leaves) {
  std::fill(p.objective.begin(), p.objective.end(), 0.0);
  p.sense = lp::Sense::maximize;
  const std::size_t s = p.add_variable(1.0, -kInfinity, 1.0);
  for (std::size_t k = 0; k < leaves; ++k) {
    std::vector<double> row(p.num_variables(), 0.0);
    row[k] = 1.0;
    row[s] = -1.0;
    p.add_constraint(std::move(row), lp::Relation::greater_equal, 0.0);
  }
  return s;
}

inline Measure measure_from_point(const FiltrationTree& tree, const std::vector<double>& point) {
  std::vector<double> m(tree.num_leaves());
  double total = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) total += (m[k] = std::max(point[k], 0.0));
  for (auto& v : m) v /= total;
  return Measure::from_masses(tree, m);
}

}  // namespace detail

inline ConstraintSet ConstraintSet::from_facets(const std::vector<std::vector<double>>& a,
                                                const std::vector<double>& b, double tol) {
  if (a.empty() || a.size() != b.size()) throw Error(Errc::invariant_violation, "facet rows and bounds differ in size");
  const std::size_t d = a.front().size();
  if (d == 0 || d > 4) throw Error(Errc::invariant_violation, "facet conversion supports dimension 1 to 4");
  ConstraintSet out;
  std::vector<std::size_t> pick(d);
  for (std::size_t k = 0; k < d; ++k) pick[k] = k;
  if (a.size() < d) throw Error(Errc::invariant_violation, "too few facets for a bounded polyhedron");
  for (;;) {
    std::vector<std::vector<double>> m;
    std::vector<double> rhs;
    for (std::size_t k : pick) {
      m.push_back(a[k]);
      rhs.push_back(b[k]);
    }
    if (lp::detail::dense_solve(m, rhs, 1e-12)) {
      bool inside = true;
      for (std::size_t r = 0; r < a.size() && inside; ++r) inside = detail::dot(a[r], rhs) <= b[r] + tol;
      bool fresh = true;
      for (const auto& v : out.vertices) {
        double dist = 0.0;
        for (std::size_t k = 0; k < d; ++k) dist = std::max(dist, std::abs(v[k] - rhs[k]));
        if (dist <= tol) fresh = false;
      }
      if (inside && fresh) out.vertices.push_back(rhs);
    }
    std::size_t k = d;
    while (k > 0 && pick[k - 1] == a.size() - d + k - 1) --k;
    if (k == 0) break;
    ++pick[k - 1];
    for (std::size_t j = k; j < d; ++j) pick[j] = pick[j - 1] + 1;
  }
  if (out.vertices.empty()) throw Error(Errc::invariant_violation, "facets describe an empty or unbounded set");
  return out;
}

// ---------------------------------------------------------------------------
// Extension of dynamics

inline CheckReport check_extends_dynamics(const ScenarioModel& model, const Assets& assets, std::uint64_t seed = 1,
                                          std::size_t spot_checks = 20, double tol = 1e-9) {
  const auto& tree = model.tree();
  validate_assets(tree, assets);
  CheckReport r;
  for (NodeId v : tree.internal_nodes()) {
    const auto ch = tree.children(v);
    for (std::size_t e = 0; e < model.menu(v).size(); ++e)
      for (const auto& a : assets) {
        ++r.cases;
        double s = 0.0;
        for (std::size_t c = 0; c < ch.size(); ++c) s += model.menu(v)[e].kernel[c] * a.values[ch[c]];
        if (std::abs(s - a.values[v]) > tol)
          r.add("martingale", "node " + std::to_string(v), std::abs(s - a.values[v]),
                "entry " + std::to_string(e) + " gives E(" + a.name + ") = " + std::to_string(s) + " instead of " +
                    std::to_string(a.values[v]));
      }
  }
  Rng rng(seed);
  for (std::size_t j = 0; j < spot_checks && !assets.empty(); ++j) {
    const auto tau = random_stopping_time(tree, rng);
    const auto sigma = random_stopping_time_between(tree, StoppingTime::root(tree), tau, rng);
    const auto& a = assets[uniform_index(rng, 0, assets.size() - 1)];
    for (int n = -3; n <= 3; ++n) {
      std::vector<double> xv(tau.size());
      for (std::size_t k = 0; k < tau.size(); ++k) xv[k] = n * a.values[tau.cut()[k]];
      const auto p = price(model, Claim(tau, std::move(xv)), sigma);
      for (std::size_t k = 0; k < sigma.size(); ++k) {
        ++r.cases;
        const double want = n * a.values[sigma.cut()[k]];
        if (std::abs(p.values[k] - want) > tol)
          r.add("price-of-asset", "node " + std::to_string(sigma.cut()[k]), std::abs(p.values[k] - want),
                "Pi(" + std::to_string(n) + " " + a.name + ") differs from the spot value");
      }
    }
  }
  return r;
}

/// Vertex of the one-step martingale kernels at node v that maximizes `direction`; nullopt if none exist.
inline std::optional<std::vector<double>> martingale_kernel(const FiltrationTree& tree, const Assets& assets, NodeId v,
                                                            const std::vector<double>& direction) {
  const auto ch = tree.children(v);
  lp::LinearProgram p(ch.size(), lp::Sense::maximize);
  p.objective = direction;
  p.add_constraint(std::vector<double>(ch.size(), 1.0), lp::Relation::equal, 1.0);
  for (const auto& a : assets) {
    std::vector<double> row(ch.size());
    for (std::size_t c = 0; c < ch.size(); ++c) row[c] = a.values[ch[c]] - a.values[v];
    p.add_constraint(std::move(row), lp::Relation::equal, 0.0);
  }
  const auto sol = lp::solve(p);
  if (sol.status != lp::Status::optimal) return std::nullopt;
  auto k = sol.point;
  double s = 0.0;
  for (double& q : k) s += (q = std::max(q, 0.0));
  for (double& q : k) q /= s;
  return k;
}

/// Random model whose kernels are mixtures of one-step martingale vertices; every menu has a
/// zero-penalty entry. Throws no_martingale_measure when some node admits none.
inline ScenarioModel random_martingale_model(Rng& rng, const FiltrationTree& tree, const Assets& assets,
                                             const ModelOptions& opt = {}) {
  std::vector<std::vector<MenuEntry>> menus(tree.size());
  for (NodeId v : tree.internal_nodes()) {
    const std::size_t b = tree.children(v).size();
    const std::size_t m = uniform_index(rng, opt.min_menu, opt.max_menu);
    const std::size_t anchor = uniform_index(rng, 0, m - 1);
    for (std::size_t e = 0; e < m; ++e) {
      std::vector<double> kernel(b, 0.0);
      for (int j = 0; j < 3; ++j) {
        std::vector<double> dir(b);
        for (auto& d : dir) d = uniform(rng, -1.0, 1.0);
        const auto vert = martingale_kernel(tree, assets, v, dir);
        if (!vert) throw Error(Errc::no_martingale_measure, "node " + std::to_string(v) + " has no martingale kernel");
        for (std::size_t c = 0; c < b; ++c) kernel[c] += (*vert)[c] / 3.0;
      }
      const double pen = (e != anchor && coin(rng, opt.penalty_prob)) ? uniform(rng, 0.01, opt.max_penalty) : 0.0;
      menus[v].push_back({std::move(kernel), pen});
    }
  }
  return {tree, std::move(menus)};
}

// ---------------------------------------------------------------------------
// Surreplication bounds

inline MmeBounds mme_bounds(const FiltrationTree& tree, const Assets& assets, const Claim& x,
                            const NumericSettings& settings = {}) {
  const auto xv = detail::leaf_row(tree, x);
  auto p = detail::martingale_program(tree, assets, lp::Sense::maximize);
  p.objective = xv;
  const auto hi = lp::solve(p, settings);
  if (hi.status == lp::Status::infeasible) throw Error(Errc::no_martingale_measure, "the martingale polytope is empty");
  p.sense = lp::Sense::minimize;
  const auto lo = lp::solve(p, settings);
  MmeBounds out{lo.value, hi.value, false, 0.0};
  detail::add_margin_objective(p, tree.num_leaves());
  const auto m = lp::solve(p, settings);
  out.margin = m.value;
  out.equivalent = m.value > settings.positivity_floor;
  return out;
}

/// Sub <= bid <= ask <= sup at the root for sampled terminal claims.
inline CheckReport check_price_in_mme_bounds(const ScenarioModel& model, const Assets& assets, Rng& rng,
                                             std::size_t samples = 50, double tol = 1e-9) {
  const auto& tree = model.tree();
  const auto ext = check_extends_dynamics(model, assets);
  if (!ext.passed())
    throw Error(Errc::precondition_violation, "model does not extend the asset dynamics at " + ext.violations[0].location);
  CheckReport r;
  const auto root = StoppingTime::root(tree), term = StoppingTime::terminal(tree);
  for (std::size_t j = 0; j < samples; ++j) {
    const auto x = random_claim(term, rng);
    const auto b = mme_bounds(tree, assets, x);
    const auto ba = bid_ask(model, x, root);
    ++r.cases;
    const double bid = ba.bid.values[0], ask = ba.ask.values[0];
    const double d = std::max({b.sub - bid, bid - ask, ask - b.sup});
    if (d > tol)
      r.add("mme-bounds", "node 0", d,
            "sub " + std::to_string(b.sub) + ", bid " + std::to_string(bid) + ", ask " + std::to_string(ask) + ", sup " +
                std::to_string(b.sup));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Calibration

struct Calibration {
  std::optional<Measure> measure;  ///< equivalent martingale measure matching every quote band
  double margin = -kInfinity;      ///< largest achievable smallest leaf mass (-inf when infeasible)
};

inline void add_quote_rows(const FiltrationTree& tree, lp::LinearProgram& p, const std::vector<QuotedOption>& quotes) {
  validate_quotes(tree, quotes);
  for (const auto& q : quotes) {
    auto row = detail::leaf_row(tree, q.payoff);
    row.resize(p.num_variables(), 0.0);
    p.add_constraint(row, lp::Relation::greater_equal, q.bid);
    p.add_constraint(row, lp::Relation::less_equal, q.ask);
  }
}

inline Calibration calibration_feasible(const FiltrationTree& tree, const Assets& assets,
                                        const std::vector<QuotedOption>& quotes, const NumericSettings& settings = {}) {
  auto p = detail::martingale_program(tree, assets, lp::Sense::maximize);
  add_quote_rows(tree, p, quotes);
  detail::add_margin_objective(p, tree.num_leaves());
  const auto sol = lp::solve(p, settings);
  Calibration out;
  if (sol.status != lp::Status::optimal) return out;
  out.margin = sol.value;
  if (sol.value > settings.positivity_floor) out.measure = detail::measure_from_point(tree, sol.point);
  return out;
}

/// Extension of dynamics, quotes inside the model's spreads at the root, and the penalty lower
/// bound alpha^m(R) >= max(0, bid - E_R(Y), E_R(Y) - ask) on sampled R.
inline CheckReport check_strong_admissibility(const ScenarioModel& model, const Assets& assets,
                                              const std::vector<QuotedOption>& quotes, std::uint64_t seed = 1,
                                              std::size_t measures = 20, double tol = 1e-9) {
  const auto& tree = model.tree();
  validate_quotes(tree, quotes);
  auto r = check_extends_dynamics(model, assets, seed);
  const auto root = StoppingTime::root(tree), term = StoppingTime::terminal(tree);
  for (std::size_t l = 0; l < quotes.size(); ++l) {
    const auto& q = quotes[l];
    const auto ba = bid_ask(model, q.payoff, root);
    ++r.cases;
    if (ba.ask.values[0] > q.ask + tol)
      r.add("quote-ask", "quote " + std::to_string(l), ba.ask.values[0] - q.ask,
            q.name + ": model ask " + std::to_string(ba.ask.values[0]) + " above quoted " + std::to_string(q.ask));
    if (ba.bid.values[0] < q.bid - tol)
      r.add("quote-bid", "quote " + std::to_string(l), q.bid - ba.bid.values[0],
            q.name + ": model bid " + std::to_string(ba.bid.values[0]) + " below quoted " + std::to_string(q.bid));
  }
  if (quotes.empty()) return r;
  Rng rng(seed);
  for (std::size_t j = 0; j < measures; ++j) {
    std::vector<double> m(tree.num_leaves());
    double s = 0.0;
    for (auto& v : m) s += (v = uniform(rng, 0.05, 1.0));
    for (auto& v : m) v /= s;
    const auto rm = Measure::from_masses(tree, m);
    const double alpha = *minimal_penalty(model, rm, root, term).values[0];
    double beta = 0.0;
    for (const auto& q : quotes) {
      const double e = rm.expectation(tree, q.payoff);
      beta = std::max({beta, q.bid - e, e - q.ask});
    }
    ++r.cases;
    if (alpha < beta - tol) r.add("penalty-bound", "node 0", beta - alpha, "sampled measure " + std::to_string(j));
  }
  return r;
}

/// sup / inf over martingale measures of E_Q(X) -/+ beta(Q), beta the distance of the model
/// prices of the quoted payoffs to their bands.
inline Interval calibrated_bounds(const FiltrationTree& tree, const Assets& assets,
                                  const std::vector<QuotedOption>& quotes, const Claim& x,
                                  const NumericSettings& settings = {}) {
  validate_quotes(tree, quotes);
  const auto xv = detail::leaf_row(tree, x);
  Interval out;
  for (int side = 0; side < 2; ++side) {
    const bool upper = side == 0;
    auto p = detail::martingale_program(tree, assets, upper ? lp::Sense::maximize : lp::Sense::minimize);
    const std::size_t z = p.add_variable(1.0, -kInfinity, kInfinity);
    const auto rel = upper ? lp::Relation::less_equal : lp::Relation::greater_equal;
    auto epigraph = [&](const std::vector<double>& coef, double shift) {
      // z  <=  (or >=)  E_Q(X) + coef . Q + shift
      std::vector<double> row(p.num_variables(), 0.0);
      for (std::size_t k = 0; k < xv.size(); ++k) row[k] = -(xv[k] + coef[k]);
      row[z] = 1.0;
      p.add_constraint(std::move(row), rel, shift);
    };
    const double sgn = upper ? 1.0 : -1.0;
    epigraph(std::vector<double>(xv.size(), 0.0), 0.0);
    for (const auto& q : quotes) {
      const auto yv = detail::leaf_row(tree, q.payoff);
      std::vector<double> plus(yv.size()), minus(yv.size());
      for (std::size_t k = 0; k < yv.size(); ++k) {
        plus[k] = sgn * yv[k];
        minus[k] = -sgn * yv[k];
      }
      epigraph(plus, -sgn * q.bid);   // upper: E X - (bid - E Y)
      epigraph(minus, sgn * q.ask);   // upper: E X - (E Y - ask)
    }
    const auto sol = lp::solve(p, settings);
    if (sol.status != lp::Status::optimal)
      throw Error(Errc::no_martingale_measure, "the martingale polytope is empty");
    (upper ? out.upper : out.lower) = sol.value;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Good-deal bounds

struct GoodDealResult {
  Interval bounds;
  std::size_t cuts = 0;
  double max_violation = 0.0;  ///< largest remaining second-moment excess at the returned measures
};

namespace detail {

// sqrt(sum_c Q(c)^2 / p_c) <= A Q(n), the homogeneous form of sum q_c^2 / p_c <= A^2.
inline double second_moment_excess(const FiltrationTree& tree, NodeId v, const std::vector<double>& node_mass,
                                   double cap) {
  double s = 0.0;
  for (NodeId c : tree.children(v)) {
    const double p = tree.mass(c) / tree.mass(v);
    s += node_mass[c] * node_mass[c] / p;
  }
  return std::sqrt(s) - cap * node_mass[v];
}

inline std::vector<double> node_masses(const FiltrationTree& tree, const std::vector<double>& point) {
  std::vector<double> m(tree.size(), 0.0);
  for (NodeId v = 0; v < tree.size(); ++v)
    for (std::size_t k : tree.leaves_under(v)) m[v] += std::max(point[k], 0.0);
  return m;
}

inline std::vector<double> node_mass_row(const FiltrationTree& tree, NodeId v, std::size_t width) {
  std::vector<double> row(width, 0.0);
  for (std::size_t k : tree.leaves_under(v)) row[k] = 1.0;
  return row;
}

}  // namespace detail

inline GoodDealResult good_deal_bounds(const FiltrationTree& tree, const Assets& assets, const GoodDealCaps& caps,
                                       const Claim& x, const NumericSettings& settings = {}) {
  const auto xv = detail::leaf_row(tree, x);
  constexpr double exact_cap = 1.0 + 1e-12;
  const auto internal = tree.internal_nodes();
  for (NodeId v : internal)
    if (!(caps.at(v) >= 1.0))
      throw Error(Errc::precondition_violation, "good-deal cap below 1 at node " + std::to_string(v));

  auto base = detail::martingale_program(tree, assets, lp::Sense::maximize);
  base.objective = xv;
  if (lp::solve(base, settings).status != lp::Status::optimal)
    throw Error(Errc::no_martingale_measure, "the martingale polytope is empty");
  const std::size_t n = tree.num_leaves();
  for (NodeId v : internal) {
    if (caps.at(v) > exact_cap) continue;
    // Cap 1 is the equality case: Q's kernel equals P's.
    for (NodeId c : tree.children(v)) {
      auto row = detail::node_mass_row(tree, c, n);
      const double p = tree.mass(c) / tree.mass(v);
      for (std::size_t k : tree.leaves_under(v)) row[k] -= p;
      base.add_constraint(std::move(row), lp::Relation::equal, 0.0);
    }
  }

  GoodDealResult out;
  for (int side = 0; side < 2; ++side) {
    auto p = base;
    p.sense = side == 0 ? lp::Sense::maximize : lp::Sense::minimize;
    for (std::size_t round = 0;; ++round) {
      if (round >= settings.max_cutting_plane_rounds)
        throw Error(Errc::numerical_breakdown, "good-deal cutting planes did not converge");
      const auto sol = lp::solve(p, settings);
      if (sol.status == lp::Status::infeasible)
        throw Error(Errc::empty_good_deal_set, "the caps exclude every martingale measure");
      if (sol.status != lp::Status::optimal) throw Error(Errc::numerical_breakdown, "good-deal program is unbounded");
      const auto mass = detail::node_masses(tree, sol.point);
      bool added = false;
      double worst = 0.0;
      for (NodeId v : internal) {
        const double cap = caps.at(v);
        if (cap <= exact_cap || !std::isfinite(cap)) continue;
        const double excess = detail::second_moment_excess(tree, v, mass, cap);
        worst = std::max(worst, excess);
        if (excess < settings.cut_violation_tol) continue;
        // Supporting hyperplane of the (homogeneous, convex) left side at the current point.
        double norm = 0.0;
        for (NodeId c : tree.children(v)) norm += mass[c] * mass[c] / (tree.mass(c) / tree.mass(v));
        norm = std::sqrt(norm);
        std::vector<double> row(n, 0.0);
        for (NodeId c : tree.children(v)) {
          const double g = mass[c] / (tree.mass(c) / tree.mass(v)) / norm;
          for (std::size_t k : tree.leaves_under(c)) row[k] += g;
        }
        for (std::size_t k : tree.leaves_under(v)) row[k] -= cap;
        p.add_constraint(std::move(row), lp::Relation::less_equal, 0.0);
        ++out.cuts;
        added = true;
      }
      if (!added) {
        (side == 0 ? out.bounds.upper : out.bounds.lower) = sol.value;
        out.max_violation = std::max(out.max_violation, worst);
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Portfolio constraints

struct ConstrainedPrice {
  double value = 0.0;                   ///< root value
  std::vector<double> node_value;       ///< NaN below the claim's stopping time
  std::vector<std::vector<double>> kernel;  ///< maximizing kernel per decision node
};

/// Backward induction with the one-step upper-variation penalty max_{h in H} h . E_q(S(child) - S(n)).
inline ConstrainedPrice constrained_price(const FiltrationTree& tree, const Assets& assets, const ConstraintSet& h,
                                          const Claim& x, const NumericSettings& settings = {}) {
  validate_assets(tree, assets);
  const std::size_t d = assets.size();
  if (h.vertices.empty()) throw Error(Errc::precondition_violation, "constraint set has no vertices");
  for (const auto& v : h.vertices)
    if (v.size() != d) throw Error(Errc::invariant_violation, "constraint vertex dimension differs from asset count");
  {
    lp::LinearProgram hull(h.vertices.size());
    hull.add_constraint(std::vector<double>(h.vertices.size(), 1.0), lp::Relation::equal, 1.0);
    for (std::size_t k = 0; k < d; ++k) {
      std::vector<double> row(h.vertices.size());
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = h.vertices[j][k];
      hull.add_constraint(std::move(row), lp::Relation::equal, 0.0);
    }
    if (lp::solve(hull, settings).status != lp::Status::optimal)
      throw Error(Errc::precondition_violation, "constraint set does not contain the zero position");
  }

  ConstrainedPrice out;
  out.node_value.assign(tree.size(), std::numeric_limits<double>::quiet_NaN());
  out.kernel.assign(tree.size(), {});
  for (std::size_t k = 0; k < x.at.size(); ++k) out.node_value[x.at.cut()[k]] = x.values[k];
  const auto order = tree.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeId v = *it;
    if (!std::isnan(out.node_value[v]) || tree.is_leaf(v)) continue;
    const auto ch = tree.children(v);
    if (std::isnan(out.node_value[ch[0]])) continue;  // below the claim's stopping time
    const std::size_t b = ch.size();
    lp::LinearProgram p(b + 1, lp::Sense::maximize);
    p.objective[b] = 1.0;
    p.lower[b] = -kInfinity;
    std::vector<double> sum(b + 1, 1.0);
    sum[b] = 0.0;
    p.add_constraint(std::move(sum), lp::Relation::equal, 1.0);
    for (const auto& hv : h.vertices) {
      // z - sum_c q_c (v_c - h . (S(c) - S(n))) <= 0
      std::vector<double> row(b + 1, 0.0);
      for (std::size_t c = 0; c < b; ++c) {
        double hedge = 0.0;
        for (std::size_t k = 0; k < d; ++k) hedge += hv[k] * (assets[k].values[ch[c]] - assets[k].values[v]);
        row[c] = -(out.node_value[ch[c]] - hedge);
      }
      row[b] = 1.0;
      p.add_constraint(std::move(row), lp::Relation::less_equal, 0.0);
    }
    const auto sol = lp::solve(p, settings);
    if (sol.status == lp::Status::unbounded) throw Error(Errc::unbounded_node_lp, "node " + std::to_string(v));
    if (sol.status != lp::Status::optimal) throw Error(Errc::numerical_breakdown, "node " + std::to_string(v));
    out.node_value[v] = sol.value;
    out.kernel[v].assign(sol.point.begin(), sol.point.begin() + static_cast<std::ptrdiff_t>(b));
  }
  out.value = out.node_value[tree.root()];
  return out;
}

}  // namespace tcpp
