// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include "oracles.hpp"
#include "tcpp/tcpp.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

using namespace tcpp;
using namespace tcpp::oracles;

namespace {

struct Outcome {
  bool pass = true;
  std::string summary;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

void track(double& worst, double v) { worst = std::max(worst, v); }

// --- instance generators ------------------------------------------------------

// Zero-penalty entries whose supports together cover every child: some mixture is strictly positive.
ScenarioModel covered_model(Rng& rng, const FiltrationTree& t) {
  ModelOptions opt;
  opt.zero_component_prob = 0.4;
  auto m = random_model(rng, t, opt);
  auto menus = m.menus();
  for (NodeId v : t.internal_nodes()) {
    const std::size_t b = t.children(v).size();
    std::vector<bool> covered(b, false);
    for (const auto& e : menus[v])
      if (e.penalty == 0.0)
        for (std::size_t c = 0; c < b; ++c) covered[c] = covered[c] || e.kernel[c] > 0.0;
    for (std::size_t c = 0; c < b; ++c)
      if (!covered[c]) {
        std::vector<double> k(b, 0.0);
        k[c] = 1.0;
        menus[v].push_back({k, 0.0});
      }
  }
  return {t, menus};
}

// Every zero-penalty entry at one node gives zero weight to the same child.
ScenarioModel killed_leaf_model(Rng& rng, const FiltrationTree& t) {
  auto menus = random_model(rng, t).menus();
  std::vector<NodeId> branching;
  for (NodeId v : t.internal_nodes())
    if (t.children(v).size() >= 2) branching.push_back(v);
  const NodeId v = branching[uniform_index(rng, 0, branching.size() - 1)];
  const std::size_t b = t.children(v).size();
  const std::size_t dead = uniform_index(rng, 0, b - 1);
  for (auto& e : menus[v]) {
    if (e.penalty != 0.0) continue;
    e.kernel[dead] = 0.0;
    double s = 0.0;
    for (double q : e.kernel) s += q;
    if (s == 0.0) {
      e.kernel[(dead + 1) % b] = 1.0;
      s = 1.0;
    }
    for (double& q : e.kernel) q /= s;
  }
  return {t, menus};
}

struct NflInstance {
  ScenarioModel model;
  bool expect_nfl;
};

std::vector<NflInstance> nfl_instances() {
  Rng rng(303);
  std::vector<NflInstance> out;
  for (int i = 0; i < 100; ++i) {
    const auto t = random_tree(rng, 1 + i % 3, 2, 3);
    if (i % 2 == 0) out.push_back({covered_model(rng, t), true});
    else out.push_back({killed_leaf_model(rng, t), false});
  }
  return out;
}

// --- criteria -------------------------------------------------------------------

Outcome axioms() {
  Rng rng(101);
  const std::vector<double> lambdas{0.0, 0.3, 0.5, 1.0};
  std::size_t violations = 0, cases = 0;
  for (int i = 0; i < 200; ++i) {
    const auto t = random_tree(rng, 1 + i % 3, 1, 3);
    const auto m = random_model(rng, t);
    const auto samples = sample_axiom_cases(t, rng, 1000);
    const auto r = check_axioms(m, samples, lambdas, 1e-12);
    violations += r.violations.size();
    cases += r.cases;
  }
  return {violations == 0, "200 models x 1000 claims, " + std::to_string(cases) + " comparisons, " +
                               std::to_string(violations) + " violations at tol 1e-12"};
}

Outcome time_consistency() {
  Rng rng(202);
  Outcome o;
  double worst = 0.0;
  std::size_t instances = 0;
  for (int i = 0; i < 100; ++i) {
    const auto t = random_tree(rng, 1 + i % 3, 1, 3);
    const auto m = random_model(rng, t);
    if (m.selection_count(100000) > 100000) continue;
    ++instances;
    for (int j = 0; j < 3; ++j) {
      const auto tau = random_stopping_time(t, rng);
      const auto sigma = random_stopping_time_between(t, StoppingTime::root(t), tau, rng);
      const auto x = random_claim(tau, rng);
      const auto a = price(m, x, sigma), b = enumerated_price(m, x, sigma, 100000);
      for (std::size_t k = 0; k < a.values.size(); ++k) track(worst, std::abs(a.values[k] - b.values[k]));
    }
  }
  o.pass = worst <= 1e-9 && instances >= 50;

  // Model-generated penalties satisfy the cocycle identity.
  std::size_t cocycle_ok = 0, cocycle_total = 0;
  for (int i = 0; i < 20; ++i) {
    const auto t = random_tree(rng, 1 + i % 3, 1, 2);
    const auto m = random_model(rng, t);
    if (m.selection_count(64) > 64) continue;
    ++cocycle_total;
    cocycle_ok += check_cocycle(family_from_model(m, 64)).passed();
  }
  o.pass = o.pass && cocycle_ok == cocycle_total;

  // Shipped non-rectangular counterexample: both checks fail, at the same node.
  const auto fam = fixtures::horizon_penalty_family();
  const auto& ft = fam.tree;
  const auto root = StoppingTime::root(ft), mid = StoppingTime::at_time(ft, 1), term = StoppingTime::terminal(ft);
  const std::vector<StoppingChain> chains{{root, mid, term}};
  const std::vector<Claim> witness{fixtures::horizon_penalty_witness_claim(ft)};
  Rng crng(7);
  const auto tc = check_time_consistency([&](const Claim& x, const StoppingTime& s) { return family_price(fam, x, s); },
                                         ft, chains, crng, 0, 1e-9, witness);
  const auto cc = check_cocycle(fam);
  const bool located = !tc.passed() && !cc.passed() && tc.violations[0].location == cc.violations[0].location;
  o.pass = o.pass && located;
  o.summary = std::to_string(instances) + " instances, max |induction - dual| " + fmt(worst) + "; cocycle holds on " +
              std::to_string(cocycle_ok) + "/" + std::to_string(cocycle_total) + " model families; counterexample " +
              (located ? "fails both checks at " + tc.violations[0].location : std::string("NOT located"));
  return o;
}

Outcome nfl_equivalence() {
  Rng rng(404);
  std::size_t agree = 0, certified = 0, lunches = 0;
  std::string problem;
  for (const auto& inst : nfl_instances()) {
    NflVerdict v;
    try {
      v = nfl_verdict(inst.model, rng);
    } catch (const Error& e) {
      problem = e.what();
      continue;
    }
    if (v.no_free_lunch != inst.expect_nfl) continue;
    ++agree;
    const auto& t = inst.model.tree();
    if (v.no_free_lunch) {
      const auto& r = *v.measure_certificate.measure;
      const double pen = *minimal_penalty(inst.model, r, StoppingTime::root(t), StoppingTime::terminal(t)).values[0];
      certified += r.is_equivalent() && pen <= 1e-9;
    } else {
      ++lunches;
      const auto& x = *v.static_certificate.claim;
      const bool nonneg = std::all_of(x.values.begin(), x.values.end(), [](double a) { return a >= 0.0; });
      const bool nonzero = std::any_of(x.values.begin(), x.values.end(), [](double a) { return a > 0.0; });
      certified += nonneg && nonzero && price(inst.model, x, StoppingTime::root(t)).values[0] <= 1e-9;
    }
  }
  Outcome o{agree == 100 && certified == 100,
            std::to_string(agree) + "/100 four-way verdicts agree with the construction (" + std::to_string(lunches) +
                " free lunches), " + std::to_string(certified) + "/100 certificates validate"};
  if (!problem.empty()) o.summary += "; " + problem;
  return o;
}

Outcome bidual() {
  Rng rng(505);
  double worst = 0.0;
  int compared = 0;
  while (compared < 50) {
    const auto t = random_tree(rng, 1 + compared % 3, 1, 3);
    const auto m = random_model(rng, t);
    if (m.selection_count(300) > 300) continue;
    const auto tau = random_stopping_time(t, rng);
    const auto x = random_claim(tau, rng);
    const auto root = StoppingTime::root(t);
    const auto b = price_with_penalty(m, x, root, 300, [&](NodeId n, const std::vector<double>& law) {
      return minimal_penalty_at(m, n, tau, law);
    });
    track(worst, std::abs(b.values[0] - price(m, x, root).values[0]));
    ++compared;
  }
  return {worst <= 1e-9, "50 models, max |bidual - price| " + fmt(worst)};
}

Outcome sandwich() {
  Rng rng(606);
  std::size_t instances = 0, failed = 0, cases = 0;
  for (const auto& inst : nfl_instances()) {
    if (!inst.expect_nfl) continue;
    const auto& t = inst.model.tree();
    const auto cert = find_zero_penalty_equivalent_measure(inst.model);
    if (!cert.measure) {
      ++failed;
      continue;
    }
    std::vector<Claim> claims;
    for (int j = 0; j < 500; ++j) claims.push_back(random_claim(StoppingTime::terminal(t), rng));
    std::vector<StoppingTime> times;
    for (int j = 0; j < 10; ++j) times.push_back(random_stopping_time(t, rng));
    const auto r = check_supermartingale(inst.model, claims, *cert.measure, times);
    ++instances;
    cases += r.cases;
    failed += !r.passed();
  }
  return {failed == 0 && instances == 50,
          std::to_string(instances) + " certified instances x 500 claims x 10 stopping times, " +
              std::to_string(cases) + " inequalities, " + std::to_string(failed) + " failing instances at tol 1e-9"};
}

Outcome complete_market() {
  const auto t = FiltrationTree::regular(1, {0.5, 0.5});
  const Assets assets{multiplicative(t, {2.0, 0.5})};
  const Claim call(StoppingTime::terminal(t), {1.0, 0.0});
  const auto b = mme_bounds(t, assets, call);
  bool ok = std::abs(b.sub - 1.0 / 3) <= 1e-9 && std::abs(b.sup - 1.0 / 3) <= 1e-9;
  Rng rng(707);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto m = random_martingale_model(rng, t, assets);
    if (!check_extends_dynamics(m, assets).passed()) ok = false;
    const auto ba = bid_ask(m, call, StoppingTime::root(t));
    track(worst, std::abs(ba.ask.values[0] - 1.0 / 3));
    track(worst, std::abs(ba.bid.values[0] - 1.0 / 3));
  }
  ok = ok && worst <= 1e-12;
  return {ok, "mme bounds (" + fmt(b.sub) + ", " + fmt(b.sup) + "); 20 extending models, max |price - 1/3| " +
                  fmt(worst)};
}

Outcome bound_nesting() {
  const auto t = trinomial_tree();
  const auto assets = trinomial_assets(t);
  const auto y = terminal(t, {1.0, 0.0, 0.0});
  const auto b = mme_bounds(t, assets, y);
  bool ok = std::abs(b.sub) <= 1e-9 && std::abs(b.sup - 1.0 / 3) <= 1e-9;
  const auto band = calibrated_bounds(t, assets, {{"digital", y, 0.1, 0.2}}, y);
  ok = ok && Interval{0.1, 0.2}.contains(band);

  Rng rng(808);
  std::size_t widened = 0, outside_spread = 0;
  for (int set = 0; set < 50; ++set) {
    const auto x = random_claim(StoppingTime::terminal(t), rng);
    const auto m = mme_bounds(t, assets, x);
    Interval prev{m.sub, m.sup};
    std::vector<QuotedOption> quotes;
    for (int l = 0; l < 4; ++l) {
      const double mid = uniform(rng, -0.5, 0.5), w = uniform(rng, 0.0, 0.3);
      quotes.push_back({"q", random_claim(StoppingTime::terminal(t), rng), mid - w, mid + w});
      const auto c = calibrated_bounds(t, assets, quotes, x);
      widened += !prev.contains(c);
      prev = c;
      for (const auto& q : quotes)
        outside_spread += !Interval{q.bid, q.ask}.contains(calibrated_bounds(t, assets, quotes, q.payoff));
    }
  }
  ok = ok && widened == 0 && outside_spread == 0;
  return {ok, "mme (" + fmt(b.sub) + ", " + fmt(b.sup) + "), band [0.1, 0.2] gives [" + fmt(band.lower) + ", " +
                  fmt(band.upper) + "]; 50 quote sets: " + std::to_string(widened) + " widenings, " +
                  std::to_string(outside_spread) + " quoted bounds outside their spread"};
}

Outcome good_deals() {
  const auto t = trinomial_tree();
  const auto assets = trinomial_assets(t);
  const auto y = terminal(t, {1.0, 0.0, 0.0});
  const auto m = mme_bounds(t, assets, y);
  const auto huge = good_deal_bounds(t, assets, {1e6, {}}, y).bounds;
  const double d_huge = std::max(std::abs(huge.lower - m.sub), std::abs(huge.upper - m.sup));

  const auto bt = FiltrationTree::regular(2, {1.0 / 3, 2.0 / 3});
  const Assets bassets{multiplicative(bt, {2.0, 0.5})};
  Rng rng(909);
  double d_unit = 0.0;
  for (int i = 0; i < 10; ++i) {
    const auto x = random_claim(StoppingTime::terminal(bt), rng);
    const auto g = good_deal_bounds(bt, bassets, {1.0, {}}, x).bounds;
    const double ep = Measure::reference(bt).expectation(bt, x);
    track(d_unit, std::max(std::abs(g.lower - ep), std::abs(g.upper - ep)));
  }

  // Grid oracle over the family (u, 1 - 3u, 2u), endpoints refined by bisection.
  const double cap = 1.2;
  auto feasible = [&](double u) {
    const auto q = trinomial_kernel(u);
    return 3.0 * (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]) <= cap * cap;
  };
  const int n = 10000;
  const double step = 1.0 / (3.0 * n);
  double lo = kInfinity, hi = -kInfinity;
  for (int i = 0; i <= n; ++i)
    if (feasible(i * step)) {
      lo = std::min(lo, i * step);
      hi = std::max(hi, i * step);
    }
  auto refine = [&](double in, double out) {
    for (int k = 0; k < 60; ++k) {
      const double mid = 0.5 * (in + out);
      (feasible(mid) ? in : out) = mid;
    }
    return in;
  };
  lo = refine(lo, lo - step);
  hi = refine(hi, hi + step);
  const auto g = good_deal_bounds(t, assets, {cap, {}}, y).bounds;
  const double d_grid = std::max(std::abs(g.lower - lo), std::abs(g.upper - hi));
  return {d_huge <= 1e-6 && d_unit <= 1e-8 && d_grid <= 1e-6,
          "cap 1e6 vs mme " + fmt(d_huge) + ", cap 1 vs E_P " + fmt(d_unit) + ", cap 1.2 [" + fmt(g.lower) + ", " +
              fmt(g.upper) + "] vs grid " + fmt(d_grid)};
}

Outcome constrained() {
  const auto t = FiltrationTree::regular(1, {0.5, 0.5});
  const Assets assets{multiplicative(t, {2.0, 0.5})};
  const Claim call(StoppingTime::terminal(t), {1.0, 0.0});
  const double band = constrained_price(t, assets, ConstraintSet::segment(1, 0, 100.0), call).value;
  const double d_band = std::abs(band - 1.0 / 3);

  Rng rng(1010);
  std::size_t inexact = 0;
  for (int i = 0; i < 30; ++i) {
    const auto rt = random_tree(rng, 1 + i % 3, 1, 3);
    const Assets ra{random_asset(rng, rt)};
    const auto x = random_claim(StoppingTime::terminal(rt), rng);
    std::vector<double> best(rt.size(), -kInfinity);
    for (std::size_t k = 0; k < x.at.size(); ++k) best[x.at.cut()[k]] = x.values[k];
    const auto order = rt.topological_order();
    for (auto it = order.rbegin(); it != order.rend(); ++it)
      for (NodeId c : rt.children(*it)) best[*it] = std::max(best[*it], best[c]);
    inexact += constrained_price(rt, ra, ConstraintSet::zero(1), x).value != best[rt.root()];
  }

  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto rt = random_tree(rng, 1 + i % 2, 1, 3);
    const std::size_t d = 1 + i % 2;
    Assets ra;
    for (std::size_t k = 0; k < d; ++k) ra.push_back(random_asset(rng, rt));
    auto h = ConstraintSet::zero(d);
    for (std::size_t j = uniform_index(rng, 1, 3); j > 0; --j) {
      std::vector<double> v(d);
      for (auto& c : v) c = uniform(rng, -3.0, 3.0);
      h.vertices.push_back(v);
    }
    const auto x = random_claim(StoppingTime::terminal(rt), rng);
    track(worst, std::abs(constrained_price(rt, ra, h, x).value - constrained_oracle(rt, ra, h, x)));
  }
  return {d_band <= 1e-6 && inexact == 0 && worst <= 1e-6,
          "hedge band [-100, 100] call " + fmt(band) + "; no-hedging mismatches " + std::to_string(inexact) +
              "/30; 100 one/two-period instances, max |induction - oracle| " + fmt(worst)};
}

Outcome american() {
  Rng rng(1111);
  double worst = 0.0;
  std::size_t disagree = 0;
  for (int i = 0; i < 50; ++i) {
    const auto t = random_tree(rng, 1 + i % 3, 1, 3);
    ModelOptions opt;
    opt.penalty_prob = 0.0;
    const auto m = random_model(rng, t, opt);
    std::vector<double> y(t.size());
    for (auto& v : y) v = uniform(rng, -1.0, 1.0);
    const auto res = american_price(m, y, StoppingTime::root(t), StoppingTime::terminal(t), 1000000);
    track(worst, res.max_gap);
    disagree += !res.agree;
  }
  std::size_t convex_gaps = 0;
  double convex_worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto t = random_tree(rng, 1 + i % 3, 1, 3);
    const auto m = random_model(rng, t);
    std::vector<double> y(t.size());
    for (auto& v : y) v = uniform(rng, -1.0, 1.0);
    const auto res = american_price(m, y, StoppingTime::root(t), StoppingTime::terminal(t), 1000000);
    convex_gaps += !res.agree;
    track(convex_worst, res.max_gap);
  }
  return {disagree == 0 && worst <= 1e-9,
          "50 sublinear instances, max gap " + fmt(worst) + "; convex models (reported only): " +
              std::to_string(convex_gaps) + "/50 differ, max gap " + fmt(convex_worst)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"axiom suite", axioms},
      {"time consistency and cocycle", time_consistency},
      {"no-free-lunch equivalence", nfl_equivalence},
      {"bidual reproduces prices", bidual},
      {"sandwich and supermartingale", sandwich},
      {"complete-market collapse", complete_market},
      {"bound nesting", bound_nesting},
      {"good-deal limits", good_deals},
      {"constrained pricing", constrained},
      {"american pricing", american}};
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::printf("%s  %2zu  %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.summary.c_str(),
                secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
