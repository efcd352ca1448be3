#include "tcpp/random.hpp"
#include "tcpp/scenario.hpp"

#include <gtest/gtest.h>

using namespace tcpp;

namespace {

// Minimal penalty at the root as a mixture LP over explicitly enumerated selections.
double enumerated_minimal_penalty(const ScenarioModel& model, const StoppingTime& tau,
                                  const std::vector<double>& law) {
  const auto& tree = model.tree();
  const auto nodes = nodes_between(tree, tree.root(), tau);
  const auto root = StoppingTime::root(tree);
  std::vector<std::vector<double>> laws;
  std::vector<double> penalties;
  for_each_selection_on(model, nodes, 1'000'000, [&](const MeasureSelection& s) {
    auto kernel_of = [&](NodeId v) { return selected_kernel(model, s, v); };
    laws.push_back(kernel_conditional_law(tree, kernel_of, tree.root(), tau));
    penalties.push_back(aggregate_penalty(model, s, root, tau).values[0]);
  });
  lp::LinearProgram p(laws.size(), lp::Sense::minimize);
  p.objective = penalties;
  p.add_constraint(std::vector<double>(laws.size(), 1.0), lp::Relation::equal, 1.0);
  for (std::size_t k = 0; k < tau.size(); ++k) {
    std::vector<double> row(laws.size());
    for (std::size_t i = 0; i < laws.size(); ++i) row[i] = laws[i][k];
    p.add_constraint(row, lp::Relation::equal, law[k]);
  }
  const auto sol = lp::solve(p);
  return sol.status == lp::Status::optimal ? sol.value : kInfinity;
}

ScenarioModel one_period(std::vector<MenuEntry> menu, std::vector<double> p = {0.5, 0.5}) {
  const auto t = FiltrationTree::regular(1, p);
  std::vector<std::vector<MenuEntry>> menus(t.size());
  menus[0] = std::move(menu);
  return {t, std::move(menus)};
}

}  // namespace

TEST(SelectionToMeasure, ReferenceKernelsGiveUnitDensity) {
  Rng rng(1);
  const auto t = random_tree(rng, 3, 1, 3);
  const auto m = ScenarioModel::reference(t);
  const auto q = selection_to_measure(m, MeasureSelection{std::vector<std::size_t>(t.size(), 0)});
  for (double d : q.density) EXPECT_NEAR(d, 1.0, 1e-12);
}

TEST(SelectionToMeasure, BinomialRatio) {
  const auto m = one_period({{{1.0 / 3.0, 2.0 / 3.0}, 0.0}});
  const auto q = selection_to_measure(m, MeasureSelection{{0, 0, 0}});
  EXPECT_NEAR(q.density[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(q.density[1], 4.0 / 3.0, 1e-15);
  EXPECT_TRUE(q.is_probability(m.tree()));
}

TEST(SelectionToMeasure, ZeroComponentKillsLeaves) {
  const auto m = one_period({{{1.0, 0.0}, 0.0}});
  const auto q = selection_to_measure(m, MeasureSelection{{0, 0, 0}});
  EXPECT_EQ(q.density[1], 0.0);
  EXPECT_FALSE(q.is_equivalent());
}

TEST(Model, RejectsBadKernels) {
  EXPECT_THROW(one_period({{{0.5, 0.4}, 0.0}}), Error);
  EXPECT_THROW(one_period({{{1.2, -0.2}, 0.0}}), Error);
  EXPECT_THROW(one_period({{{1.0}, 0.0}}), Error);
  EXPECT_THROW(one_period({}), Error);
}

TEST(Model, NormalizationReport) {
  EXPECT_TRUE(one_period({{{0.5, 0.5}, 0.0}, {{1.0, 0.0}, 0.3}}).is_normalized());
  EXPECT_FALSE(one_period({{{0.5, 0.5}, 0.1}}).is_normalized());
  const auto r = one_period({{{0.5, 0.5}, 0.0}, {{1.0, 0.0}, -0.3}}).normalization_report();
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_NEAR(r.violations[0].defect, 0.3, 1e-15);
}

TEST(AggregatePenalty, EmptySumAndZeroPenalties) {
  Rng rng(2);
  const auto t = random_tree(rng, 3, 2, 3);
  ModelOptions opt;
  opt.penalty_prob = 0.0;
  const auto m = random_model(rng, t, opt);
  const MeasureSelection sel{std::vector<std::size_t>(t.size(), 0)};
  const auto mid = StoppingTime::at_time(t, 1);
  for (double v : aggregate_penalty(m, sel, mid, mid).values) EXPECT_EQ(v, 0.0);
  for (double v : aggregate_penalty(m, sel, StoppingTime::root(t), StoppingTime::terminal(t)).values)
    EXPECT_EQ(v, 0.0);
}

TEST(AggregatePenalty, DeterministicPenaltiesAddUp) {
  const auto t = FiltrationTree::regular(2, {0.5, 0.5});
  std::vector<std::vector<MenuEntry>> menus(t.size());
  menus[0] = {{{0.3, 0.7}, 0.1}};
  menus[1] = {{{0.9, 0.1}, 0.2}};
  menus[2] = {{{0.2, 0.8}, 0.2}};
  const ScenarioModel m(t, menus);
  const auto a = aggregate_penalty(m, MeasureSelection{std::vector<std::size_t>(t.size(), 0)},
                                   StoppingTime::root(t), StoppingTime::terminal(t));
  EXPECT_NEAR(a.values[0], 0.3, 1e-15);
}

TEST(AggregatePenalty, CocycleIdentityOnRandomTriples) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto t = random_tree(rng, 1 + trial % 4, 1, 3);
    const auto m = random_model(rng, t);
    MeasureSelection sel{std::vector<std::size_t>(t.size(), 0)};
    for (NodeId v : t.internal_nodes()) sel.choice[v] = uniform_index(rng, 0, m.menu(v).size() - 1);
    const auto tau = random_stopping_time(t, rng);
    const auto sigma = random_stopping_time_between(t, StoppingTime::root(t), tau, rng);
    const auto nu = random_stopping_time_between(t, StoppingTime::root(t), sigma, rng);
    const auto lhs = aggregate_penalty(m, sel, nu, tau);
    const auto inner = aggregate_penalty(m, sel, sigma, tau);
    const auto outer = aggregate_penalty(m, sel, nu, sigma);
    auto kernel_of = [&](NodeId v) { return selected_kernel(m, sel, v); };
    for (std::size_t k = 0; k < nu.size(); ++k) {
      const double rhs = outer.values[k] + kernel_expectation(t, kernel_of, inner, nu.cut()[k]);
      EXPECT_NEAR(lhs.values[k], rhs, 1e-12);
    }
  }
}

TEST(MinimalPenalty, ZeroPenaltySelection) {
  Rng rng(6);
  const auto t = random_tree(rng, 3, 2, 3);
  const auto m = random_model(rng, t);
  MeasureSelection sel{std::vector<std::size_t>(t.size(), 0)};
  for (NodeId v : t.internal_nodes())
    for (std::size_t e = 0; e < m.menu(v).size(); ++e)
      if (m.menu(v)[e].penalty == 0.0) sel.choice[v] = e;
  const auto r = selection_to_measure(m, sel);
  const auto a = minimal_penalty(m, r, StoppingTime::root(t), StoppingTime::terminal(t));
  EXPECT_NEAR(*a.values[0], 0.0, 1e-9);
}

TEST(MinimalPenalty, OutsideHullIsInfinite) {
  const auto m = one_period({{{0.5, 0.5}, 0.0}, {{0.6, 0.4}, 0.1}});
  const auto r = Measure::from_masses(m.tree(), {0.9, 0.1});
  const auto a = minimal_penalty(m, r, StoppingTime::root(m.tree()), StoppingTime::terminal(m.tree()));
  EXPECT_EQ(*a.values[0], kInfinity);
}

TEST(MinimalPenalty, HandComputedMixture) {
  const auto m = one_period({{{0.5, 0.5}, 0.0}, {{1.0, 0.0}, 1.0}});
  const auto r = Measure::from_masses(m.tree(), {0.75, 0.25});
  const auto a = minimal_penalty(m, r, StoppingTime::root(m.tree()), StoppingTime::terminal(m.tree()));
  EXPECT_NEAR(*a.values[0], 0.5, 1e-12);
}

TEST(MinimalPenalty, NullAtomsUndefined) {
  const auto t = FiltrationTree::regular(2, {0.5, 0.5});
  const auto m = ScenarioModel::reference(t);
  const auto r = Measure::from_masses(t, {0.5, 0.5, 0.0, 0.0});
  const auto a = minimal_penalty(m, r, StoppingTime::at_time(t, 1), StoppingTime::terminal(t));
  EXPECT_TRUE(a.values[0].has_value());
  EXPECT_FALSE(a.values[1].has_value());
}

TEST(MinimalPenalty, FlowProgramMatchesSelectionEnumeration) {
  Rng rng(8);
  for (int trial = 0; trial < 60; ++trial) {
    const auto t = random_tree(rng, 1 + trial % 3, 1, 2 + trial % 2);
    ModelOptions opt;
    opt.max_menu = 2;
    const auto m = random_model(rng, t, opt);
    if (m.selection_count(4096) > 4096) continue;
    const auto tau = random_stopping_time(t, rng);
    // Mixture of two selections (inside the hull) and a perturbed law (often outside).
    auto pick = [&] {
      MeasureSelection s{std::vector<std::size_t>(t.size(), 0)};
      for (NodeId v : t.internal_nodes()) s.choice[v] = uniform_index(rng, 0, m.menu(v).size() - 1);
      return s;
    };
    const auto q1 = selection_to_measure(m, pick()), q2 = selection_to_measure(m, pick());
    const double w = uniform(rng, 0.0, 1.0);
    std::vector<double> masses(t.num_leaves());
    for (std::size_t k = 0; k < masses.size(); ++k)
      masses[k] = w * q1.leaf_mass(t, k) + (1 - w) * q2.leaf_mass(t, k);
    if (trial % 3 == 2) {
      double s = 0.0;
      for (auto& x : masses) s += (x = 0.8 * x + 0.2 * uniform(rng, 0.0, 1.0) / masses.size());
      for (auto& x : masses) x /= s;
    }
    const auto r = Measure::from_masses(t, masses);
    const auto root = StoppingTime::root(t);
    const auto flow = minimal_penalty(m, r, root, tau);
    std::vector<double> law(tau.size());
    for (std::size_t k = 0; k < tau.size(); ++k) law[k] = r.mass(t, tau.cut()[k]);
    const double oracle = enumerated_minimal_penalty(m, tau, law);
    if (std::isinf(oracle))
      EXPECT_TRUE(std::isinf(*flow.values[0])) << "trial " << trial;
    else
      EXPECT_NEAR(*flow.values[0], oracle, 1e-9) << "trial " << trial;
  }
}

TEST(MinimalPenalty, NeverExceedsStatedPenalty) {
  Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const auto t = random_tree(rng, 1 + trial % 3, 1, 3);
    const auto m = random_model(rng, t);
    if (m.selection_count(2000) > 2000) continue;
    const auto root = StoppingTime::root(t), term = StoppingTime::terminal(t);
    for_each_selection(m, 2000, [&](const MeasureSelection& s) {
      const auto q = selection_to_measure(m, s);
      const double stated = aggregate_penalty(m, s, root, term).values[0];
      EXPECT_LE(*minimal_penalty(m, q, root, term).values[0], stated + 1e-9);
    });
  }
}

TEST(Nondegenerate, ReferencePasses) {
  Rng rng(10);
  const auto t = random_tree(rng, 3, 1, 3);
  EXPECT_TRUE(check_nondegenerate(ScenarioModel::reference(t)).passed());
}

TEST(Nondegenerate, CommonKilledChildFails) {
  const auto m = one_period({{{1.0, 0.0}, 0.0}, {{1.0, 0.0}, 0.2}});
  const auto r = check_nondegenerate(m);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(r.violations[0].location, "node 2");
}

TEST(Nondegenerate, JointSupportsCover) {
  const auto m = one_period({{{1.0, 0.0}, 0.0}, {{0.0, 1.0}, 0.0}});
  EXPECT_TRUE(check_nondegenerate(m).passed());
  // Union-of-supports oracle over the two selections.
  std::vector<bool> charged(2, false);
  for_each_selection(m, 10, [&](const MeasureSelection& s) {
    const auto q = selection_to_measure(m, s);
    for (std::size_t k = 0; k < 2; ++k) charged[k] = charged[k] || q.density[k] > 0.0;
  });
  EXPECT_TRUE(charged[0] && charged[1]);
}

TEST(Enumeration, OverflowThrows) {
  const auto t = FiltrationTree::regular(4, {0.5, 0.5});
  std::vector<std::vector<MenuEntry>> menus(t.size());
  for (NodeId v : t.internal_nodes()) menus[v] = {{{0.5, 0.5}, 0.0}, {{0.4, 0.6}, 0.1}};
  const ScenarioModel m(t, menus);
  try {
    for_each_selection(m, 1000, [](const MeasureSelection&) {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::enumeration_overflow);
  }
}
