#include <gtest/gtest.h>

#include "ambival/oracle.hpp"
#include "ambival/valuation.hpp"

using namespace ambival;

namespace {

const RiskMeasureSpec kVar10{RiskKind::var, 0.1};

LatticeFamily two_point_family(const ScenarioLattice& lat) {
  // factors (1.5, 0.5) and (0.5, 1.5) on every binomial step with p = 1/2
  NodeWeights up(lat.size(), 1.0), down(lat.size(), 1.0);
  for (NodeId id = 1; id < lat.size(); ++id) {
    const bool first = lat.node(lat.node(id).parent).children.front() == id;
    up[id] = first ? 1.5 : 0.5;
    down[id] = first ? 0.5 : 1.5;
  }
  return table_family(lat, {up, down});
}

std::vector<Theta> grid_of(std::size_t k) {
  std::vector<Theta> g;
  for (std::size_t i = 0; i < k; ++i) g.push_back({static_cast<double>(i)});
  return g;
}

}  // namespace

TEST(Payoff, ZeroInputs) {
  const ScenarioLattice lat = binomial_tree(3, 0.4);
  const AdaptedProcess H = payoff_process(lat, constant_process(lat, "R", 0, 3, 0.0), constant_process(lat, "X", 1, 3, 0.0));
  EXPECT_EQ(H.first_time, 1);
  EXPECT_EQ(H.last_time(), 4);
  EXPECT_EQ(H.measurability, Measurability::predictable);
  for (const auto& layer : H.values)
    for (double v : layer) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(is_adapted(lat, H));
}

TEST(Payoff, HandExampleAndTelescoping) {
  const ScenarioLattice lat = uniform_tree(2, {1.0});
  AdaptedProcess R{"R", 0, {{1.0}, {0.5}, {0.0}}};
  AdaptedProcess X{"X", 1, {{0.2}, {0.0}}};
  const AdaptedProcess H = payoff_process(lat, R, X);
  EXPECT_EQ(H.at(1, 0), 0.0);
  EXPECT_NEAR(H.at(2, 0), 0.3, 1e-15);
  AdaptedProcess X0{"X", 1, {{0.0}, {0.0}}};
  EXPECT_EQ(payoff_process(lat, R, X0).at(3, 0), 1.0);
  R.at(2) = {0.1};
  EXPECT_THROW(payoff_process(lat, R, X), std::invalid_argument);
}

TEST(WorstCase, ReferenceGridAndConstants) {
  const ScenarioLattice lat = binomial_tree(1, 0.5);
  const LatticeFamily fam = two_point_family(lat);
  const std::vector<double> y{2.0, 6.0};
  EXPECT_EQ(worst_case_cond_exp(lat, y, 0, fam, {fam.reference}).value[0], 4.0);
  const std::vector<double> c{3.0, 3.0};
  for (Direction d : {Direction::inf, Direction::sup})
    EXPECT_NEAR(worst_case_cond_exp(lat, c, 0, fam, grid_of(2), d).value[0], 3.0, 1e-15);
}

TEST(WorstCase, TwoPointGridByHand) {
  const ScenarioLattice lat = binomial_tree(1, 0.5);
  const LatticeFamily fam = two_point_family(lat);
  const std::vector<double> y{2.0, 6.0};
  // theta 0: 0.5*1.5*2 + 0.5*0.5*6 = 3; theta 1: 0.5*0.5*2 + 0.5*1.5*6 = 5
  const WorstCase inf = worst_case_cond_exp(lat, y, 0, fam, grid_of(2), Direction::inf);
  const WorstCase sup = worst_case_cond_exp(lat, y, 0, fam, grid_of(2), Direction::sup);
  EXPECT_DOUBLE_EQ(inf.value[0], 3.0);
  EXPECT_EQ(inf.argopt[0], 0u);
  EXPECT_DOUBLE_EQ(sup.value[0], 5.0);
  EXPECT_EQ(sup.argopt[0], 1u);
  // ties go to the lowest index
  const std::vector<Theta> dup{{1.0}, {0.0}, {0.0}};
  EXPECT_EQ(worst_case_cond_exp(lat, y, 0, fam, dup, Direction::inf).argopt[0], 1u);
  EXPECT_THROW(worst_case_cond_exp(lat, y, 0, fam, {}), std::invalid_argument);
}

TEST(WorstCase, NonFiniteIsRejected) {
  const ScenarioLattice lat = binomial_tree(1, 0.5);
  const LatticeFamily fam = two_point_family(lat);
  const std::vector<double> y{INFINITY, 1.0};
  try {
    worst_case_cond_exp(lat, y, 0, fam, grid_of(2));
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("grid point 0"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("node 0"), std::string::npos);
  }
}

TEST(RecursionStep, DeterministicSurplusAndDeficit) {
  const ScenarioLattice lat = binomial_tree(1, 0.5);
  const LatticeFamily fam = two_point_family(lat);
  const std::vector<double> X{1.0, 1.0}, V{0.5, 0.5};
  const StepResult pos = recursion_step(lat, 0, std::vector<double>{2.0}, X, V, fam, grid_of(2));
  EXPECT_DOUBLE_EQ(pos.C[0], 0.5);
  EXPECT_DOUBLE_EQ(pos.V[0], 1.5);
  const StepResult neg = recursion_step(lat, 0, std::vector<double>{1.2}, X, V, fam, grid_of(2));
  EXPECT_EQ(neg.C[0], 0.0);
  EXPECT_EQ(neg.V[0], 1.2);
}

TEST(RecursionStep, BinomialSinglePriorByHand) {
  const ScenarioLattice lat = binomial_tree(1, 0.25);
  const LatticeFamily fam = table_family(lat, {});
  const std::vector<double> X{3.0, 0.0}, V{0.0, 0.0};
  // W = (1 - 3, 1 - 0) -> E[W^+] = 0.75
  const StepResult r = recursion_step(lat, 0, std::vector<double>{1.0}, X, V, fam, {fam.reference});
  EXPECT_DOUBLE_EQ(r.C[0], 0.75);
  EXPECT_DOUBLE_EQ(r.V[0], 0.25);
}

TEST(Value, ZeroCashFlow) {
  const OracleInstance inst = random_oracle_instance(1, 0);
  const CashFlowSpec cf(inst.lattice, constant_process(inst.lattice, "X", 1, inst.lattice.horizon(), 0.0));
  const ValuationOutput out = value_multiprior(inst.lattice, cf, kVar10, inst.family, inst.grid);
  for (const auto* p : {&out.R, &out.C, &out.V})
    for (const auto& layer : p->values)
      for (double v : layer) EXPECT_EQ(v, 0.0);
  for (const auto& layer : out.diagnostics.margin)
    for (double v : layer) EXPECT_EQ(v, 0.0);
  for (const auto& tau : optimal_default_times(inst.lattice, out))
    for (int s : tau.leaf_value) EXPECT_EQ(s, inst.lattice.horizon() + 1);
}

TEST(Value, DeterministicTotalGivesItsValue) {
  const double c = 1.7;
  LatticeSpec spec;
  spec.horizon = 2;
  spec.transitions = [](const ScenarioLattice&, NodeId) { return std::vector<double>{0.2, 0.3, 0.5}; };
  spec.payloads = {{"Z", [](const ScenarioLattice&, NodeId id) { return std::sin(3.0 * static_cast<double>(id)); }}};
  const ScenarioLattice lat = build_lattice(spec);
  const AdaptedProcess X = make_process(lat, "X", 1, 2, [&](NodeId id) {
    return lat.node(id).time == 1 ? lat.payload("Z", id) : c - lat.payload("Z", lat.node(id).parent);
  });
  const CashFlowSpec cf(lat, X);
  const LatticeFamily fam = tilt_family("Z");
  for (RiskMeasureSpec rm : {RiskMeasureSpec{RiskKind::var, 0.3}, RiskMeasureSpec{RiskKind::avar, 0.05}}) {
    const ValuationOutput out = value_multiprior(lat, cf, rm, fam, {{-1.0}, {0.0}, {2.0}});
    EXPECT_NEAR(out.V0(), c, 1e-12);
    for (const auto& layer : out.diagnostics.margin)
      for (double v : layer) EXPECT_NEAR(v, 0.0, 1e-12);
  }
}

TEST(Value, InvariantsOnRandomLattices) {
  for (std::uint64_t k = 0; k < 100; ++k) {
    const OracleInstance inst = random_oracle_instance(7, k);
    const ValuationOutput out = value_multiprior(inst.lattice, inst.cash_flow, inst.rm, inst.family, inst.grid);
    const int T = inst.lattice.horizon();
    for (int t = 0; t <= T; ++t)
      for (std::size_t s = 0; s < out.V.at(t).size(); ++s) {
        EXPECT_EQ(out.V.at(t, s), out.R.at(t, s) - out.C.at(t, s));
        EXPECT_GE(out.C.at(t, s), 0.0);
      }
    EXPECT_LE(out.lower, out.V0() + 1e-12);
    EXPECT_LE(out.V0(), out.upper + 1e-12);
    EXPECT_LE(out.upper, upper_bound(inst.lattice, inst.cash_flow, inst.family, inst.grid, BoundMode::rectangular));
    EXPECT_GE(out.upper + 1e-12,
              upper_bound(inst.lattice, inst.cash_flow, inst.family, inst.grid, BoundMode::constant));
  }
}

TEST(Value, SinglePriorIsSingletonGrid) {
  for (std::uint64_t k = 0; k < 20; ++k) {
    const OracleInstance inst = random_oracle_instance(3, k);
    const Theta th = inst.grid.back();
    const ValuationOutput a = value_singleprior(inst.lattice, inst.cash_flow, inst.rm, inst.family, th);
    const ValuationOutput b = value_multiprior(inst.lattice, inst.cash_flow, inst.rm, inst.family, {th});
    EXPECT_EQ(a.V0(), b.V0());
    EXPECT_EQ(a.lower, a.V0());
    const auto [lb, arg] = lower_bound(inst.lattice, inst.cash_flow, inst.rm, inst.family, {th});
    EXPECT_EQ(lb, a.V0());
    EXPECT_EQ(arg, 0u);
  }
}

TEST(Value, GridMonotonicity) {
  for (std::uint64_t k = 0; k < 50; ++k) {
    const OracleInstance inst = random_oracle_instance(11, k);
    if (inst.grid.size() < 2) continue;
    std::vector<Theta> small(inst.grid.begin(), inst.grid.end() - 1);
    const ValuationOutput a = value_multiprior(inst.lattice, inst.cash_flow, inst.rm, inst.family, small);
    const ValuationOutput b = value_multiprior(inst.lattice, inst.cash_flow, inst.rm, inst.family, inst.grid);
    EXPECT_GE(b.V0(), a.V0() - 1e-12);
    // one step at fixed inputs: C can only fall, V only rise, on the larger grid
    const int T = inst.lattice.horizon();
    const auto sa = recursion_step(inst.lattice, T - 1, a.R.at(T - 1), inst.cash_flow.x(T), a.V.at(T), inst.family, small);
    const auto sb = recursion_step(inst.lattice, T - 1, a.R.at(T - 1), inst.cash_flow.x(T), a.V.at(T), inst.family, inst.grid);
    for (std::size_t s = 0; s < sa.C.size(); ++s) EXPECT_LE(sb.C[s], sa.C[s]);
  }
}

TEST(Value, PhiAxioms) {
  for (std::uint64_t k = 0; k < 200; ++k) {
    const OracleInstance inst = random_oracle_instance(13, k);
    const ScenarioLattice& lat = inst.lattice;
    const int t = 0;
    std::vector<double> y(lat.level_size(1));
    const NormalStream rng(k, stream_id("phi"));
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = rng(i);
    const double base = phi_step(lat, t, y, inst.rm, inst.family, inst.grid)[0];
    auto shifted = y;
    for (double& v : shifted) v += 0.37;
    EXPECT_NEAR(phi_step(lat, t, shifted, inst.rm, inst.family, inst.grid)[0], base + 0.37, 1e-10);
    auto bigger = y;
    for (std::size_t i = 0; i < bigger.size(); ++i) bigger[i] += std::abs(rng(100 + i));
    EXPECT_GE(phi_step(lat, t, bigger, inst.rm, inst.family, inst.grid)[0], base - 1e-10);
    EXPECT_EQ(phi_step(lat, t, std::vector<double>(y.size(), 0.0), inst.rm, inst.family, inst.grid)[0], 0.0);
  }
}

TEST(Value, PrudenceOrdering) {
  for (std::uint64_t k = 0; k < 100; ++k) {
    const OracleInstance inst = random_oracle_instance(17, k);
    auto v0 = [&](RiskMeasureSpec rm) {
      return value_multiprior(inst.lattice, inst.cash_flow, rm, inst.family, inst.grid).V0();
    };
    const double q = inst.rm.level;
    EXPECT_GE(v0({RiskKind::var, q / 2}), v0({RiskKind::var, q}) - 1e-12);
    EXPECT_GE(v0({RiskKind::avar, q}), v0({RiskKind::var, q}) - 1e-12);
  }
}

TEST(DefaultTimes, FirstDeficit) {
  const ScenarioLattice lat = binomial_tree(2, 0.5);
  // large payment on the first branch at t = 1
  const AdaptedProcess X = make_process(lat, "X", 1, 2, [&](NodeId id) { return id == 1 ? 10.0 : 0.1; });
  const CashFlowSpec cf(lat, X);
  const LatticeFamily fam = two_point_family(lat);
  const ValuationOutput out = value_multiprior(lat, cf, {RiskKind::var, 0.6}, fam, grid_of(2));
  const auto taus = optimal_default_times(lat, out);
  ASSERT_EQ(taus.size(), 2u);
  for (NodeId leaf : lat.level(2)) {
    const bool below1 = lat.ancestor(leaf, 1) == 1;
    const bool deficit1 = out.R.at(0, 0) - 10.0 - out.V.at(1, 0) < 0;
    ASSERT_TRUE(deficit1);
    if (below1) EXPECT_EQ(taus[0].leaf_value[lat.slot(leaf)], 1);
  }
  for (const auto& tau : taus) EXPECT_NO_THROW(check_stopping_time(lat, tau));
}

TEST(DefaultTimes, StoppingAtTauStarAttainsC) {
  for (std::uint64_t k = 0; k < 50; ++k) {
    const OracleInstance inst = random_oracle_instance(19, k);
    const ScenarioLattice& lat = inst.lattice;
    const ValuationOutput out = value_multiprior(lat, inst.cash_flow, inst.rm, inst.family, inst.grid);
    const StoppingTime tau = optimal_default_times(lat, out)[0];
    const DensityProcess d = density_process(lat, inst.family, worst_case_selection(lat, out, inst.grid));
    const AdaptedProcess H = payoff_process(lat, out.R, inst.cash_flow.residual);
    double e = 0.0;
    for (NodeId leaf : lat.level(lat.horizon())) {
      const int s = tau.leaf_value[lat.slot(leaf)];
      const double h = H.at(s)[lat.slot(lat.ancestor(leaf, std::min(s, lat.horizon())))];
      e += lat.path_probability(leaf) * d.at(leaf) * h;
    }
    EXPECT_NEAR(e, out.C0(), 1e-12);
  }
}

TEST(Supermartingale, DeterministicCashFlowHasZeroMargin) {
  const ScenarioLattice lat = uniform_tree(3, {0.5, 0.5});
  const CashFlowSpec cf(lat, make_process(lat, "X", 1, 3, [&](NodeId id) { return 0.5 * lat.node(id).time; }));
  const ValuationOutput out = value_multiprior(lat, cf, kVar10, two_point_family(lat), grid_of(2));
  for (const auto& layer : out.diagnostics.margin)
    for (double v : layer) EXPECT_NEAR(v, 0.0, 1e-12);
  EXPECT_EQ(out.diagnostics.violations, 0u);
  EXPECT_NEAR(out.V0(), 3.0, 1e-12);
}

TEST(CashFlow, ResidualAndLiabilityValue) {
  const ScenarioLattice lat = binomial_tree(2, 0.5);
  const CashFlowSpec cf(lat, constant_process(lat, "Xo", 1, 2, 3.0), constant_process(lat, "Xr", 1, 2, 1.0));
  for (int t = 1; t <= 2; ++t)
    for (double v : cf.x(t)) EXPECT_EQ(v, 2.0);
  EXPECT_THROW(CashFlowSpec(lat, constant_process(lat, "Xo", 1, 1, 3.0)), std::invalid_argument);
  EXPECT_EQ(liability_value(1.5, 0.0), 1.5);
  EXPECT_EQ(liability_value(0.0, 7.0), 7.0);
  EXPECT_DOUBLE_EQ(liability_value(1.491, 2.0), 3.491);
}

TEST(SampleBackend, NeedsClosedFormLayer) {
  const PathSample paths = simulate_paths({2, {{"e", 1}}, false}, 100, 0);
  SampleLayerModel lm;
  lm.horizon = 2;
  try {
    value_sample(paths, lm, kVar10, {{0.0}});
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "conditional layer unavailable at t=1");
  }
}

TEST(SampleBackend, SinglePeriodMatchesDirectComputation) {
  const PathSample paths = simulate_paths({1, {{"e", 1}}, false}, 5000, 3);
  SampleLayerModel lm;
  lm.horizon = 1;
  lm.layer_sum = [](const PathSample& p, const Theta* th, std::span<double> out) {
    const double shift = th ? (*th)[0] : 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 + shift + p.draws("e")[i];
  };
  const SampleValuation v = value_sample(paths, lm, kVar10, {{0.0}, {0.3}});
  std::vector<double> z(5000);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = -(1.0 + paths.draws("e")[i]);
  EXPECT_EQ(v.R0, var_empirical(z, 0.1));
  EXPECT_EQ(v.theta_star, 1u);  // the upward shift lowers E[(R0 - Y)^+]
  EXPECT_EQ(v.V0, v.R0 - v.C0);
}
