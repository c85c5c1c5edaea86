#include <gtest/gtest.h>

#include "ambival/oracle.hpp"
#include "ambival/priors.hpp"

using namespace ambival;

namespace {

// Random factor tables on `lat`, each with conditional mean one.
std::vector<NodeWeights> random_tables(const ScenarioLattice& lat, std::size_t k, std::uint64_t seed) {
  const NormalStream rng(seed, stream_id("tables"));
  std::uint64_t draw = 0;
  std::vector<NodeWeights> out;
  for (std::size_t g = 0; g < k; ++g) {
    NodeWeights w(lat.size(), 1.0);
    for (NodeId p = 0; p < lat.size(); ++p) {
      const auto& ch = lat.node(p).children;
      double m = 0;
      for (NodeId c : ch) m += lat.node(c).prob * (w[c] = 0.1 + 2.0 * rng.uniform(draw++));
      for (NodeId c : ch) w[c] /= m;
    }
    out.push_back(std::move(w));
  }
  return out;
}

NodeSelection random_selection(const ScenarioLattice& lat, std::size_t k, std::uint64_t seed) {
  const NormalStream rng(seed, stream_id("selection"));
  return selection_from_parents(lat, [&](NodeId p) {
    return Theta{static_cast<double>(static_cast<std::size_t>(rng.uniform(p) * static_cast<double>(k)))};
  });
}

}  // namespace

TEST(Density, HandChosenBinomialFactors) {
  const ScenarioLattice lat = binomial_tree(2, 0.5);
  NodeWeights w(lat.size(), 1.0);
  w[1] = 1.2;
  w[2] = 0.8;
  for (NodeId id : lat.level(2)) w[id] = lat.node(lat.node(id).parent).children.front() == id ? 0.9 : 1.1;
  const DensityProcess d = density_from_steps(lat, w);
  std::vector<double> leaves;
  for (NodeId id : lat.level(2)) leaves.push_back(d.at(id));
  const std::vector<double> expected{1.08, 1.32, 0.72, 0.88};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(leaves[i], expected[i], 1e-15);
  EXPECT_TRUE(check_density(lat, d).ok());
}

TEST(Density, ReferenceSelectionIsIdentity) {
  const ScenarioLattice lat = uniform_tree(3, {0.2, 0.5, 0.3});
  const LatticeFamily fam = table_family(lat, random_tables(lat, 2, 1));
  const DensityProcess d = density_process(lat, fam, fam.reference);
  for (double v : d.value) EXPECT_EQ(v, 1.0);
}

TEST(Density, RandomSelectionsAreMartingales) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const OracleInstance inst = random_oracle_instance(seed, 0);
    const LatticeFamily fam = table_family(inst.lattice, random_tables(inst.lattice, 3, seed));
    const DensityProcess d = density_process(inst.lattice, fam, random_selection(inst.lattice, 3, seed));
    const DensityCheck chk = check_density(inst.lattice, d);
    EXPECT_TRUE(chk.positive);
    EXPECT_LE(chk.max_martingale_error, 1e-10);
    EXPECT_LE(chk.max_normalization_error, 1e-10);
  }
}

TEST(Density, RejectsNonMeasurableSelection) {
  const ScenarioLattice lat = binomial_tree(2, 0.5);
  NodeSelection sel = constant_selection(lat, {0.0});
  sel.theta[lat.level(2)[1]] = {1.0};
  try {
    check_measurable(lat, sel);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("selection reads future information at t=2"), std::string::npos);
  }
}

TEST(Density, TableFamilyRejectsBadTables) {
  const ScenarioLattice lat = binomial_tree(1, 0.5);
  EXPECT_THROW(table_family(lat, {{1.0, 1.5, 0.6}}), std::invalid_argument);
  EXPECT_THROW(table_family(lat, {{1.0, 2.0, 0.0}}), std::invalid_argument);
  const LatticeFamily fam = table_family(lat, {{1.0, 1.5, 0.5}});
  EXPECT_THROW(density_step(fam, lat, 1, Theta{3.0}), std::invalid_argument);
  EXPECT_THROW(density_step(fam, lat, 1, Theta{0.0, 1.0}), std::invalid_argument);
}

TEST(Density, TiltFamilyNormalised) {
  LatticeSpec spec;
  spec.horizon = 2;
  spec.transitions = [](const ScenarioLattice&, NodeId) { return std::vector<double>{0.1, 0.6, 0.3}; };
  spec.payloads = {{"x", [](const ScenarioLattice&, NodeId id) { return std::cos(static_cast<double>(id)); }}};
  const ScenarioLattice lat = build_lattice(spec);
  const LatticeFamily fam = tilt_family("x");
  for (double th : {-2.0, 0.0, 0.7})
    EXPECT_TRUE(check_density(lat, density_process(lat, fam, Theta{th})).ok(1e-12));
}

TEST(Paste, ConstantStoppingTimes) {
  const ScenarioLattice lat = uniform_tree(3, {0.5, 0.25, 0.25});
  const LatticeFamily fam = table_family(lat, random_tables(lat, 2, 4));
  const DensityProcess d1 = density_process(lat, fam, Theta{0.0});
  const DensityProcess d2 = density_process(lat, fam, Theta{1.0});
  const DensityProcess p0 = paste(lat, d1, d2, StoppingTime::constant(lat, 0));
  const DensityProcess pT = paste(lat, d1, d2, StoppingTime::constant(lat, 3));
  for (NodeId id = 0; id < lat.size(); ++id) {
    EXPECT_NEAR(p0.at(id), d2.at(id), 1e-14);
    EXPECT_NEAR(pT.at(id), d1.at(id), 1e-14);
  }
  // tau = 1: f_1(theta1), then f_s(theta2)
  const DensityProcess p1 = paste(lat, d1, d2, StoppingTime::constant(lat, 1));
  const DensityProcess direct = density_process(
      lat, fam, selection_from_parents(lat, [&](NodeId p) { return Theta{lat.node(p).time == 0 ? 0.0 : 1.0}; }));
  for (NodeId id = 0; id < lat.size(); ++id) EXPECT_NEAR(p1.at(id), direct.at(id), 1e-14);
}

TEST(Paste, ClosureUnderRandomStoppingTimes) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const OracleInstance inst = random_oracle_instance(seed, 1);
    const ScenarioLattice& lat = inst.lattice;
    const LatticeFamily fam = table_family(lat, random_tables(lat, 3, seed));
    const NodeSelection s1 = random_selection(lat, 3, 2 * seed), s2 = random_selection(lat, 3, 2 * seed + 1);
    const auto taus = enumerate_stopping_times(lat, 1);
    const StoppingTime& tau = taus[seed % taus.size()];
    const DensityProcess pasted = paste(lat, density_process(lat, fam, s1), density_process(lat, fam, s2), tau);
    const DensityProcess spliced = density_process(lat, fam, splice(lat, s1, s2, tau));
    for (NodeId id = 0; id < lat.size(); ++id) ASSERT_NEAR(pasted.at(id), spliced.at(id), 1e-12);
    EXPECT_TRUE(check_density(lat, pasted).ok());
  }
}

TEST(Paste, RejectsNonStoppingTime) {
  const ScenarioLattice lat = binomial_tree(2, 0.5);
  StoppingTime tau = StoppingTime::constant(lat, 3);
  tau.leaf_value[0] = 1;  // stops at 1 on one leaf only: depends on time-2 information
  const DensityProcess d{std::vector<double>(lat.size(), 1.0)};
  EXPECT_THROW(paste(lat, d, d, tau), std::invalid_argument);
  tau.leaf_value[1] = 1;
  EXPECT_NO_THROW(paste(lat, d, d, tau));
}

TEST(Density, ConvexCombinations) {
  const ScenarioLattice lat = uniform_tree(2, {0.3, 0.7});
  const LatticeFamily fam = table_family(lat, random_tables(lat, 2, 9));
  const DensityProcess a = density_process(lat, fam, Theta{0.0}), b = density_process(lat, fam, Theta{1.0});
  for (double c : {0.0, 0.25, 0.5, 1.0}) EXPECT_TRUE(check_density(lat, convex_combination(a, b, c)).ok());
  EXPECT_THROW(convex_combination(a, b, 1.5), std::invalid_argument);
}
