#include <gtest/gtest.h>

#include <sstream>

#include "ambival/scenario.hpp"
#include "ambival/scenario_io.hpp"

using namespace ambival;

namespace {

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Lattice, BinomialShape) {
  const ScenarioLattice lat = binomial_tree(2, 0.5);
  EXPECT_EQ(lat.size(), 7u);
  EXPECT_EQ(lat.level_size(0), 1u);
  EXPECT_EQ(lat.level_size(1), 2u);
  EXPECT_EQ(lat.level_size(2), 4u);
  double total = 0;
  for (NodeId id : lat.level(2)) total += lat.path_probability(id);
  EXPECT_DOUBLE_EQ(total, 1.0);
  for (NodeId id : lat.level(2)) EXPECT_EQ(lat.ancestor(id, 0), 0u);
}

TEST(Lattice, RejectsBadProbabilities) {
  LatticeSpec spec;
  spec.horizon = 1;
  spec.transitions = [](const ScenarioLattice&, NodeId) { return std::vector<double>{0.6, 0.5}; };
  EXPECT_EQ(error_of([&] { build_lattice(spec); }), "node 0: probabilities sum to 1.1");
  spec.transitions = [](const ScenarioLattice&, NodeId) { return std::vector<double>{1.2, -0.2}; };
  EXPECT_NE(error_of([&] { build_lattice(spec); }).find("not strictly positive"), std::string::npos);
  spec.horizon = 0;
  EXPECT_THROW(build_lattice(spec), std::invalid_argument);
}

TEST(Lattice, PayloadsSeeAncestors) {
  LatticeSpec spec;
  spec.horizon = 3;
  spec.transitions = [](const ScenarioLattice&, NodeId) { return std::vector<double>{0.5, 0.5}; };
  spec.payloads = {{"S", [](const ScenarioLattice& lat, NodeId id) {
                      if (id == 0) return 1.0;
                      const NodeId p = lat.node(id).parent;
                      const bool up = lat.node(p).children.front() == id;
                      return lat.payload("S", p) * (up ? 1.1 : 0.9);
                    }}};
  const ScenarioLattice lat = build_lattice(spec);
  const auto l3 = lat.level(3);
  EXPECT_NEAR(lat.payload("S", l3.front()), 1.1 * 1.1 * 1.1, 1e-15);
  EXPECT_NEAR(lat.payload("S", l3.back()), 0.9 * 0.9 * 0.9, 1e-15);
}

TEST(Lattice, FromNodesRoundTrip) {
  std::vector<LatticeNode> nodes(4);
  nodes[1] = {0, 0, 0.25, {}};
  nodes[2] = {0, 0, 0.75, {}};
  nodes[3] = {1, 0, 1.0, {}};
  EXPECT_THROW(ScenarioLattice::from_nodes(2, nodes), std::invalid_argument);  // node 2 has no child
  nodes.push_back({2, 0, 1.0, {}});
  const ScenarioLattice lat = ScenarioLattice::from_nodes(2, nodes, {{"X", {0, 1, 2, 3, 4}}});
  std::ostringstream os;
  write_lattice(os, lat);
  std::istringstream is(os.str());
  const ScenarioLattice back = read_lattice(is);
  EXPECT_EQ(back.size(), lat.size());
  for (NodeId id = 0; id < lat.size(); ++id) {
    EXPECT_EQ(back.node(id).parent, lat.node(id).parent);
    EXPECT_EQ(back.node(id).prob, lat.node(id).prob);
    EXPECT_EQ(back.payload("X", id), lat.payload("X", id));
  }
}

TEST(Lattice, ReadRejectsMalformed) {
  std::istringstream bad("lattice\t1\npayloads\n0\t-\t1\n1\t0\t0.5\n2\t0\t0.6\n");
  EXPECT_EQ(error_of([&] { read_lattice(bad); }), "node 0: probabilities sum to 1.1");
  std::istringstream empty("");
  EXPECT_THROW(read_lattice(empty), std::invalid_argument);
}

TEST(Process, AdaptedAndPredictable) {
  const ScenarioLattice lat = binomial_tree(2, 0.3);
  AdaptedProcess x = make_process(lat, "x", 1, 2, [](NodeId id) { return static_cast<double>(id); });
  EXPECT_TRUE(is_adapted(lat, x));
  x.measurability = Measurability::predictable;
  EXPECT_FALSE(is_adapted(lat, x));
  AdaptedProcess h = make_process(lat, "h", 1, 3, [&](NodeId id) { return static_cast<double>(lat.node(id).parent); });
  h.measurability = Measurability::predictable;
  EXPECT_TRUE(is_adapted(lat, h));
  x.at(2).pop_back();
  EXPECT_FALSE(is_adapted(lat, x));
}

TEST(CondExpectation, TowerProperty) {
  const ScenarioLattice lat = uniform_tree(3, {0.2, 0.3, 0.5});
  std::vector<double> y;
  for (NodeId id : lat.level(3)) y.push_back(std::sin(static_cast<double>(id)));
  const auto e2 = cond_expectation(lat, y, 3, 2);
  const auto e0 = cond_expectation(lat, y, 3, 0);
  const auto e0b = cond_expectation(lat, e2, 2, 0);
  EXPECT_NEAR(e0[0], e0b[0], 1e-15);
  double direct = 0;
  for (NodeId id : lat.level(3)) direct += lat.path_probability(id) * y[lat.slot(id)];
  EXPECT_NEAR(e0[0], direct, 1e-15);
  EXPECT_EQ(cond_expectation(lat, y, 3, 3), y);
}

TEST(CondExpectation, WeightsMustBeDensitySteps) {
  const ScenarioLattice lat = binomial_tree(1, 0.5);
  const std::vector<double> y{1.0, 3.0};
  NodeWeights w{1.0, 1.5, 0.5};
  EXPECT_DOUBLE_EQ(cond_expectation(lat, y, 1, 0, &w)[0], 0.5 * 1.5 + 0.5 * 0.5 * 3.0);
  NodeWeights bad{1.0, 1.5, 0.6};
  EXPECT_NE(error_of([&] { cond_expectation(lat, y, 1, 0, &bad); }).find("invalid density step"), std::string::npos);
  NodeWeights neg{1.0, 2.0, 0.0};
  EXPECT_THROW(cond_expectation(lat, y, 1, 0, &neg), std::invalid_argument);
}

TEST(Paths, DeterministicAcrossThreadCounts) {
  InnovationSpec spec{2, {{"a", 1}, {"b", 2}}, false};
  set_max_threads(1);
  const PathSample one = simulate_paths(spec, 10000, 5);
  set_max_threads(0);
  const PathSample many = simulate_paths(spec, 10000, 5);
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t i = 0; i < 10000; ++i) ASSERT_EQ(one.draw(i, j), many.draw(i, j));
}

TEST(Paths, ColumnsAreIndependentOfEachOther) {
  const PathSample ab = simulate_paths({2, {{"a", 1}, {"b", 2}}, false}, 100, 1);
  const PathSample b = simulate_paths({2, {{"b", 2}}, false}, 100, 1);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(ab.draws("b")[i], b.draws("b")[i]);
}

TEST(Paths, AntitheticPairs) {
  const PathSample s = simulate_paths({1, {{"z", 1}}, true}, 1000, 2);
  for (std::size_t i = 0; i < 1000; i += 2) EXPECT_EQ(s.draws("z")[i], -s.draws("z")[i + 1]);
  EXPECT_NEAR(sample_mean(s.draws("z")), 0.0, 1e-15);
}

TEST(Paths, RoundTripAndValidation) {
  PathSample s = simulate_paths({2, {{"a", 1}, {"b", 2}}, true}, 64, 9);
  s.set_derived("y", std::vector<double>(64, 0.125));
  std::ostringstream os;
  write_paths(os, s);
  std::istringstream is(os.str());
  const PathSample back = read_paths(is);
  EXPECT_EQ(back.n_paths(), 64u);
  EXPECT_TRUE(back.antithetic());
  for (std::size_t i = 0; i < 64; ++i) {
    EXPECT_EQ(back.draws("a")[i], s.draws("a")[i]);
    EXPECT_EQ(back.draws("b")[i], s.draws("b")[i]);
    EXPECT_EQ(back.derived("y")[i], 0.125);
  }
  EXPECT_THROW(simulate_paths({2, {{"a", 3}}, false}, 10, 0), std::invalid_argument);
  EXPECT_THROW(s.draws("missing"), std::out_of_range);
}

TEST(Paths, AdaptedOnSample) {
  const PathSample s = simulate_paths({2, {{"a", 1}}, false}, 10, 0);
  AdaptedProcess p{"p", 0, {{1.0}, std::vector<double>(10, 2.0)}};
  EXPECT_TRUE(is_adapted(s, p));
  p.values[0] = {1.0, 2.0};
  EXPECT_FALSE(is_adapted(s, p));
}
