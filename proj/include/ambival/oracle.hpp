#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ambival/priors.hpp"
#include "ambival/scenario.hpp"
#include "ambival/util.hpp"
#include "ambival/valuation.hpp"

namespace ambival {

inline constexpr double kDefaultOracleCap = 1e6;

namespace detail {

// Terminal nodes below `id`, in slot order (contiguous for level-ordered lattices).
inline std::vector<NodeId> subtree_leaves(const ScenarioLattice& lat, NodeId id) {
  std::vector<NodeId> cur{id};
  while (lat.node(cur.front()).time < lat.horizon()) {
    std::vector<NodeId> next;
    for (NodeId n : cur)
      for (NodeId c : lat.node(n).children) next.push_back(c);
    cur = std::move(next);
  }
  return cur;
}

// Decision nodes (levels < T) of the subtree, parents first.
inline std::vector<NodeId> subtree_decision_nodes(const ScenarioLattice& lat, NodeId id) {
  std::vector<NodeId> out, cur{id};
  while (!cur.empty() && lat.node(cur.front()).time < lat.horizon()) {
    out.insert(out.end(), cur.begin(), cur.end());
    std::vector<NodeId> next;
    for (NodeId n : cur)
      for (NodeId c : lat.node(n).children) next.push_back(c);
    cur = std::move(next);
  }
  return out;
}

inline double count_rules(const ScenarioLattice& lat, NodeId id, int t_start) {
  const int s = lat.node(id).time;
  if (s == lat.horizon()) return s >= t_start ? 2.0 : 1.0;
  double prod = 1.0;
  for (NodeId c : lat.node(id).children) prod *= count_rules(lat, c, t_start);
  return s >= t_start ? 1.0 + prod : prod;
}

inline std::vector<std::vector<int>> rules(const ScenarioLattice& lat, NodeId id, int t_start) {
  const int s = lat.node(id).time;
  const int T = lat.horizon();
  if (s == T) {
    if (s >= t_start) return {{T}, {T + 1}};
    return {{T + 1}};
  }
  std::vector<std::vector<int>> acc{{}};
  for (NodeId c : lat.node(id).children) {
    const auto sub = rules(lat, c, t_start);
    std::vector<std::vector<int>> next;
    next.reserve(acc.size() * sub.size());
    for (const auto& a : acc)
      for (const auto& b : sub) {
        auto v = a;
        v.insert(v.end(), b.begin(), b.end());
        next.push_back(std::move(v));
      }
    acc = std::move(next);
  }
  if (s >= t_start) acc.insert(acc.begin(), std::vector<int>(subtree_leaves(lat, id).size(), s));
  return acc;
}

}  // namespace detail

// Stopping rules on the subtree of `anchor` with tau >= t_start; entry i of a
// rule is tau on the i-th terminal node of the subtree. Stopping at s is
// decided at the level-s nodes.
inline std::vector<std::vector<int>> enumerate_stopping_times(const ScenarioLattice& lat, NodeId anchor, int t_start,
                                                              double cap = kDefaultOracleCap) {
  if (t_start < 1 || t_start > lat.horizon() + 1) throw std::invalid_argument("enumerate_stopping_times: bad t_start");
  const double count = detail::count_rules(lat, anchor, t_start);
  if (count > cap)
    throw std::length_error("stopping-time enumeration needs about " + format_number(count, 3) +
                            " rules, above the cap " + format_number(cap, 3));
  return detail::rules(lat, anchor, t_start);
}

inline std::vector<StoppingTime> enumerate_stopping_times(const ScenarioLattice& lat, int t_start,
                                                          double cap = kDefaultOracleCap) {
  std::vector<StoppingTime> out;
  for (auto& r : enumerate_stopping_times(lat, 0, t_start, cap)) out.push_back(StoppingTime{std::move(r)});
  return out;
}

inline double count_selections(const ScenarioLattice& lat, NodeId anchor, std::size_t grid_size) {
  return std::pow(static_cast<double>(grid_size),
                  static_cast<double>(detail::subtree_decision_nodes(lat, anchor).size()));
}

// All adapted theta assignments: one grid index per decision node.
inline std::vector<NodeSelection> enumerate_selections(const ScenarioLattice& lat, const std::vector<Theta>& grid,
                                                       double cap = kDefaultOracleCap) {
  if (grid.empty()) throw std::invalid_argument("enumerate_selections: empty grid");
  const double count = count_selections(lat, 0, grid.size());
  if (count > cap)
    throw std::length_error("selection enumeration needs " + format_number(count, 3) + " selections, above the cap " +
                            format_number(cap, 3));
  const auto dec = detail::subtree_decision_nodes(lat, 0);
  std::vector<std::size_t> digit(dec.size(), 0);
  std::vector<NodeSelection> out;
  while (true) {
    std::vector<std::size_t> pick(lat.size(), 0);
    for (std::size_t i = 0; i < dec.size(); ++i) pick[dec[i]] = digit[i];
    out.push_back(selection_from_parents(lat, [&](NodeId p) { return grid[pick[p]]; }));
    std::size_t i = 0;
    while (i < digit.size() && ++digit[i] == grid.size()) digit[i++] = 0;
    if (i == digit.size()) break;
  }
  return out;
}

struct OracleResult {
  std::vector<double> sup_inf;   // per node of level t: sup_tau inf_Q E_t^Q[H_tau - H_{t+1}]
  std::vector<double> inf_sup;   // inf_Q sup_tau
  std::vector<double> envelope;  // multiple-prior Snell recursion
  double rules = 0, selections = 0;
};

// Brute force over all stopping rules tau >= t+1 and all rectangular
// selections below each level-t node. H restarts at t+1 so the result is
// directly comparable with C_t.
inline OracleResult snell_bruteforce(const ScenarioLattice& lat, const CashFlowSpec& cf, const AdaptedProcess& R,
                                     const LatticeFamily& fam, const std::vector<Theta>& grid, int t,
                                     double cap = kDefaultOracleCap) {
  if (grid.empty()) throw std::invalid_argument("snell_bruteforce: empty grid");
  const int T = lat.horizon();
  if (t < 0 || t >= T) throw std::invalid_argument("snell_bruteforce: t out of range");
  const AdaptedProcess H = payoff_process(lat, R, cf.residual);
  OracleResult out;
  for (NodeId anchor : lat.level(t)) {
    const auto leaves = detail::subtree_leaves(lat, anchor);
    const auto dec = detail::subtree_decision_nodes(lat, anchor);
    const double n_rules = detail::count_rules(lat, anchor, t + 1);
    const double n_sel = count_selections(lat, anchor, grid.size());
    if (n_rules > cap || n_sel > cap || n_rules * n_sel > 1e3 * cap)
      throw std::length_error("oracle instance too large: " + format_number(n_rules, 3) + " rules x " +
                              format_number(n_sel, 3) + " selections");
    const double h0 = H.at(t + 1)[lat.slot(lat.ancestor(leaves.front(), std::min(t + 1, T)))];
    auto h_at = [&](NodeId leaf, int s) { return H.at(s)[lat.slot(lat.ancestor(leaf, std::min(s, T)))] - h0; };

    // leaf weights under every selection, relative to the anchor
    std::vector<double> step_cache(lat.size() * grid.size(), 0.0);
    for (NodeId p : dec)
      for (NodeId c : lat.node(p).children)
        for (std::size_t g = 0; g < grid.size(); ++g)
          step_cache[c * grid.size() + g] = lat.node(c).prob * density_step(fam, lat, c, grid[g]);
    const auto S = static_cast<Eigen::Index>(n_sel);
    const auto nl = static_cast<Eigen::Index>(leaves.size());
    Eigen::MatrixXd Q(nl, S);
    std::vector<std::size_t> digit(dec.size(), 0), pick(lat.size(), 0);
    std::vector<double> w(lat.size(), 0.0);
    for (Eigen::Index sel = 0; sel < S; ++sel) {
      for (std::size_t i = 0; i < dec.size(); ++i) pick[dec[i]] = digit[i];
      w[anchor] = 1.0;
      for (NodeId p : dec)
        for (NodeId c : lat.node(p).children) w[c] = w[p] * step_cache[c * grid.size() + pick[p]];
      for (Eigen::Index l = 0; l < nl; ++l) Q(l, sel) = w[leaves[static_cast<std::size_t>(l)]];
      std::size_t i = 0;
      while (i < digit.size() && ++digit[i] == grid.size()) digit[i++] = 0;
    }

    const auto taus = enumerate_stopping_times(lat, anchor, t + 1, cap);
    Eigen::RowVectorXd payoff(nl);
    Eigen::RowVectorXd col_max = Eigen::RowVectorXd::Constant(S, -std::numeric_limits<double>::infinity());
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& tau : taus) {
      for (Eigen::Index l = 0; l < nl; ++l)
        payoff(l) = h_at(leaves[static_cast<std::size_t>(l)], tau[static_cast<std::size_t>(l)]);
      const Eigen::RowVectorXd row = payoff * Q;
      best = std::max(best, row.minCoeff());
      col_max = col_max.cwiseMax(row);
    }
    out.sup_inf.push_back(best);
    out.inf_sup.push_back(col_max.minCoeff());
    out.rules = std::max(out.rules, n_rules);
    out.selections = std::max(out.selections, n_sel);

    // U_s = max(H_s, inf_theta E_s^theta[U_{s+1}]) on levels s > t; U_{T+1} = H_{T+1}
    std::vector<double> u(lat.size(), 0.0);
    for (auto it = dec.rbegin(); it != dec.rend(); ++it) {
      const NodeId p = *it;
      double inf = std::numeric_limits<double>::infinity();
      for (std::size_t g = 0; g < grid.size(); ++g) {
        double m = 0.0;
        for (NodeId c : lat.node(p).children) {
          double uc;
          if (lat.node(c).time == T) {
            const NodeId leaf = c;
            uc = std::max(h_at(leaf, T), h_at(leaf, T + 1));
          } else {
            uc = u[c];
          }
          m += step_cache[c * grid.size() + g] * uc;
        }
        inf = std::min(inf, m);
      }
      const int s = lat.node(p).time;
      if (p == anchor) {
        out.envelope.push_back(inf);
      } else {
        const NodeId any_leaf = detail::subtree_leaves(lat, p).front();
        u[p] = std::max(h_at(any_leaf, s), inf);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Random instances for property checks

struct OracleInstance {
  ScenarioLattice lattice;
  CashFlowSpec cash_flow;
  LatticeFamily family;
  std::vector<Theta> grid;
  RiskMeasureSpec rm;
};

// Deterministic in (seed, index): horizon <= max_horizon, branching <= max_branch
// per node, payloads uniform on [-1, 1], |grid| <= max_grid one-step factor
// tables. Instances whose enumeration exceeds `budget` (rules x selections)
// are redrawn.
inline OracleInstance random_oracle_instance(std::uint64_t seed, std::uint64_t index, int max_horizon = 3,
                                             int max_branch = 3, int max_grid = 3, double budget = 2e6) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    const NormalStream rng(seed, stream_id("oracle-instance", index * 1000 + attempt));
    std::uint64_t k = 0;
    auto uni = [&] { return rng.uniform(k++); };
    auto pick = [&](int hi) { return 1 + std::min(hi - 1, static_cast<int>(uni() * hi)); };
    const int T = pick(max_horizon);
    const int K = pick(max_grid);
    LatticeSpec spec;
    spec.horizon = T;
    spec.transitions = [&](const ScenarioLattice&, NodeId) {
      const int b = pick(max_branch);
      std::vector<double> row(static_cast<std::size_t>(b));
      double sum = 0;
      for (auto& p : row) sum += (p = 0.1 + uni());
      for (auto& p : row) p /= sum;
      // make the row sum to one exactly in floating point
      double rest = 1.0;
      for (std::size_t i = 0; i + 1 < row.size(); ++i) rest -= row[i];
      row.back() = rest;
      return row;
    };
    spec.payloads = {{"X", [&](const ScenarioLattice&, NodeId id) { return id == 0 ? 0.0 : 2.0 * uni() - 1.0; }}};
    ScenarioLattice lat = build_lattice(spec);
    const double rules = detail::count_rules(lat, 0, 1);
    const double sels = count_selections(lat, 0, static_cast<std::size_t>(K));
    if (rules * sels > budget && attempt < 10000) continue;
    std::vector<NodeWeights> tables;
    for (int g = 0; g < K; ++g) {
      NodeWeights w(lat.size(), 1.0);
      for (NodeId p = 0; p < lat.size(); ++p) {
        const auto& ch = lat.node(p).children;
        if (ch.empty()) continue;
        double m = 0;
        for (NodeId c : ch) m += lat.node(c).prob * (w[c] = 0.2 + 1.6 * uni());
        for (NodeId c : ch) w[c] /= m;
      }
      tables.push_back(std::move(w));
    }
    OracleInstance inst;
    inst.family = table_family(lat, std::move(tables));
    for (int g = 0; g < K; ++g) inst.grid.push_back({static_cast<double>(g)});
    inst.rm = RiskMeasureSpec{uni() < 0.5 ? RiskKind::var : RiskKind::avar, 0.05 + 0.5 * uni()};
    inst.cash_flow = CashFlowSpec(lat, payload_process(lat, "X", 1, T));
    inst.lattice = std::move(lat);
    return inst;
  }
}

}  // namespace ambival
