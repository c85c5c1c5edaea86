#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ambival/scenario.hpp"
#include "ambival/util.hpp"

namespace ambival {

using Theta = std::vector<double>;

// One-step density factors on a lattice: factor(lat, child, theta) multiplies
// the base transition probability parent(child) -> child. Implementations
// must have conditional mean 1 under P for every theta.
struct LatticeFamily {
  std::size_t dim = 1;
  std::function<double(const ScenarioLattice&, NodeId, std::span<const double>)> factor;
  Theta reference;  // theta^P, the identity change of measure
};

inline double density_step(const LatticeFamily& fam, const ScenarioLattice& lat, NodeId child,
                           std::span<const double> theta) {
  if (theta.size() != fam.dim)
    throw std::invalid_argument("density_step: theta has dimension " + std::to_string(theta.size()) +
                                ", family expects " + std::to_string(fam.dim));
  if (child == 0 || child >= lat.size()) throw std::invalid_argument("density_step: not a child node");
  const double f = fam.factor(lat, child, theta);
  if (!(f > 0.0) || !std::isfinite(f))
    throw std::invalid_argument("density_step: non-positive factor at node " + std::to_string(child));
  return f;
}

// Family indexed by theta = {k}: factor tables[k][child]. Each table is
// checked for positivity and conditional mean one. Index -1 denotes P.
inline LatticeFamily table_family(const ScenarioLattice& lat, std::vector<NodeWeights> tables) {
  for (const auto& w : tables) validate_weights(lat, w, 0, lat.horizon());
  auto shared = std::make_shared<const std::vector<NodeWeights>>(std::move(tables));
  LatticeFamily fam;
  fam.dim = 1;
  fam.reference = {-1.0};
  fam.factor = [shared](const ScenarioLattice&, NodeId child, std::span<const double> th) {
    const auto k = static_cast<long>(std::lround(th[0]));
    if (k < 0) return 1.0;
    if (static_cast<std::size_t>(k) >= shared->size())
      throw std::invalid_argument("table family: index " + std::to_string(k) + " outside the grid");
    return (*shared)[static_cast<std::size_t>(k)][child];
  };
  return fam;
}

// Exponential tilting by a node payload: f(child) = exp(theta x) / E^P[exp(theta x)].
inline LatticeFamily tilt_family(const std::string& payload) {
  LatticeFamily fam;
  fam.dim = 1;
  fam.reference = {0.0};
  fam.factor = [payload](const ScenarioLattice& lat, NodeId child, std::span<const double> th) {
    const auto& x = lat.payload(payload);
    const NodeId parent = lat.node(child).parent;
    double norm = 0.0;
    for (NodeId c : lat.node(parent).children) norm += lat.node(c).prob * std::exp(th[0] * x[c]);
    return std::exp(th[0] * x[child]) / norm;
  };
  return fam;
}

// ---------------------------------------------------------------------------
// Selections and density processes

// theta[n] is the parameter used on the transition into node n (entry 0 is
// unused). Measurable selections agree across siblings, i.e. depend only on
// the parent's history.
struct NodeSelection {
  std::vector<Theta> theta;
};

inline NodeSelection constant_selection(const ScenarioLattice& lat, const Theta& th) {
  return NodeSelection{std::vector<Theta>(lat.size(), th)};
}

// Selection from a per-parent map (measurable by construction).
inline NodeSelection selection_from_parents(const ScenarioLattice& lat,
                                            const std::function<Theta(NodeId parent)>& pick) {
  NodeSelection sel{std::vector<Theta>(lat.size())};
  for (NodeId id = 0; id < lat.size(); ++id)
    if (lat.node(id).time < lat.horizon()) {
      const Theta th = pick(id);
      for (NodeId c : lat.node(id).children) sel.theta[c] = th;
    }
  return sel;
}

inline void check_measurable(const ScenarioLattice& lat, const NodeSelection& sel) {
  if (sel.theta.size() != lat.size()) throw std::invalid_argument("selection must cover every node");
  for (NodeId id = 1; id < lat.size(); ++id) {
    const NodeId first = lat.node(lat.node(id).parent).children.front();
    if (sel.theta[id] != sel.theta[first])
      throw std::invalid_argument("selection reads future information at t=" +
                                  std::to_string(lat.node(id).time) + " (node " + std::to_string(id) + ")");
  }
}

// D_t per node id, D_0 = 1.
struct DensityProcess {
  std::vector<double> value;

  double at(NodeId id) const { return value.at(id); }
  // One-step factor D_n / D_parent(n).
  double step(const ScenarioLattice& lat, NodeId id) const { return value.at(id) / value.at(lat.node(id).parent); }
  NodeWeights steps(const ScenarioLattice& lat) const {
    NodeWeights w(lat.size(), 1.0);
    for (NodeId id = 1; id < lat.size(); ++id) w[id] = step(lat, id);
    return w;
  }
};

inline DensityProcess density_process(const ScenarioLattice& lat, const LatticeFamily& fam,
                                      const NodeSelection& sel) {
  check_measurable(lat, sel);
  DensityProcess d{std::vector<double>(lat.size(), 1.0)};
  for (NodeId id = 1; id < lat.size(); ++id)
    d.value[id] = d.value[lat.node(id).parent] * density_step(fam, lat, id, sel.theta[id]);
  return d;
}

inline DensityProcess density_process(const ScenarioLattice& lat, const LatticeFamily& fam, const Theta& th) {
  return density_process(lat, fam, constant_selection(lat, th));
}

inline DensityProcess density_from_steps(const ScenarioLattice& lat, const NodeWeights& steps) {
  if (steps.size() != lat.size()) throw std::invalid_argument("density_from_steps: size mismatch");
  DensityProcess d{std::vector<double>(lat.size(), 1.0)};
  for (NodeId id = 1; id < lat.size(); ++id) d.value[id] = d.value[lat.node(id).parent] * steps[id];
  return d;
}

struct DensityCheck {
  bool positive = true;
  double max_martingale_error = 0.0;   // max |E_t[D_{t+1}] - D_t|
  double max_normalization_error = 0.0;  // max_t |E[D_t] - 1|
  bool ok(double tol = 1e-10) const {
    return positive && max_martingale_error <= tol && max_normalization_error <= tol;
  }
};

inline DensityCheck check_density(const ScenarioLattice& lat, const DensityProcess& d) {
  DensityCheck out;
  if (d.value.size() != lat.size() || std::abs(d.value[0] - 1.0) > 0.0) out.positive = false;
  for (double v : d.value)
    if (!(v > 0.0) || !std::isfinite(v)) out.positive = false;
  for (NodeId id = 0; id < lat.size(); ++id) {
    const auto& nd = lat.node(id);
    if (nd.children.empty()) continue;
    double m = 0.0;
    for (NodeId c : nd.children) m += lat.node(c).prob * d.value[c];
    out.max_martingale_error = std::max(out.max_martingale_error, std::abs(m - d.value[id]));
  }
  for (int t = 0; t <= lat.horizon(); ++t) {
    double m = 0.0;
    for (NodeId id : lat.level(t)) m += lat.path_probability(id) * d.value[id];
    out.max_normalization_error = std::max(out.max_normalization_error, std::abs(m - 1.0));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stopping times and pasting

// Stopping time on a lattice, one value per terminal node (slot order of
// level T). Values range over [lo, T+1]; {tau = t} must be decided by the
// time-t history.
struct StoppingTime {
  std::vector<int> leaf_value;

  static StoppingTime constant(const ScenarioLattice& lat, int t) {
    return StoppingTime{std::vector<int>(lat.level_size(lat.horizon()), t)};
  }
  // tau restricted to the subtree of `id`, when it is already known there.
  int value_below(const ScenarioLattice& lat, NodeId id) const {
    NodeId n = id;
    while (!lat.node(n).children.empty()) n = lat.node(n).children.front();
    return leaf_value.at(lat.slot(n));
  }
};

inline void check_stopping_time(const ScenarioLattice& lat, const StoppingTime& tau) {
  const int T = lat.horizon();
  if (tau.leaf_value.size() != lat.level_size(T))
    throw std::invalid_argument("stopping time must have one value per terminal node");
  for (NodeId leaf : lat.level(T)) {
    const int s = tau.leaf_value[lat.slot(leaf)];
    if (s < 0 || s > T + 1) throw std::invalid_argument("stopping time value out of range");
    if (s >= T) continue;
    // every leaf sharing the time-s history must also stop at s
    const NodeId anc = lat.ancestor(leaf, s);
    std::vector<NodeId> stack{anc};
    while (!stack.empty()) {
      const NodeId n = stack.back();
      stack.pop_back();
      if (lat.node(n).children.empty()) {
        if (tau.leaf_value[lat.slot(n)] != s)
          throw std::invalid_argument("not a stopping time: {tau=" + std::to_string(s) +
                                      "} is not decided at t=" + std::to_string(s) + " (node " +
                                      std::to_string(anc) + ")");
      } else {
        for (NodeId c : lat.node(n).children) stack.push_back(c);
      }
    }
  }
}

// D3_t = prod_{s<=t} (1{s<=tau} D1_s/D1_{s-1} + 1{s>tau} D2_s/D2_{s-1}).
inline DensityProcess paste(const ScenarioLattice& lat, const DensityProcess& d1, const DensityProcess& d2,
                            const StoppingTime& tau) {
  check_stopping_time(lat, tau);
  if (d1.value.size() != lat.size() || d2.value.size() != lat.size())
    throw std::invalid_argument("paste: density processes live on a different lattice");
  DensityProcess d3{std::vector<double>(lat.size(), 1.0)};
  for (NodeId id = 1; id < lat.size(); ++id) {
    const int s = lat.node(id).time;
    // {tau >= s} is known at s-1; any leaf below the node carries it
    const bool first = tau.value_below(lat, id) >= s;
    d3.value[id] = d3.value[lat.node(id).parent] * (first ? d1.step(lat, id) : d2.step(lat, id));
  }
  return d3;
}

// Spliced selection 1{s<=tau} theta1_s + 1{s>tau} theta2_s.
inline NodeSelection splice(const ScenarioLattice& lat, const NodeSelection& s1, const NodeSelection& s2,
                            const StoppingTime& tau) {
  check_stopping_time(lat, tau);
  NodeSelection out{std::vector<Theta>(lat.size())};
  for (NodeId id = 1; id < lat.size(); ++id)
    out.theta[id] = tau.value_below(lat, id) >= lat.node(id).time ? s1.theta.at(id) : s2.theta.at(id);
  return out;
}

inline DensityProcess convex_combination(const DensityProcess& a, const DensityProcess& b, double c) {
  if (!(c >= 0.0 && c <= 1.0)) throw std::invalid_argument("convex weight must lie in [0,1]");
  if (a.value.size() != b.value.size()) throw std::invalid_argument("convex combination: size mismatch");
  DensityProcess out{std::vector<double>(a.value.size())};
  for (std::size_t i = 0; i < a.value.size(); ++i) out.value[i] = c * a.value[i] + (1.0 - c) * b.value[i];
  return out;
}

}  // namespace ambival
