#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ambival/parallel.hpp"
#include "ambival/rng.hpp"
#include "ambival/util.hpp"

namespace ambival {

using NodeId = std::size_t;
inline constexpr NodeId kNoParent = std::numeric_limits<NodeId>::max();

struct LatticeNode {
  NodeId parent = kNoParent;
  int time = 0;
  double prob = 1.0;  // base-measure transition probability from the parent
  std::vector<NodeId> children;
};

class ScenarioLattice;

// Branching structure, base-measure transition probabilities and payload
// generators. Payload generators run parents-first, so a generator may read
// already-computed payload values of ancestors under the same name.
struct LatticeSpec {
  int horizon = 1;
  std::function<std::vector<double>(const ScenarioLattice&, NodeId)> transitions;
  std::vector<std::pair<std::string, std::function<double(const ScenarioLattice&, NodeId)>>>
      payloads;
};

// Finite filtered probability tree. Node 0 is the root (t = 0); nodes are
// stored level by level so each level is a contiguous id range.
class ScenarioLattice {
 public:
  ScenarioLattice() = default;

  int horizon() const noexcept { return horizon_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const LatticeNode& node(NodeId id) const { return nodes_.at(id); }
  const std::vector<LatticeNode>& nodes() const noexcept { return nodes_; }

  // Node ids at time t, in storage order.
  std::span<const NodeId> level(int t) const { return levels_.at(static_cast<std::size_t>(t)); }
  std::size_t level_size(int t) const { return level(t).size(); }
  // Position of a node inside its level.
  std::size_t slot(NodeId id) const { return slot_.at(id); }

  bool has_payload(const std::string& name) const { return payloads_.count(name) != 0; }
  const std::vector<double>& payload(const std::string& name) const {
    auto it = payloads_.find(name);
    if (it == payloads_.end()) throw std::out_of_range("lattice has no payload '" + name + "'");
    return it->second;
  }
  double payload(const std::string& name, NodeId id) const { return payload(name).at(id); }
  const std::map<std::string, std::vector<double>>& payloads() const noexcept { return payloads_; }

  // Base-measure probability of reaching a node from the root.
  double path_probability(NodeId id) const {
    double p = 1.0;
    for (NodeId n = id; n != 0; n = nodes_[n].parent) p *= nodes_[n].prob;
    return p;
  }

  // Ancestor of `id` at time t <= time(id).
  NodeId ancestor(NodeId id, int t) const {
    NodeId n = id;
    while (nodes_.at(n).time > t) n = nodes_[n].parent;
    return n;
  }

  // Throws std::invalid_argument naming the first offending node.
  void validate() const {
    if (nodes_.empty()) throw std::invalid_argument("lattice is empty");
    if (horizon_ < 1) throw std::invalid_argument("lattice horizon must be >= 1");
    if (nodes_[0].parent != kNoParent || nodes_[0].time != 0)
      throw std::invalid_argument("node 0 must be the root at t=0");
    if (levels_.size() != static_cast<std::size_t>(horizon_) + 1 || levels_[0].size() != 1)
      throw std::invalid_argument("lattice must have exactly one root");
    for (NodeId id = 0; id < nodes_.size(); ++id) {
      const auto& nd = nodes_[id];
      if (id != 0) {
        if (nd.parent >= id) throw std::invalid_argument(fmt_node(id, "parent must precede child"));
        if (nd.time != nodes_[nd.parent].time + 1)
          throw std::invalid_argument(fmt_node(id, "time must be parent time + 1"));
      }
      if (nd.time < horizon_ && nd.children.empty())
        throw std::invalid_argument(fmt_node(id, "interior node has no children"));
      if (nd.time == horizon_ && !nd.children.empty())
        throw std::invalid_argument(fmt_node(id, "terminal node has children"));
      if (!nd.children.empty()) {
        double sum = 0.0;
        for (NodeId c : nd.children) {
          const double p = nodes_[c].prob;
          if (!(p > 0.0) || !std::isfinite(p))
            throw std::invalid_argument(fmt_node(id, "transition probability " + format_number(p) +
                                                         " is not strictly positive"));
          if (nodes_[c].parent != id) throw std::invalid_argument(fmt_node(c, "parent link broken"));
          sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12)
          throw std::invalid_argument(fmt_node(id, "probabilities sum to " + format_number(sum, 12)));
      }
    }
    for (const auto& [name, vals] : payloads_) {
      if (vals.size() != nodes_.size())
        throw std::invalid_argument("payload '" + name + "' has wrong length");
      for (NodeId id = 0; id < vals.size(); ++id)
        if (!std::isfinite(vals[id]))
          throw std::invalid_argument(fmt_node(id, "payload '" + name + "' is not finite"));
    }
  }

  // Low-level constructor used by build_lattice and deserialisation. Nodes
  // must be given parents-first; children lists and levels are rebuilt.
  static ScenarioLattice from_nodes(int horizon, std::vector<LatticeNode> nodes,
                                    std::map<std::string, std::vector<double>> payloads = {}) {
    ScenarioLattice lat;
    lat.horizon_ = horizon;
    for (auto& nd : nodes) nd.children.clear();
    for (NodeId id = 1; id < nodes.size(); ++id) {
      const NodeId parent = nodes[id].parent;
      if (parent >= id) throw std::invalid_argument(fmt_node(id, "parent must precede child"));
      nodes[id].time = nodes[parent].time + 1;
      nodes[parent].children.push_back(id);
    }
    if (!nodes.empty()) nodes[0].time = 0;
    lat.nodes_ = std::move(nodes);
    lat.payloads_ = std::move(payloads);
    lat.index_levels();
    lat.validate();
    return lat;
  }

 private:
  friend ScenarioLattice build_lattice(const LatticeSpec& spec);

  static std::string fmt_node(NodeId id, const std::string& what) {
    return "node " + std::to_string(id) + ": " + what;
  }

  void index_levels() {
    levels_.assign(static_cast<std::size_t>(std::max(horizon_, 0)) + 1, {});
    slot_.assign(nodes_.size(), 0);
    for (NodeId id = 0; id < nodes_.size(); ++id) {
      const int t = nodes_[id].time;
      if (t < 0 || t > horizon_) throw std::invalid_argument(fmt_node(id, "time out of range"));
      slot_[id] = levels_[static_cast<std::size_t>(t)].size();
      levels_[static_cast<std::size_t>(t)].push_back(id);
    }
  }

  int horizon_ = 0;
  std::vector<LatticeNode> nodes_;
  std::vector<std::vector<NodeId>> levels_;
  std::vector<std::size_t> slot_;
  std::map<std::string, std::vector<double>> payloads_;
};

inline ScenarioLattice build_lattice(const LatticeSpec& spec) {
  if (spec.horizon < 1) throw std::invalid_argument("lattice depth must be >= 1");
  if (!spec.transitions) throw std::invalid_argument("lattice spec has no transition generator");
  ScenarioLattice lat;
  lat.horizon_ = spec.horizon;
  lat.nodes_.push_back(LatticeNode{});
  lat.levels_.assign(static_cast<std::size_t>(spec.horizon) + 1, {});
  lat.levels_[0].push_back(0);
  lat.slot_.push_back(0);
  for (int t = 0; t < spec.horizon; ++t) {
    // copy: levels_[t+1] grows while we iterate level t
    const std::vector<NodeId> current = lat.levels_[static_cast<std::size_t>(t)];
    for (NodeId parent : current) {
      const std::vector<double> probs = spec.transitions(lat, parent);
      if (probs.empty())
        throw std::invalid_argument("node " + std::to_string(parent) + ": no transitions");
      double sum = 0.0;
      for (double p : probs) {
        if (!(p > 0.0) || !std::isfinite(p))
          throw std::invalid_argument("node " + std::to_string(parent) + ": transition probability " +
                                      format_number(p) + " is not strictly positive");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("node " + std::to_string(parent) + ": probabilities sum to " +
                                    format_number(sum, 12));
      for (double p : probs) {
        const NodeId id = lat.nodes_.size();
        lat.nodes_.push_back(LatticeNode{parent, t + 1, p, {}});
        lat.nodes_[parent].children.push_back(id);
        lat.slot_.push_back(lat.levels_[static_cast<std::size_t>(t) + 1].size());
        lat.levels_[static_cast<std::size_t>(t) + 1].push_back(id);
      }
    }
  }
  for (const auto& [name, gen] : spec.payloads) {
    auto& vals = lat.payloads_[name];
    vals.assign(lat.nodes_.size(), 0.0);
    for (NodeId id = 0; id < lat.nodes_.size(); ++id) vals[id] = gen(lat, id);
  }
  lat.validate();
  return lat;
}

// Uniform-branching tree with the same transition row at every node.
inline ScenarioLattice uniform_tree(int horizon, std::vector<double> row) {
  LatticeSpec spec;
  spec.horizon = horizon;
  spec.transitions = [row = std::move(row)](const ScenarioLattice&, NodeId) { return row; };
  return build_lattice(spec);
}

inline ScenarioLattice binomial_tree(int horizon, double p) { return uniform_tree(horizon, {p, 1.0 - p}); }

// ---------------------------------------------------------------------------
// Adapted processes

enum class Measurability { adapted, predictable };

// values[k] holds the time-(first_time + k) values, one per state. On a
// lattice the states at time t are the nodes of level min(t, T) (so a
// payoff at T+1 lives on the terminal nodes); on a path sample they are the
// paths, with a single state allowed at t = 0.
struct AdaptedProcess {
  std::string name;
  int first_time = 0;
  std::vector<std::vector<double>> values;
  Measurability measurability = Measurability::adapted;

  int last_time() const noexcept { return first_time + static_cast<int>(values.size()) - 1; }
  bool defined_at(int t) const noexcept { return t >= first_time && t <= last_time(); }
  const std::vector<double>& at(int t) const {
    if (!defined_at(t))
      throw std::out_of_range("process '" + name + "' undefined at t=" + std::to_string(t));
    return values[static_cast<std::size_t>(t - first_time)];
  }
  std::vector<double>& at(int t) {
    if (!defined_at(t))
      throw std::out_of_range("process '" + name + "' undefined at t=" + std::to_string(t));
    return values[static_cast<std::size_t>(t - first_time)];
  }
  double at(int t, std::size_t state) const { return at(t).at(state); }
};

inline int state_level(const ScenarioLattice& lat, int t) { return std::min(t, lat.horizon()); }

// Process with value fn(node) at every node of levels first..last.
inline AdaptedProcess make_process(const ScenarioLattice& lat, std::string name, int first, int last,
                                   const std::function<double(NodeId)>& fn) {
  AdaptedProcess p{std::move(name), first, {}, Measurability::adapted};
  for (int t = first; t <= last; ++t) {
    std::vector<double> layer;
    for (NodeId id : lat.level(state_level(lat, t))) layer.push_back(fn(id));
    p.values.push_back(std::move(layer));
  }
  return p;
}

inline AdaptedProcess constant_process(const ScenarioLattice& lat, std::string name, int first, int last,
                                       double c) {
  return make_process(lat, std::move(name), first, last, [c](NodeId) { return c; });
}

// Payload-backed process: X_t(node) = payload(name, node) for t in [first, last].
inline AdaptedProcess payload_process(const ScenarioLattice& lat, const std::string& payload, int first,
                                      int last) {
  const auto& vals = lat.payload(payload);
  return make_process(lat, payload, first, last, [&](NodeId id) { return vals[id]; });
}

// Shared-history constancy test. Every lattice node is a distinct history, so
// an adapted process only has to match the level sizes; a predictable one
// must additionally agree across siblings.
inline bool is_adapted(const ScenarioLattice& lat, const AdaptedProcess& proc) {
  for (int t = proc.first_time; t <= proc.last_time(); ++t) {
    if (t < 0 || t > lat.horizon() + 1) return false;
    const auto& layer = proc.at(t);
    const int lvl = state_level(lat, t);
    if (layer.size() != lat.level_size(lvl)) return false;
    for (double v : layer)
      if (!std::isfinite(v)) return false;
    if (proc.measurability == Measurability::predictable && t >= 1 && t <= lat.horizon()) {
      for (NodeId id : lat.level(lvl)) {
        const NodeId first_sibling = lat.node(lat.node(id).parent).children.front();
        if (layer[lat.slot(id)] != layer[lat.slot(first_sibling)]) return false;
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Conditional expectation on lattices

// One-step reweighting factors indexed by node id: weights[n] multiplies the
// transition probability parent(n) -> n. Entry 0 (the root) is ignored.
using NodeWeights = std::vector<double>;

inline void validate_weights(const ScenarioLattice& lat, const NodeWeights& w, int from, int to) {
  if (w.size() != lat.size()) throw std::invalid_argument("weights must have one entry per node");
  for (int t = from; t < to; ++t) {
    for (NodeId parent : lat.level(t)) {
      double mean = 0.0;
      for (NodeId c : lat.node(parent).children) {
        if (!(w[c] > 0.0) || !std::isfinite(w[c]))
          throw std::invalid_argument("invalid density step at node " + std::to_string(c) +
                                      ": weight must be positive");
        mean += lat.node(c).prob * w[c];
      }
      if (std::abs(mean - 1.0) > 1e-10)
        throw std::invalid_argument("invalid density step at node " + std::to_string(parent) +
                                    ": conditional mean of weights is " + format_number(mean, 12));
    }
  }
}

// E_t[Y] for Y given by its values on level s > t (layer indexed by slot).
// With weights, returns E_t[Y D_s / D_t] for the density process whose
// one-step factors are the weights.
inline std::vector<double> cond_expectation(const ScenarioLattice& lat, std::span<const double> layer,
                                            int s, int t, const NodeWeights* weights = nullptr) {
  if (s < 0 || s > lat.horizon() || t < 0 || t > s)
    throw std::invalid_argument("cond_expectation: need 0 <= t <= s <= T");
  if (layer.size() != lat.level_size(s))
    throw std::invalid_argument("cond_expectation: layer size does not match level " + std::to_string(s));
  if (weights) validate_weights(lat, *weights, t, s);
  std::vector<double> current(layer.begin(), layer.end());
  for (int u = s - 1; u >= t; --u) {
    std::vector<double> next(lat.level_size(u), 0.0);
    for (NodeId parent : lat.level(u)) {
      double acc = 0.0;
      for (NodeId c : lat.node(parent).children) {
        const double p = weights ? lat.node(c).prob * (*weights)[c] : lat.node(c).prob;
        acc += p * current[lat.slot(c)];
      }
      next[lat.slot(parent)] = acc;
    }
    current = std::move(next);
  }
  return current;
}

// E_t applied to the value of `proc` at time s.
inline AdaptedProcess cond_expectation(const ScenarioLattice& lat, const AdaptedProcess& proc, int s, int t,
                                       const NodeWeights* weights = nullptr) {
  if (!proc.defined_at(s)) throw std::invalid_argument("cond_expectation: process undefined at s");
  if (s > lat.horizon()) throw std::invalid_argument("cond_expectation: s beyond horizon");
  AdaptedProcess out{"E_" + std::to_string(t) + "[" + proc.name + "]", t, {}, Measurability::adapted};
  out.values.push_back(cond_expectation(lat, proc.at(s), s, t, weights));
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo path samples

struct InnovationColumn {
  std::string name;
  int reveal_time = 1;
};

// Standard normal innovation columns. With `antithetic`, paths come in pairs
// (2k, 2k+1) carrying z and -z.
struct InnovationSpec {
  int horizon = 1;
  std::vector<InnovationColumn> columns;
  bool antithetic = false;
};

class PathSample {
 public:
  PathSample() = default;
  PathSample(std::size_t n_paths, int horizon, std::uint64_t seed, std::vector<InnovationColumn> columns,
             std::vector<std::vector<double>> draws, bool antithetic = false)
      : n_paths_(n_paths),
        horizon_(horizon),
        seed_(seed),
        antithetic_(antithetic),
        columns_(std::move(columns)),
        draws_(std::move(draws)) {
    if (draws_.size() != columns_.size()) throw std::invalid_argument("path sample: column count mismatch");
    for (const auto& d : draws_)
      if (d.size() != n_paths_) throw std::invalid_argument("path sample: column length mismatch");
  }

  std::size_t n_paths() const noexcept { return n_paths_; }
  int horizon() const noexcept { return horizon_; }
  std::uint64_t seed() const noexcept { return seed_; }
  bool antithetic() const noexcept { return antithetic_; }
  const std::vector<InnovationColumn>& columns() const noexcept { return columns_; }
  std::size_t column_index(const std::string& name) const {
    for (std::size_t j = 0; j < columns_.size(); ++j)
      if (columns_[j].name == name) return j;
    throw std::out_of_range("path sample has no innovation '" + name + "'");
  }
  std::span<const double> draws(const std::string& name) const { return draws_[column_index(name)]; }
  std::span<const double> draws(std::size_t j) const { return draws_.at(j); }
  double draw(std::size_t path, std::size_t column) const { return draws_.at(column).at(path); }

  // Derived process columns, keyed by name.
  void set_derived(const std::string& name, std::vector<double> values) {
    if (values.size() != n_paths_) throw std::invalid_argument("derived column length mismatch");
    derived_[name] = std::move(values);
  }
  const std::vector<double>& derived(const std::string& name) const {
    auto it = derived_.find(name);
    if (it == derived_.end()) throw std::out_of_range("path sample has no derived column '" + name + "'");
    return it->second;
  }
  const std::map<std::string, std::vector<double>>& derived_columns() const noexcept { return derived_; }

 private:
  std::size_t n_paths_ = 0;
  int horizon_ = 0;
  std::uint64_t seed_ = 0;
  bool antithetic_ = false;
  std::vector<InnovationColumn> columns_;
  std::vector<std::vector<double>> draws_;  // column-major: draws_[column][path]
  std::map<std::string, std::vector<double>> derived_;
};

// Each column draws from its own Philox substream keyed by the column name,
// so adding a column never perturbs the others.
inline PathSample simulate_paths(const InnovationSpec& model, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("simulate_paths: n must be >= 1");
  if (model.horizon < 1) throw std::invalid_argument("simulate_paths: horizon must be >= 1");
  for (const auto& c : model.columns)
    if (c.reveal_time < 1 || c.reveal_time > model.horizon)
      throw std::invalid_argument("simulate_paths: column '" + c.name + "' revealed outside [1, T]");
  std::vector<std::vector<double>> draws(model.columns.size(), std::vector<double>(n));
  for (std::size_t j = 0; j < model.columns.size(); ++j) {
    const NormalStream stream(seed, stream_id(model.columns[j].name));
    auto& col = draws[j];
    constexpr std::size_t kBlock = 4096;
    const std::size_t blocks = (n + kBlock - 1) / kBlock;
    parallel_for(blocks, [&](std::size_t b) {
      const std::size_t hi = std::min(n, (b + 1) * kBlock);
      for (std::size_t i = b * kBlock; i < hi; ++i) {
        if (model.antithetic)
          col[i] = (i & 1u) ? -stream(i >> 1) : stream(i >> 1);
        else
          col[i] = stream(i);
      }
    });
  }
  return PathSample(n, model.horizon, seed, model.columns, std::move(draws), model.antithetic);
}

// Time-0 conditional expectation on a path sample: the plain (or weighted)
// empirical mean. Interior times need a closed-form layer; see valuation.hpp.
inline double sample_mean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("sample_mean: empty sample");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

inline double sample_mean(std::span<const double> values, std::span<const double> weights) {
  if (values.empty() || values.size() != weights.size())
    throw std::invalid_argument("sample_mean: weights must match values");
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) acc += values[i] * weights[i];
  return acc / static_cast<double>(values.size());
}

// Path-sample processes are adapted when the t = 0 layer is constant (all
// paths share the trivial history); later times carry one value per path.
inline bool is_adapted(const PathSample& paths, const AdaptedProcess& proc) {
  for (int t = proc.first_time; t <= proc.last_time(); ++t) {
    const auto& layer = proc.at(t);
    if (t == 0 || (t == 1 && proc.measurability == Measurability::predictable)) {
      for (double v : layer)
        if (v != layer.front()) return false;
      if (layer.size() != 1 && layer.size() != paths.n_paths()) return false;
    } else if (layer.size() != paths.n_paths()) {
      return false;
    }
  }
  return true;
}

}  // namespace ambival
