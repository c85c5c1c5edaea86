#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ambival/parallel.hpp"
#include "ambival/priors.hpp"
#include "ambival/riskmeasures.hpp"
#include "ambival/scenario.hpp"
#include "ambival/util.hpp"

namespace ambival {

enum class Direction { inf, sup };

// Residual cash flow X = X^o - X^r on times 1..T.
struct CashFlowSpec {
  AdaptedProcess liability;
  AdaptedProcess replicating;
  AdaptedProcess residual;

  CashFlowSpec() = default;
  CashFlowSpec(const ScenarioLattice& lat, AdaptedProcess xo, AdaptedProcess xr)
      : liability(std::move(xo)), replicating(std::move(xr)) {
    const int T = lat.horizon();
    for (const auto* p : {&liability, &replicating}) {
      if (p->first_time > 1 || p->last_time() < T)
        throw std::invalid_argument("cash flow '" + p->name + "' must be defined on times 1.." + std::to_string(T));
      if (!is_adapted(lat, *p)) throw std::invalid_argument("cash flow '" + p->name + "' is not adapted");
    }
    residual = AdaptedProcess{"X", 1, {}, Measurability::adapted};
    for (int t = 1; t <= T; ++t) {
      std::vector<double> layer = liability.at(t);
      const auto& r = replicating.at(t);
      for (std::size_t i = 0; i < layer.size(); ++i) layer[i] -= r[i];
      residual.values.push_back(std::move(layer));
    }
  }
  // X^r = 0.
  CashFlowSpec(const ScenarioLattice& lat, AdaptedProcess xo)
      : CashFlowSpec(lat, xo, constant_process(lat, "Xr", 1, lat.horizon(), 0.0)) {}

  const std::vector<double>& x(int t) const { return residual.at(t); }
};

struct SupermartingaleReport {
  // per t = 0..T-1, per state
  std::vector<std::vector<double>> excess;  // V_t - E_t[X_{t+1} + V_{t+1}]
  std::vector<std::vector<double>> margin;  // V_t - E_t[X_{t+1} + ... + X_T]
  std::size_t violations = 0;               // states with excess < -tol
  double min_excess = 0.0;
  double min_margin = 0.0;
};

struct ValuationOutput {
  AdaptedProcess R, C, V;                 // times 0..T, one value per node of level t
  std::vector<std::vector<std::size_t>> theta_star;  // per t < T, per state: grid index of the argmin
  std::vector<std::vector<char>> deficit;  // per t = 1..T (index t-1), per state: R_{t-1} - X_t - V_t < 0
  double lower = 0.0, upper = 0.0;         // bound pair around V_0
  std::size_t lower_argmax = 0;
  SupermartingaleReport diagnostics;

  double V0() const { return V.at(0, 0); }
  double C0() const { return C.at(0, 0); }
  double R0() const { return R.at(0, 0); }
};

// ---------------------------------------------------------------------------
// Payoff process

// H_1 = 0, H_t = sum_{s=1}^{t-1} (R_{s-1} - R_s - X_s) for t = 1..T+1. H_t is
// stored on the nodes of level min(t, T), constant across siblings for t <= T.
inline AdaptedProcess payoff_process(const ScenarioLattice& lat, const AdaptedProcess& R, const AdaptedProcess& X) {
  const int T = lat.horizon();
  if (R.first_time > 0 || R.last_time() < T) throw std::invalid_argument("payoff_process: R must cover 0..T");
  if (X.first_time > 1 || X.last_time() < T) throw std::invalid_argument("payoff_process: X must cover 1..T");
  for (double r : R.at(T))
    if (r != 0.0) throw std::invalid_argument("payoff_process: R_T must vanish");
  AdaptedProcess H{"H", 1, {}, Measurability::predictable};
  // running sum per node of level t-1, then broadcast to level min(t, T)
  std::vector<double> sum_parent(1, 0.0);  // H_1 on level 0
  for (int t = 1; t <= T + 1; ++t) {
    const int lvl = std::min(t, T);
    std::vector<double> layer(lat.level_size(lvl));
    for (NodeId id : lat.level(lvl)) {
      const NodeId a = lat.ancestor(id, t - 1);
      layer[lat.slot(id)] = sum_parent[lat.slot(a)];
    }
    H.values.push_back(layer);
    if (t == T + 1) break;
    // H_{t+1} on level t: H_t + R_{t-1} - R_t - X_t
    std::vector<double> next(lat.level_size(t));
    for (NodeId id : lat.level(t)) {
      const NodeId parent = lat.node(id).parent;
      next[lat.slot(id)] = sum_parent[lat.slot(parent)] + R.at(t - 1)[lat.slot(parent)] - R.at(t)[lat.slot(id)] -
                           X.at(t)[lat.slot(id)];
    }
    sum_parent = std::move(next);
  }
  return H;
}

// ---------------------------------------------------------------------------
// Worst-case conditional expectation over a theta grid

struct WorstCase {
  std::vector<double> value;        // per node of level t
  std::vector<std::size_t> argopt;  // grid index, lowest on ties
};

inline double reweighted_mean(const ScenarioLattice& lat, NodeId parent, std::span<const double> y_next,
                              const LatticeFamily& fam, const Theta& th) {
  double acc = 0.0;
  for (NodeId c : lat.node(parent).children)
    acc += lat.node(c).prob * density_step(fam, lat, c, th) * y_next[lat.slot(c)];
  return acc;
}

inline WorstCase worst_case_cond_exp(const ScenarioLattice& lat, std::span<const double> y_next, int t,
                                     const LatticeFamily& fam, const std::vector<Theta>& grid,
                                     Direction dir = Direction::inf) {
  if (grid.empty()) throw std::invalid_argument("worst_case_cond_exp: empty theta grid");
  if (t < 0 || t >= lat.horizon()) throw std::invalid_argument("worst_case_cond_exp: t out of range");
  if (y_next.size() != lat.level_size(t + 1))
    throw std::invalid_argument("worst_case_cond_exp: Y layer does not match level t+1");
  WorstCase out{std::vector<double>(lat.level_size(t)), std::vector<std::size_t>(lat.level_size(t), 0)};
  const auto states = lat.level(t);
  parallel_for(states.size(), [&](std::size_t k) {
    const NodeId parent = states[k];
    double best = 0.0;
    std::size_t arg = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const double v = reweighted_mean(lat, parent, y_next, fam, grid[g]);
      if (!std::isfinite(v))
        throw std::invalid_argument("non-finite reweighted expectation at node " + std::to_string(parent) +
                                    " for grid point " + std::to_string(g));
      if (g == 0 || (dir == Direction::inf ? v < best : v > best)) {
        best = v;
        arg = g;
      }
    }
    out.value[k] = best;
    out.argopt[k] = arg;
  });
  return out;
}

// C_t = inf_theta E_t^theta[(R_t - X_{t+1} - V_{t+1})^+], V_t = R_t - C_t.
struct StepResult {
  std::vector<double> C, V;
  std::vector<std::size_t> theta_star;
};

inline StepResult recursion_step(const ScenarioLattice& lat, int t, std::span<const double> R_t,
                                 std::span<const double> X_next, std::span<const double> V_next,
                                 const LatticeFamily& fam, const std::vector<Theta>& grid) {
  const std::size_t n_next = lat.level_size(t + 1);
  if (X_next.size() != n_next || V_next.size() != n_next || R_t.size() != lat.level_size(t))
    throw std::invalid_argument("recursion_step: layer sizes do not match the lattice");
  std::vector<double> w(n_next);
  for (NodeId id : lat.level(t + 1)) {
    const std::size_t k = lat.slot(id);
    w[k] = std::max(0.0, R_t[lat.slot(lat.node(id).parent)] - X_next[k] - V_next[k]);
  }
  WorstCase wc = worst_case_cond_exp(lat, w, t, fam, grid, Direction::inf);
  StepResult out;
  out.C = std::move(wc.value);
  out.theta_star = std::move(wc.argopt);
  out.V.resize(out.C.size());
  for (std::size_t k = 0; k < out.C.size(); ++k) out.V[k] = R_t[k] - out.C[k];
  return out;
}

// R_t = rho_t(-Y) under P, per node of level t, for Y on level t+1.
inline std::vector<double> capital_requirement(const ScenarioLattice& lat, int t, std::span<const double> y_next,
                                               const RiskMeasureSpec& rm) {
  std::vector<double> R(lat.level_size(t));
  std::vector<double> z, prob;
  for (NodeId parent : lat.level(t)) {
    z.clear();
    prob.clear();
    for (NodeId c : lat.node(parent).children) {
      z.push_back(-y_next[lat.slot(c)]);
      prob.push_back(lat.node(c).prob);
    }
    R[lat.slot(parent)] = evaluate(rm, z, prob);
  }
  return R;
}

// One-step map Y -> V_t with R_t = rho_t(-Y).
inline std::vector<double> phi_step(const ScenarioLattice& lat, int t, std::span<const double> y_next,
                                    const RiskMeasureSpec& rm, const LatticeFamily& fam,
                                    const std::vector<Theta>& grid) {
  const std::vector<double> R = capital_requirement(lat, t, y_next, rm);
  const std::vector<double> zero(y_next.size(), 0.0);
  return recursion_step(lat, t, R, y_next, zero, fam, grid).V;
}

namespace detail {

inline ValuationOutput recurse(const ScenarioLattice& lat, const CashFlowSpec& cf, const RiskMeasureSpec& rm,
                               const LatticeFamily& fam, const std::vector<Theta>& grid) {
  rm.validate();
  if (grid.empty()) throw std::invalid_argument("valuation: empty theta grid");
  const int T = lat.horizon();
  ValuationOutput out;
  out.R = AdaptedProcess{"R", 0, std::vector<std::vector<double>>(static_cast<std::size_t>(T) + 1)};
  out.C = AdaptedProcess{"C", 0, std::vector<std::vector<double>>(static_cast<std::size_t>(T) + 1)};
  out.V = AdaptedProcess{"V", 0, std::vector<std::vector<double>>(static_cast<std::size_t>(T) + 1)};
  out.theta_star.resize(static_cast<std::size_t>(T));
  out.deficit.resize(static_cast<std::size_t>(T));
  const std::size_t nT = lat.level_size(T);
  out.R.at(T).assign(nT, 0.0);
  out.C.at(T).assign(nT, 0.0);
  out.V.at(T).assign(nT, 0.0);
  for (int t = T - 1; t >= 0; --t) {
    const auto& X = cf.x(t + 1);
    const auto& Vn = out.V.at(t + 1);
    std::vector<double> y(X.size());
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = X[k] + Vn[k];
    out.R.at(t) = capital_requirement(lat, t, y, rm);
    StepResult step = recursion_step(lat, t, out.R.at(t), X, Vn, fam, grid);
    out.C.at(t) = std::move(step.C);
    out.V.at(t) = std::move(step.V);
    out.theta_star[static_cast<std::size_t>(t)] = std::move(step.theta_star);
    auto& def = out.deficit[static_cast<std::size_t>(t)];
    def.assign(lat.level_size(t + 1), 0);
    for (NodeId id : lat.level(t + 1)) {
      const std::size_t k = lat.slot(id);
      def[k] = out.R.at(t)[lat.slot(lat.node(id).parent)] - X[k] - Vn[k] < 0.0;
    }
  }
  return out;
}

}  // namespace detail

// sup (or inf) over the rectangular hull of the grid of E^Q[X_1 + ... + X_T].
inline double rectangular_expectation(const ScenarioLattice& lat, const CashFlowSpec& cf, const LatticeFamily& fam,
                                      const std::vector<Theta>& grid, Direction dir = Direction::sup) {
  if (grid.empty()) throw std::invalid_argument("upper_bound: empty theta grid");
  const int T = lat.horizon();
  std::vector<double> u(lat.level_size(T), 0.0);
  for (int t = T - 1; t >= 0; --t) {
    const auto& X = cf.x(t + 1);
    for (std::size_t k = 0; k < u.size(); ++k) u[k] += X[k];
    u = worst_case_cond_exp(lat, u, t, fam, grid, dir).value;
  }
  return u[0];
}

enum class BoundMode { constant, rectangular };

// Constant mode: max over grid of E^{Q_theta}[sum X]. Rectangular mode:
// sup over adaptive selections, which bounds the rectangular-set value.
inline double upper_bound(const ScenarioLattice& lat, const CashFlowSpec& cf, const LatticeFamily& fam,
                          const std::vector<Theta>& grid, BoundMode mode = BoundMode::rectangular) {
  if (grid.empty()) throw std::invalid_argument("upper_bound: empty theta grid");
  if (mode == BoundMode::rectangular) return rectangular_expectation(lat, cf, fam, grid, Direction::sup);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& th : grid) best = std::max(best, rectangular_expectation(lat, cf, fam, {th}, Direction::sup));
  return best;
}

inline SupermartingaleReport supermartingale_diagnostic(const ScenarioLattice& lat, const ValuationOutput& out,
                                                        const CashFlowSpec& cf, double tol = 1e-10) {
  const int T = lat.horizon();
  SupermartingaleReport rep;
  rep.excess.resize(static_cast<std::size_t>(T));
  rep.margin.resize(static_cast<std::size_t>(T));
  // remaining[t] on level t: E_t[X_{t+1} + ... + X_T]
  std::vector<double> remaining(lat.level_size(T), 0.0);
  for (int t = T - 1; t >= 0; --t) {
    const auto& X = cf.x(t + 1);
    std::vector<double> tail(remaining.size()), y(remaining.size());
    for (std::size_t k = 0; k < tail.size(); ++k) {
      tail[k] = X[k] + remaining[k];
      y[k] = X[k] + out.V.at(t + 1)[k];
    }
    remaining = cond_expectation(lat, tail, t + 1, t);
    const std::vector<double> ey = cond_expectation(lat, y, t + 1, t);
    auto& ex = rep.excess[static_cast<std::size_t>(t)];
    auto& mg = rep.margin[static_cast<std::size_t>(t)];
    ex.resize(ey.size());
    mg.resize(ey.size());
    for (std::size_t k = 0; k < ey.size(); ++k) {
      ex[k] = out.V.at(t)[k] - ey[k];
      mg[k] = out.V.at(t)[k] - remaining[k];
      if (ex[k] < -tol) ++rep.violations;
      rep.min_excess = (t == T - 1 && k == 0) ? ex[k] : std::min(rep.min_excess, ex[k]);
      rep.min_margin = (t == T - 1 && k == 0) ? mg[k] : std::min(rep.min_margin, mg[k]);
    }
  }
  return rep;
}

inline ValuationOutput value_singleprior(const ScenarioLattice& lat, const CashFlowSpec& cf,
                                         const RiskMeasureSpec& rm, const LatticeFamily& fam, const Theta& th) {
  ValuationOutput out = detail::recurse(lat, cf, rm, fam, {th});
  out.lower = out.V0();
  out.upper = rectangular_expectation(lat, cf, fam, {th});
  out.diagnostics = supermartingale_diagnostic(lat, out, cf);
  return out;
}

// max over the grid of the single-prior V_0^theta, with its argmax.
inline std::pair<double, std::size_t> lower_bound(const ScenarioLattice& lat, const CashFlowSpec& cf,
                                                  const RiskMeasureSpec& rm, const LatticeFamily& fam,
                                                  const std::vector<Theta>& grid) {
  if (grid.empty()) throw std::invalid_argument("lower_bound: empty theta grid");
  double best = 0.0;
  std::size_t arg = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double v = detail::recurse(lat, cf, rm, fam, {grid[g]}).V0();
    if (g == 0 || v > best) {
      best = v;
      arg = g;
    }
  }
  return {best, arg};
}

inline ValuationOutput value_multiprior(const ScenarioLattice& lat, const CashFlowSpec& cf,
                                        const RiskMeasureSpec& rm, const LatticeFamily& fam,
                                        const std::vector<Theta>& grid) {
  ValuationOutput out = detail::recurse(lat, cf, rm, fam, grid);
  std::tie(out.lower, out.lower_argmax) = lower_bound(lat, cf, rm, fam, grid);
  out.upper = upper_bound(lat, cf, fam, grid, BoundMode::rectangular);
  out.diagnostics = supermartingale_diagnostic(lat, out, cf);
  return out;
}

// tau*_t = inf{s > t : R_{s-1} - X_s - V_s < 0} ^ (T+1), one stopping time
// per start t = 0..T-1.
inline std::vector<StoppingTime> optimal_default_times(const ScenarioLattice& lat, const ValuationOutput& out) {
  const int T = lat.horizon();
  std::vector<StoppingTime> taus;
  for (int t = 0; t < T; ++t) {
    StoppingTime tau = StoppingTime::constant(lat, T + 1);
    for (NodeId leaf : lat.level(T)) {
      for (int s = t + 1; s <= T; ++s) {
        const NodeId n = lat.ancestor(leaf, s);
        if (out.deficit[static_cast<std::size_t>(s - 1)][lat.slot(n)]) {
          tau.leaf_value[lat.slot(leaf)] = s;
          break;
        }
      }
    }
    taus.push_back(std::move(tau));
  }
  return taus;
}

// Selection realising the argmin theta at every decision node.
inline NodeSelection worst_case_selection(const ScenarioLattice& lat, const ValuationOutput& out,
                                          const std::vector<Theta>& grid) {
  return selection_from_parents(lat, [&](NodeId parent) {
    const int t = lat.node(parent).time;
    return grid.at(out.theta_star[static_cast<std::size_t>(t)][lat.slot(parent)]);
  });
}

inline double liability_value(double v0, double replicating_market_value) { return replicating_market_value + v0; }

// ---------------------------------------------------------------------------
// Path-sample backend

// Closed-form interior layer for a two-period model: layer_sum writes, per
// path, Y = X_1 + V_1 where the time-1 layer is evaluated in closed form and
// the paths are simulated under `measure` (nullptr: under P).
struct SampleLayerModel {
  int horizon = 2;
  std::set<int> closed_form_times;
  std::function<void(const PathSample&, const Theta* measure, std::span<double> out)> layer_sum;
};

struct SampleValuation {
  double R0 = 0.0, C0 = 0.0, V0 = 0.0;
  std::size_t theta_star = 0;
  std::vector<double> c_by_theta;  // E^{Q_theta}[(R_0 - Y)^+] per grid point
};

inline void require_layers(const SampleLayerModel& model) {
  for (int t = 1; t < model.horizon; ++t)
    if (!model.closed_form_times.count(t) || !model.layer_sum)
      throw std::invalid_argument("conditional layer unavailable at t=" + std::to_string(t));
}

// R_0 = rho_0(-Y) under P, C_0 = min over grid of E^{Q_theta}[(R_0 - Y)^+]
// (each Q_theta simulated directly from the same draws), V_0 = R_0 - C_0.
inline SampleValuation value_sample(const PathSample& paths, const SampleLayerModel& model,
                                    const RiskMeasureSpec& rm, const std::vector<Theta>& grid,
                                    Direction dir = Direction::inf) {
  rm.validate();
  require_layers(model);
  if (grid.empty()) throw std::invalid_argument("value_sample: empty theta grid");
  const std::size_t n = paths.n_paths();
  std::vector<double> y(n);
  model.layer_sum(paths, nullptr, y);
  for (double& v : y) v = -v;
  SampleValuation out;
  out.R0 = evaluate(rm, y);
  out.c_by_theta.assign(grid.size(), 0.0);
  parallel_for(grid.size(), [&](std::size_t g) {
    std::vector<double> yq(n);
    model.layer_sum(paths, &grid[g], yq);
    double acc = 0.0;
    for (double v : yq) acc += std::max(0.0, out.R0 - v);
    out.c_by_theta[g] = acc / static_cast<double>(n);
  });
  out.theta_star = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    const double v = out.c_by_theta[g], b = out.c_by_theta[out.theta_star];
    if (dir == Direction::inf ? v < b : v > b) out.theta_star = g;
  }
  out.C0 = out.c_by_theta[out.theta_star];
  out.V0 = out.R0 - out.C0;
  return out;
}

}  // namespace ambival
