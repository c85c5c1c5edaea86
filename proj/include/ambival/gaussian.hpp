#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ambival/normal.hpp"
#include "ambival/parallel.hpp"
#include "ambival/priors.hpp"
#include "ambival/region.hpp"
#include "ambival/riskmeasures.hpp"
#include "ambival/rng.hpp"
#include "ambival/scenario.hpp"
#include "ambival/valuation.hpp"

namespace ambival {

// theta = (beta0, sigma0, beta1, sigma1)
enum GaussianCoord : int { kBeta0 = 0, kSigma0 = 1, kBeta1 = 2, kSigma1 = 3 };

struct GaussianModel {
  double beta0 = 2.0 / 3.0, sigma0 = 0.2, beta1 = 1.5, sigma1 = 0.2;
  int i0 = -10;                     // first accident year
  std::vector<double> exposures;    // v_i for i = i0..0; empty means all ones
  std::optional<double> c_m1_1;     // C_{-1,1}; defaults to beta0

  double v(int i) const {
    if (exposures.empty()) return 1.0;
    const int k = i - i0;
    if (k < 0 || k >= static_cast<int>(exposures.size()))
      throw std::out_of_range("no exposure for accident year " + std::to_string(i));
    return exposures[static_cast<std::size_t>(k)];
  }
  double C_m1_1() const { return c_m1_1.value_or(beta0); }
  Theta theta_P() const { return {beta0, sigma0, beta1, sigma1}; }

  void validate() const {
    if (!(sigma0 > 0.0) || !(sigma1 > 0.0)) throw std::invalid_argument("model: sigmas must be positive");
    if (i0 > -3) throw std::invalid_argument("model: need at least 3 observed accident years (i0 <= -3)");
    for (double e : exposures)
      if (!(e > 0.0)) throw std::invalid_argument("model: exposures must be positive");
    if (!exposures.empty() && exposures.size() != static_cast<std::size_t>(1 - i0))
      throw std::invalid_argument("model: need one exposure per accident year i0..0");
  }
};

// ---------------------------------------------------------------------------
// Development triangles and estimators

struct Triangle {
  int first_year = -10;
  std::vector<double> first;   // C_{i,1}, i = first_year ..
  std::vector<double> second;  // C_{i,2}, one fewer year
  std::vector<double> exposure;
};

inline Triangle simulate_triangle(const GaussianModel& model, int n_years, std::uint64_t seed,
                                  std::uint64_t rep = 0) {
  if (n_years < 3) throw std::invalid_argument("simulate_triangle: need n_years >= 3");
  const double s0 = std::max(model.sigma0, 1e-12), s1 = std::max(model.sigma1, 1e-12);
  const NormalStream e1(seed, stream_id("triangle.eps1", rep)), e2(seed, stream_id("triangle.eps2", rep));
  Triangle tri;
  tri.first_year = model.i0;
  for (int k = 0; k < n_years; ++k) {
    const int i = model.i0 + k;
    const double v = model.exposures.empty() ? 1.0 : model.v(std::min(i, 0));
    const double c1 = model.beta0 + s0 / std::sqrt(v) * e1(static_cast<std::uint64_t>(k));
    tri.first.push_back(c1);
    tri.exposure.push_back(v);
    if (k + 1 < n_years) tri.second.push_back(model.beta1 * c1 + s1 / std::sqrt(v) * e2(static_cast<std::uint64_t>(k)));
  }
  return tri;
}

struct FitResult {
  double beta0 = 0, sigma0_sq = 0, beta1 = 0, sigma1_sq = 0;
};

// Weighted regression estimators with divisors (N1 - 1) and (N2 - 1), N2 = N1 - 1.
inline FitResult fit_params(const Triangle& tri) {
  const std::size_t n1 = tri.first.size(), n2 = tri.second.size();
  if (n1 < 3 || n2 < 2 || n2 >= n1) throw std::invalid_argument("fit_params: need >= 3 years with both columns");
  const auto& v = tri.exposure;
  FitResult f;
  double sv = 0, svc = 0;
  for (std::size_t i = 0; i < n1; ++i) {
    sv += v[i];
    svc += v[i] * tri.first[i];
  }
  f.beta0 = svc / sv;
  double ss0 = 0;
  for (std::size_t i = 0; i < n1; ++i) ss0 += v[i] * (tri.first[i] - f.beta0) * (tri.first[i] - f.beta0);
  f.sigma0_sq = ss0 / static_cast<double>(n1 - 1);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < n2; ++i) {
    num += v[i] * tri.first[i] * tri.second[i];
    den += v[i] * tri.first[i] * tri.first[i];
  }
  if (den == 0.0) throw std::invalid_argument("fit_params: degenerate denominator sum v C_{i,1}^2 = 0");
  f.beta1 = num / den;
  double ss1 = 0;
  for (std::size_t i = 0; i < n2; ++i) {
    const double r = tri.second[i] - f.beta1 * tri.first[i];
    ss1 += v[i] * r * r;
  }
  f.sigma1_sq = ss1 / static_cast<double>(n2 - 1);
  return f;
}

struct EstimatorCloud {
  Eigen::Vector4d mu;
  Eigen::Matrix4d sigma;
  std::vector<std::array<double, 4>> rows;  // (beta0, sigma0, beta1, sigma1) estimates
};

// n_rep triangles over the observed years i0..-1, each refitted; sigma
// columns hold square roots of the variance estimators.
inline EstimatorCloud estimator_cloud(const GaussianModel& model, std::size_t n_rep, std::uint64_t seed) {
  model.validate();
  if (n_rep < 100) throw std::invalid_argument("estimator_cloud: need n_rep >= 100");
  EstimatorCloud cloud;
  cloud.rows.resize(n_rep);
  parallel_for(n_rep, [&](std::size_t r) {
    const FitResult f = fit_params(simulate_triangle(model, -model.i0, seed, r));
    cloud.rows[r] = {f.beta0, std::sqrt(f.sigma0_sq), f.beta1, std::sqrt(f.sigma1_sq)};
  });
  cloud.mu.setZero();
  for (const auto& row : cloud.rows)
    for (int j = 0; j < 4; ++j) cloud.mu(j) += row[static_cast<std::size_t>(j)];
  cloud.mu /= static_cast<double>(n_rep);
  cloud.sigma.setZero();
  for (const auto& row : cloud.rows) {
    Eigen::Vector4d d;
    for (int j = 0; j < 4; ++j) d(j) = row[static_cast<std::size_t>(j)] - cloud.mu(j);
    cloud.sigma += d * d.transpose();
  }
  cloud.sigma /= static_cast<double>(n_rep - 1);
  Eigen::LLT<Eigen::Matrix4d> llt(cloud.sigma);
  if (llt.info() != Eigen::Success) throw std::runtime_error("estimator_cloud: singular covariance, raise n_rep");
  return cloud;
}

// ---------------------------------------------------------------------------
// Closed-form time-1 layer

inline double r1_closed_form(double c01, const GaussianModel& m, double c) {
  const double v0 = m.v(0);
  return v0 * (m.beta1 - 1.0) * c01 + std::sqrt(v0) * m.sigma1 * c;
}

// E[(a - b e)^+] for e ~ N(0,1), b > 0.
inline double positive_part_mean(double a, double b) {
  const double z = a / b;
  return a * normal_cdf(z) + b * normal_pdf(z);
}

// g(theta_1, C01) = E_1^theta[(R_1 - X_2)^+].
inline double closed_form_g(double beta1, double sigma1, double c01, const GaussianModel& m, double c) {
  if (!(sigma1 > 0.0)) throw std::invalid_argument("closed_form_g: sigma1 must be positive");
  const double v0 = m.v(0);
  const double a = v0 * (m.beta1 - beta1) * c01 + std::sqrt(v0) * m.sigma1 * c;
  return positive_part_mean(a, std::sqrt(v0) * sigma1);
}

// ---------------------------------------------------------------------------
// Density family

// phi(eps; mu, sigma^2) / phi(eps; 0, 1)
inline double gaussian_cell_factor(double eps, double mu, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("density factor: sigma must be positive");
  const double z = (eps - mu) / sigma;
  return std::exp(-0.5 * z * z + 0.5 * eps * eps) / sigma;
}

class GaussianFamily {
 public:
  explicit GaussianFamily(GaussianModel model, std::optional<ParamRegion> region = std::nullopt)
      : m_(std::move(model)), region_(std::move(region)) {}

  const GaussianModel& model() const noexcept { return m_; }

  // t = 1: ctx = (eps_{-1,2}, eps_{0,1}); t = 2: ctx = (eps_{0,2}, C_{0,1}).
  double density_step(int t, std::span<const double> th, std::span<const double> ctx) const {
    check(th);
    const double v_m1 = m_.v(-1), v0 = m_.v(0);
    if (t == 1) {
      if (ctx.size() < 2) throw std::invalid_argument("density_step: t=1 needs (eps_-1_2, eps_0_1)");
      const double mu12 = (th[kBeta1] - m_.beta1) / (m_.sigma1 / std::sqrt(v_m1)) * m_.C_m1_1();
      const double mu01 = (th[kBeta0] - m_.beta0) / (m_.sigma0 / std::sqrt(v0));
      return gaussian_cell_factor(ctx[0], mu12, th[kSigma1] / m_.sigma1) *
             gaussian_cell_factor(ctx[1], mu01, th[kSigma0] / m_.sigma0);
    }
    if (t == 2) {
      if (ctx.size() < 2) throw std::invalid_argument("density_step: t=2 needs (eps_0_2, C_0_1)");
      const double mu02 = (th[kBeta1] - m_.beta1) / (m_.sigma1 / std::sqrt(v0)) * ctx[1];
      return gaussian_cell_factor(ctx[0], mu02, th[kSigma1] / m_.sigma1);
    }
    throw std::invalid_argument("density_step: t must be 1 or 2");
  }

 private:
  void check(std::span<const double> th) const {
    if (th.size() != 4) throw std::invalid_argument("density_step: theta must have 4 components");
    if (!(th[kSigma0] > 0.0) || !(th[kSigma1] > 0.0))
      throw std::invalid_argument("density_step: sigma component must be positive");
    if (region_) {
      Eigen::VectorXd z(4);
      for (int j = 0; j < 4; ++j) z(j) = th[static_cast<std::size_t>(j)];
      if (!region_->contains(z, 1e-9)) throw std::invalid_argument("density_step: theta outside the parameter region");
    }
  }
  GaussianModel m_;
  std::optional<ParamRegion> region_;
};

// ---------------------------------------------------------------------------
// Monte Carlo layer

inline const char* const kEpsM12 = "eps_m1_2";
inline const char* const kEps01 = "eps_0_1";
inline const char* const kEps02 = "eps_0_2";

// Innovations for the two-period run-off, antithetic pairs.
inline PathSample gaussian_paths(std::size_t n, std::uint64_t seed) {
  InnovationSpec spec;
  spec.horizon = 2;
  spec.columns = {{kEpsM12, 1}, {kEps01, 1}, {kEps02, 2}};
  spec.antithetic = true;
  return simulate_paths(spec, n, seed);
}

// Piecewise-linear C01 -> C_1 on a fixed knot grid; clamped outside.
struct HFunction {
  std::vector<double> knots, values;
  mutable std::atomic<std::size_t> clamped{0};

  HFunction() = default;
  HFunction(const HFunction& o) : knots(o.knots), values(o.values), clamped(o.clamped.load()) {}
  HFunction& operator=(const HFunction& o) {
    knots = o.knots;
    values = o.values;
    clamped.store(o.clamped.load());
    return *this;
  }

  double operator()(double x) const {
    const double lo = knots.front(), hi = knots.back();
    if (x <= lo || x >= hi) {
      if (x < lo || x > hi) clamped.fetch_add(1, std::memory_order_relaxed);
      return x <= lo ? values.front() : values.back();
    }
    const double step = (hi - lo) / static_cast<double>(knots.size() - 1);
    auto k = static_cast<std::size_t>((x - lo) / step);
    k = std::min(k, knots.size() - 2);
    const double w = (x - knots[k]) / (knots[k + 1] - knots[k]);
    return values[k] + w * (values[k + 1] - values[k]);
  }
};

// h(C01) = opt over the (beta1, sigma1) grid of g at equally spaced knots on [lo, hi].
inline HFunction fit_h(const GaussianModel& m, const std::vector<Eigen::VectorXd>& grid2, std::size_t knots, double lo,
                       double hi, double c, Direction dir = Direction::inf) {
  if (knots < 16) throw std::invalid_argument("fit_h: need at least 16 knots");
  if (grid2.empty()) throw std::invalid_argument("fit_h: empty (beta1, sigma1) grid");
  if (!(hi > lo)) throw std::invalid_argument("fit_h: empty knot range");
  HFunction h;
  h.knots.resize(knots);
  h.values.resize(knots);
  for (std::size_t k = 0; k < knots; ++k) {
    const double x = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(knots - 1);
    h.knots[k] = x;
    double best = 0.0;
    for (std::size_t j = 0; j < grid2.size(); ++j) {
      const double gv = closed_form_g(grid2[j](0), grid2[j](1), x, m, c);
      if (j == 0 || (dir == Direction::inf ? gv < best : gv > best)) best = gv;
    }
    h.values[k] = best;
  }
  return h;
}

// Paths simulated under `measure` (P when null), time-1 value C_1 given by
// `layer` as a function of C01. Writes Y = X_1 + R_1 - C_1 per path.
template <class Layer>
void gaussian_layer_sum(const GaussianModel& m, double c, const PathSample& paths, const Theta* measure,
                        const Layer& layer, std::span<double> out) {
  const double b0 = measure ? (*measure)[kBeta0] : m.beta0;
  const double s0 = measure ? (*measure)[kSigma0] : m.sigma0;
  const double b1 = measure ? (*measure)[kBeta1] : m.beta1;
  const double s1 = measure ? (*measure)[kSigma1] : m.sigma1;
  const double v_m1 = m.v(-1), v0 = m.v(0);
  const double base = v_m1 * (b1 - 1.0) * m.C_m1_1() + std::sqrt(v0) * m.sigma1 * c;
  const double k12 = std::sqrt(v_m1) * s1;
  const double k01 = s0 / std::sqrt(v0);
  const auto e12 = paths.draws(kEpsM12);
  const auto e01 = paths.draws(kEps01);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double c01 = b0 + k01 * e01[i];
    out[i] = base + k12 * e12[i] + v0 * m.beta1 * c01 - layer(c01);
  }
}

// Layer model with C_1 = g(theta_1, C01) for one fixed theta (single prior).
inline SampleLayerModel single_theta_layer(const GaussianModel& m, double c, const Theta& th) {
  SampleLayerModel lm;
  lm.horizon = 2;
  lm.closed_form_times = {1};
  lm.layer_sum = [m, c, th](const PathSample& paths, const Theta* measure, std::span<double> out) {
    const double v0 = m.v(0);
    const double slope = v0 * (m.beta1 - th[kBeta1]), shift = std::sqrt(v0) * m.sigma1 * c;
    const double b = std::sqrt(v0) * th[kSigma1];
    gaussian_layer_sum(m, c, paths, measure, [&](double c01) { return positive_part_mean(slope * c01 + shift, b); },
                       out);
  };
  return lm;
}

inline SampleLayerModel h_layer(const GaussianModel& m, double c, std::shared_ptr<const HFunction> h) {
  SampleLayerModel lm;
  lm.horizon = 2;
  lm.closed_form_times = {1};
  lm.layer_sum = [m, c, h](const PathSample& paths, const Theta* measure, std::span<double> out) {
    gaussian_layer_sum(m, c, paths, measure, [&](double c01) { return (*h)(c01); }, out);
  };
  return lm;
}

// ---------------------------------------------------------------------------
// Case study

struct CaseConfig {
  int case_id = 1;
  RiskMeasureSpec rm{RiskKind::var, 0.05};
  double p = 0.5;
  std::size_t n = 100000;
  std::uint64_t seed = 0;
  std::size_t m = 360;         // boundary points for 2-dimensional projections
  std::size_t m_sphere = 256;  // boundary points for 3- and 4-dimensional boundaries
  std::size_t knots = 64;
  int refine_steps = 12;
  std::size_t refine_starts = 2;
  std::size_t cloud_reps = 1000;
  Direction h_direction = Direction::inf;

  void validate() const {
    if (case_id != 1 && case_id != 2) throw std::invalid_argument("case must be 1 or 2");
    rm.validate();
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("confidence level p must lie in (0,1)");
    if (n < 1000) throw std::invalid_argument("n must be >= 1000");
    if (m < 4) throw std::invalid_argument("boundary resolution m must be >= 4");
    if (m_sphere < 8) throw std::invalid_argument("sphere resolution must be >= 8");
    if (knots < 16) throw std::invalid_argument("knots must be >= 16");
    if (cloud_reps < 100) throw std::invalid_argument("cloud replications must be >= 100");
  }
};

inline Theta to_theta(const Eigen::VectorXd& z) { return Theta(z.data(), z.data() + z.size()); }

inline Admissible gaussian_admissible() {
  return [](const Eigen::VectorXd& z) {
    return z(kBeta0) > 0.0 && z(kSigma0) > 0.0 && z(kBeta1) > 1.0 && z(kSigma1) > 0.0;
  };
}

struct Case1Result {
  double lower = 0.0, upper = 0.0;
  Theta lower_theta, upper_theta;  // upper_theta holds (beta0, beta1)
  double interior_max = 0.0;
  bool interior_exceeds = false;
  std::size_t dropped = 0, evaluations = 0;
};

struct Case2Result {
  double value = 0.0, upper = 0.0, R0 = 0.0, C0 = 0.0;
  Theta theta_star;
  double beta1_min = 0.0, beta1_max = 0.0;
  std::size_t clamped = 0, dropped = 0;
};

// (beta1 - 1) C_{-1,1} v_{-1} + v0 beta0 beta1
inline double case1_upper_objective(const GaussianModel& m, double beta0, double beta1) {
  return m.v(-1) * (beta1 - 1.0) * m.C_m1_1() + m.v(0) * beta0 * beta1;
}

// Upper bound over the (beta0, beta1) projection.
inline std::pair<double, Theta> case1_upper(const CaseConfig& cfg, const GaussianModel& m, const ParamRegion& region) {
  const ParamRegion proj = project_region(region, {kBeta0, kBeta1});
  auto f = [&](const Eigen::VectorXd& z) { return case1_upper_objective(m, z(0), z(1)); };
  const auto best = maximize_on_boundary(proj, cfg.m, f, {}, 3, 40);
  return {best.value, to_theta(best.theta)};
}

// V_0^theta from a P-sample and a Q_theta-sample of X_1 + V_1^theta.
inline double single_prior_v0(const GaussianModel& m, double c, const RiskMeasureSpec& rm, const PathSample& paths,
                              const Theta& th) {
  const SampleLayerModel lm = single_theta_layer(m, c, th);
  std::vector<double> y(paths.n_paths());
  lm.layer_sum(paths, nullptr, y);
  for (double& v : y) v = -v;
  const double R0 = evaluate(rm, y);
  lm.layer_sum(paths, &th, y);
  double acc = 0.0;
  for (double v : y) acc += std::max(0.0, R0 - v);
  return R0 - acc / static_cast<double>(y.size());
}

// `extra` candidates (e.g. optima at neighbouring q) are evaluated as well,
// so the reported maximum never falls below their values.
inline Case1Result case1_bounds(const CaseConfig& cfg, const GaussianModel& m, const ParamRegion& region,
                                const PathSample& paths, const std::vector<Theta>& extra = {}) {
  cfg.validate();
  const double c = gaussian_c(cfg.rm);
  Case1Result res;
  std::tie(res.upper, res.upper_theta) = case1_upper(cfg, m, region);
  auto f = [&](const Eigen::VectorXd& z) { return single_prior_v0(m, c, cfg.rm, paths, to_theta(z)); };
  const auto best = maximize_on_boundary(region, cfg.m_sphere, f, gaussian_admissible(), cfg.refine_starts,
                                         cfg.refine_steps);
  res.lower = best.value;
  res.lower_theta = to_theta(best.theta);
  res.dropped = best.dropped;
  res.evaluations = best.evaluations;
  for (const auto& th : extra) {
    const double v = single_prior_v0(m, c, cfg.rm, paths, th);
    if (v > res.lower) {
      res.lower = v;
      res.lower_theta = th;
    }
  }
  // interior cross-check: half-radius shell plus the center
  if (region.radius2 > 0.0) {
    std::vector<Eigen::VectorXd> pts{region.mu};
    for (std::size_t j = 0; j < 16; ++j) pts.push_back(region.point(0.5 * region.radius(), sphere_direction(4, j, 16)));
    std::vector<double> vals(pts.size(), -std::numeric_limits<double>::infinity());
    const Admissible adm = gaussian_admissible();
    parallel_for(pts.size(), [&](std::size_t i) {
      if (adm(pts[i])) vals[i] = f(pts[i]);
    });
    res.interior_max = *std::max_element(vals.begin(), vals.end());
    const double noise = 3.0 * m.sigma1 / std::sqrt(static_cast<double>(paths.n_paths()));
    res.interior_exceeds = res.interior_max > res.lower + noise;
  }
  return res;
}

// E[C^+] and E[C^-] for C ~ N(mean, sd^2).
inline double normal_positive_mean(double mean, double sd) {
  return mean * normal_cdf(mean / sd) + sd * normal_pdf(mean / sd);
}

inline double case2_upper_objective(const GaussianModel& m, double beta0, double sigma0, double beta1, double b1max,
                                    double b1min) {
  const double v0 = m.v(0);
  const double sd = sigma0 / std::sqrt(v0);
  const double pos = normal_positive_mean(beta0, sd);
  const double neg = pos - beta0;
  return m.v(-1) * (beta1 - 1.0) * m.C_m1_1() + v0 * (beta0 + (b1max - 1.0) * pos - (b1min - 1.0) * neg);
}

// Knot range for h: +-6 sd of C01 around every admissible beta0, widest sigma0.
inline std::pair<double, double> h_knot_range(const GaussianModel& m, const ParamRegion& region) {
  const double r = region.radius();
  const double b0_lo = region.mu(kBeta0) - r * std::sqrt(region.sigma(kBeta0, kBeta0));
  const double b0_hi = region.mu(kBeta0) + r * std::sqrt(region.sigma(kBeta0, kBeta0));
  const double s0_hi =
      std::max(m.sigma0, region.mu(kSigma0) + r * std::sqrt(region.sigma(kSigma0, kSigma0))) / std::sqrt(m.v(0));
  return {std::min(b0_lo, m.beta0) - 6.0 * s0_hi, std::max(b0_hi, m.beta0) + 6.0 * s0_hi};
}

inline Case2Result case2_value(const CaseConfig& cfg, const GaussianModel& m, const ParamRegion& region,
                               const PathSample& paths, const std::vector<Theta>& extra = {}) {
  cfg.validate();
  const double c = gaussian_c(cfg.rm);
  Case2Result res;
  const double r = region.radius();
  const double sd_b1 = std::sqrt(region.sigma(kBeta1, kBeta1));
  res.beta1_max = region.mu(kBeta1) + r * sd_b1;
  res.beta1_min = region.mu(kBeta1) - r * sd_b1;
  if (!(res.beta1_min > 1.0))
    throw std::invalid_argument("case 2 requires beta1_min > 1 on the parameter region (got " +
                                format_number(res.beta1_min, 6) + ")");

  // upper bound over the (beta0, sigma0, beta1) projection
  {
    const ParamRegion proj = project_region(region, {kBeta0, kSigma0, kBeta1});
    auto f = [&](const Eigen::VectorXd& z) {
      return case2_upper_objective(m, z(0), z(1), z(2), res.beta1_max, res.beta1_min);
    };
    auto adm = [](const Eigen::VectorXd& z) { return z(1) > 0.0; };
    res.upper = maximize_on_boundary(proj, 4 * cfg.m_sphere, f, adm, 3, 40).value;
  }

  const ParamRegion proj2 = project_region(region, {kBeta1, kSigma1});
  const BoundaryGrid g2 = boundary_grid(proj2, cfg.m, [](const Eigen::VectorXd& z) { return z(0) > 1.0 && z(1) > 0.0; });
  const auto [lo, hi] = h_knot_range(m, region);
  auto h = std::make_shared<const HFunction>(fit_h(m, g2.points, cfg.knots, lo, hi, c, cfg.h_direction));
  const SampleLayerModel lm = h_layer(m, c, h);

  std::vector<double> y(paths.n_paths());
  lm.layer_sum(paths, nullptr, y);
  for (double& v : y) v = -v;
  res.R0 = evaluate(cfg.rm, y);

  auto neg_c0 = [&](const Eigen::VectorXd& z) {
    const Theta th = to_theta(z);
    std::vector<double> yq(paths.n_paths());
    lm.layer_sum(paths, &th, yq);
    double acc = 0.0;
    for (double v : yq) acc += std::max(0.0, res.R0 - v);
    return -acc / static_cast<double>(yq.size());
  };
  const auto best = maximize_on_boundary(region, cfg.m_sphere, neg_c0, gaussian_admissible(), cfg.refine_starts,
                                         cfg.refine_steps);
  double best_val = best.value;
  Theta best_theta = to_theta(best.theta);
  for (const auto& th : extra) {
    Eigen::VectorXd z(4);
    for (int j = 0; j < 4; ++j) z(j) = th[static_cast<std::size_t>(j)];
    const double v = neg_c0(z);
    if (v > best_val) {
      best_val = v;
      best_theta = th;
    }
  }
  res.C0 = -best_val;
  res.value = res.R0 - res.C0;
  res.theta_star = best_theta;
  res.dropped = best.dropped;
  res.clamped = h->clamped.load();
  return res;
}

// ---------------------------------------------------------------------------
// Table 1 and Figure 1

struct Table1Row {
  int case_id = 1;
  double p = 0, q = 0, lower = 0, upper = 0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  bool interior_exceeds = false;
  std::size_t clamped = 0;
};

inline const std::vector<double>& table1_p_levels() {
  static const std::vector<double> v{0.1, 0.5, 0.9};
  return v;
}
inline const std::vector<double>& table1_q_levels() {
  static const std::vector<double> v{0.10, 0.05, 0.01, 0.005};
  return v;
}

struct CaseStudy {
  GaussianModel model;
  EstimatorCloud cloud;
  PathSample paths;
};

inline CaseStudy prepare_case_study(const GaussianModel& model, const CaseConfig& cfg) {
  model.validate();
  return CaseStudy{model, estimator_cloud(model, cfg.cloud_reps, cfg.seed), gaussian_paths(cfg.n, cfg.seed)};
}

inline ParamRegion case_region(const CaseStudy& study, double p) {
  return ellipsoid_region(study.cloud.mu, study.cloud.sigma, p, 4);
}

// 24 cells: case x p x q, rows ordered case, p, then q.
inline std::vector<Table1Row> table1(const CaseStudy& study, const CaseConfig& base) {
  const auto& ps = table1_p_levels();
  const auto& qs = table1_q_levels();
  std::vector<Table1Row> rows;
  // Case-1 maximisers per (p, q); they are candidates in Case 2 as well, so
  // a Case-2 cell never falls below its Case-1 counterpart for lack of search
  std::vector<std::vector<Theta>> case1_theta(ps.size(), std::vector<Theta>(qs.size()));
  for (int case_id : {1, 2}) {
    for (std::size_t ip = 0; ip < ps.size(); ++ip) {
      const ParamRegion region = case_region(study, ps[ip]);
      std::vector<Theta> carried;  // optima from larger q, re-evaluated at smaller q
      for (std::size_t iq = 0; iq < qs.size(); ++iq) {
        CaseConfig cfg = base;
        cfg.case_id = case_id;
        cfg.p = ps[ip];
        cfg.rm.level = qs[iq];
        Table1Row row{case_id, ps[ip], qs[iq], 0, 0, cfg.n, cfg.seed, false, 0};
        if (case_id == 1) {
          const Case1Result r = case1_bounds(cfg, study.model, region, study.paths, carried);
          row.lower = r.lower;
          row.upper = r.upper;
          row.interior_exceeds = r.interior_exceeds;
          carried.push_back(r.lower_theta);
          case1_theta[ip][iq] = r.lower_theta;
        } else {
          std::vector<Theta> cand = carried;
          cand.push_back(case1_theta[ip][iq]);
          const Case2Result r = case2_value(cfg, study.model, region, study.paths, cand);
          row.lower = r.value;
          row.upper = r.upper;
          row.clamped = r.clamped;
          carried.push_back(r.theta_star);
        }
        rows.push_back(row);
      }
    }
  }
  return rows;
}

struct EllipsePoint {
  double p, x, y;
};

struct Figure1Data {
  std::vector<std::array<double, 2>> scatter_b0b1, scatter_b1s1;
  std::vector<EllipsePoint> ellipse_b0b1, ellipse_b1s1;  // boundary polylines for each p
  std::vector<double> coverage;                          // fraction of the cloud inside the 4-d p-region
};

inline Figure1Data figure1_data(const EstimatorCloud& cloud, const std::vector<double>& ps, std::size_t m = 360) {
  Figure1Data fig;
  for (const auto& r : cloud.rows) {
    fig.scatter_b0b1.push_back({r[kBeta0], r[kBeta1]});
    fig.scatter_b1s1.push_back({r[kBeta1], r[kSigma1]});
  }
  for (double p : ps) {
    const ParamRegion region = ellipsoid_region(cloud.mu, cloud.sigma, p, 4);
    for (const auto& [coords, out] : {std::pair{std::vector<int>{kBeta0, kBeta1}, &fig.ellipse_b0b1},
                                      std::pair{std::vector<int>{kBeta1, kSigma1}, &fig.ellipse_b1s1}}) {
      const ParamRegion proj = project_region(region, coords);
      for (const auto& z : boundary_grid(proj, m).points) out->push_back({p, z(0), z(1)});
    }
    std::size_t inside = 0;
    for (const auto& r : cloud.rows) {
      Eigen::VectorXd z(4);
      for (int j = 0; j < 4; ++j) z(j) = r[static_cast<std::size_t>(j)];
      if (region.mahalanobis2(z) <= region.radius2) ++inside;
    }
    fig.coverage.push_back(static_cast<double>(inside) / static_cast<double>(cloud.rows.size()));
  }
  return fig;
}

}  // namespace ambival
