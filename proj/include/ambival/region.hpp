#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "ambival/normal.hpp"
#include "ambival/parallel.hpp"
#include "ambival/util.hpp"

namespace ambival {

// Ellipsoid {mu + r L s : r^2 <= radius2, |s| = 1} with L L^T = Sigma.
// radius2 = 0 gives the single point {mu}.
struct ParamRegion {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd L;  // lower triangular, positive diagonal
  double radius2 = 0.0;
  std::vector<int> coords;  // coordinates of the parent space this region lives on

  std::size_t dim() const noexcept { return static_cast<std::size_t>(mu.size()); }
  double radius() const noexcept { return std::sqrt(radius2); }

  double mahalanobis2(const Eigen::VectorXd& z) const {
    if (z.size() != mu.size()) throw std::invalid_argument("mahalanobis2: dimension mismatch");
    const Eigen::VectorXd w = L.triangularView<Eigen::Lower>().solve(z - mu);
    return w.squaredNorm();
  }
  bool contains(const Eigen::VectorXd& z, double tol = 1e-10) const {
    return mahalanobis2(z) <= radius2 + tol * std::max(1.0, radius2);
  }
  Eigen::VectorXd point(double r, const Eigen::VectorXd& s) const { return mu + r * (L * s); }
};

namespace detail {

inline Eigen::MatrixXd checked_cholesky(const Eigen::MatrixXd& sigma) {
  const auto k = sigma.rows();
  if (k == 0 || sigma.cols() != k) throw std::invalid_argument("covariance must be a nonempty square matrix");
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("covariance is not symmetric");
  for (Eigen::Index i = 1; i <= k; ++i) {
    Eigen::LLT<Eigen::MatrixXd> llt(sigma.topLeftCorner(i, i));
    if (llt.info() != Eigen::Success || !(llt.matrixL()(i - 1, i - 1) > 0.0))
      throw std::invalid_argument("covariance is not positive definite: leading minor " + std::to_string(i) +
                                  " fails");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  return llt.matrixL();
}

}  // namespace detail

inline ParamRegion make_region(Eigen::VectorXd mu, Eigen::MatrixXd sigma, double radius2) {
  if (mu.size() != sigma.rows()) throw std::invalid_argument("region: mu and Sigma dimensions differ");
  if (!(radius2 >= 0.0) || !std::isfinite(radius2)) throw std::invalid_argument("region: radius^2 must be >= 0");
  ParamRegion reg;
  reg.L = detail::checked_cholesky(sigma);
  reg.mu = std::move(mu);
  reg.sigma = std::move(sigma);
  reg.radius2 = radius2;
  reg.coords.resize(reg.mu.size());
  for (int i = 0; i < static_cast<int>(reg.coords.size()); ++i) reg.coords[static_cast<std::size_t>(i)] = i;
  return reg;
}

// Confidence ellipsoid with radius^2 = chi^2(k) quantile at p.
inline ParamRegion ellipsoid_region(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, double p, int k) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("confidence level p must lie in (0,1)");
  return make_region(mu, sigma, chi_squared_quantile(k, p));
}

// {mu}; boundary grids of a point region return mu itself.
inline ParamRegion point_region(const Eigen::VectorXd& mu) {
  return make_region(mu, Eigen::MatrixXd::Identity(mu.size(), mu.size()), 0.0);
}

// Sub-vector, sub-matrix, same radius^2.
inline ParamRegion project_region(const ParamRegion& reg, const std::vector<int>& subset) {
  if (subset.empty()) throw std::invalid_argument("project_region: empty coordinate subset");
  const auto k = static_cast<Eigen::Index>(subset.size());
  Eigen::VectorXd mu(k);
  Eigen::MatrixXd sigma(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const int a = subset[static_cast<std::size_t>(i)];
    if (a < 0 || a >= static_cast<int>(reg.dim()))
      throw std::invalid_argument("project_region: coordinate " + std::to_string(a) + " out of range");
    mu(i) = reg.mu(a);
    for (Eigen::Index j = 0; j < k; ++j) sigma(i, j) = reg.sigma(a, subset[static_cast<std::size_t>(j)]);
  }
  ParamRegion out = make_region(std::move(mu), std::move(sigma), reg.radius2);
  out.coords.clear();
  for (int a : subset) out.coords.push_back(reg.coords.at(static_cast<std::size_t>(a)));
  return out;
}

// ---------------------------------------------------------------------------
// Unit-sphere designs

inline double radical_inverse(std::size_t index, unsigned base) {
  double inv = 1.0 / base, f = inv, x = 0.0;
  while (index > 0) {
    x += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return x;
}

// Direction j of an m-point design on S^{k-1}. k = 2 uses equal angles
// 2 pi j / m; k >= 3 maps Halton points through the normal quantile and
// normalises. Both schemes are nested when m doubles.
inline Eigen::VectorXd sphere_direction(std::size_t k, std::size_t j, std::size_t m) {
  static constexpr unsigned primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  Eigen::VectorXd s(static_cast<Eigen::Index>(k));
  if (k == 1) {
    s(0) = (j % 2 == 0) ? 1.0 : -1.0;
  } else if (k == 2) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(m);
    s << std::cos(a), std::sin(a);
  } else {
    if (k > std::size(primes)) throw std::invalid_argument("sphere design: dimension too large");
    for (std::size_t i = 0; i < k; ++i)
      s(static_cast<Eigen::Index>(i)) = normal_quantile(radical_inverse(j + 1, primes[i]));
    s.normalize();
  }
  return s;
}

using Admissible = std::function<bool(const Eigen::VectorXd&)>;

struct BoundaryGrid {
  std::vector<Eigen::VectorXd> points;
  std::vector<Eigen::VectorXd> directions;  // unit vectors s with point = mu + r L s
  std::size_t dropped = 0;
};

// m points on the boundary r = radius. Points failing `admissible` are
// dropped and counted; more than max_drop_fraction dropped is an error.
inline BoundaryGrid boundary_grid(const ParamRegion& reg, std::size_t m, const Admissible& admissible = {},
                                  double max_drop_fraction = 0.1) {
  if (m < 2) throw std::invalid_argument("boundary_grid: m must be >= 2");
  BoundaryGrid grid;
  if (reg.radius2 == 0.0) {
    if (admissible && !admissible(reg.mu)) throw std::invalid_argument("boundary_grid: center is not admissible");
    grid.points.push_back(reg.mu);
    grid.directions.push_back(Eigen::VectorXd::Zero(reg.mu.size()));
    return grid;
  }
  const double r = reg.radius();
  for (std::size_t j = 0; j < m; ++j) {
    Eigen::VectorXd s = sphere_direction(reg.dim(), j, m);
    Eigen::VectorXd z = reg.point(r, s);
    if (admissible && !admissible(z)) {
      ++grid.dropped;
      continue;
    }
    grid.points.push_back(std::move(z));
    grid.directions.push_back(std::move(s));
  }
  if (static_cast<double>(grid.dropped) > max_drop_fraction * static_cast<double>(m))
    throw std::runtime_error("boundary_grid: " + std::to_string(grid.dropped) + " of " + std::to_string(m) +
                             " boundary points are not admissible");
  return grid;
}

struct BoundaryOptimum {
  double value = 0.0;
  Eigen::VectorXd theta;
  std::size_t grid_index = 0;  // best grid point before refinement
  std::size_t evaluations = 0;
  std::size_t dropped = 0;
};

// Maximises f over the boundary: grid evaluation (parallel, ties to the
// lowest index), then a deterministic pattern search on the sphere started
// from the best `starts` grid points. refine_steps = 0 disables refinement.
inline BoundaryOptimum maximize_on_boundary(const ParamRegion& reg, std::size_t m,
                                            const std::function<double(const Eigen::VectorXd&)>& f,
                                            const Admissible& admissible = {}, std::size_t starts = 3,
                                            int refine_steps = 12) {
  const BoundaryGrid grid = boundary_grid(reg, m, admissible);
  if (grid.points.empty()) throw std::runtime_error("maximize_on_boundary: empty grid");
  std::vector<double> vals(grid.points.size());
  parallel_for(grid.points.size(), [&](std::size_t i) { vals[i] = f(grid.points[i]); });
  BoundaryOptimum best;
  best.dropped = grid.dropped;
  best.evaluations = vals.size();
  best.grid_index = 0;
  for (std::size_t i = 1; i < vals.size(); ++i)
    if (vals[i] > vals[best.grid_index]) best.grid_index = i;
  best.value = vals[best.grid_index];
  best.theta = grid.points[best.grid_index];
  if (reg.radius2 == 0.0 || refine_steps <= 0) return best;

  std::vector<std::size_t> order(vals.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
  const std::size_t k = reg.dim();
  const double r = reg.radius();
  // initial step ~ grid spacing on the sphere
  const double h0 = k == 2 ? 2.0 * std::numbers::pi / static_cast<double>(m)
                           : 2.0 * std::pow(static_cast<double>(m), -1.0 / static_cast<double>(k - 1));
  for (std::size_t st = 0; st < std::min(starts, order.size()); ++st) {
    Eigen::VectorXd s = grid.directions[order[st]];
    double fs = vals[order[st]];
    double h = h0;
    for (int step = 0; step < refine_steps; ++step) {
      bool moved = false;
      for (std::size_t i = 0; i < k && !moved; ++i) {
        for (double sign : {1.0, -1.0}) {
          Eigen::VectorXd cand = s;
          cand(static_cast<Eigen::Index>(i)) += sign * h;
          cand.normalize();
          const Eigen::VectorXd z = reg.point(r, cand);
          if (admissible && !admissible(z)) continue;
          const double fc = f(z);
          ++best.evaluations;
          if (fc > fs) {
            s = cand;
            fs = fc;
            moved = true;
            break;
          }
        }
      }
      if (!moved) h *= 0.5;
    }
    if (fs > best.value) {
      best.value = fs;
      best.theta = reg.point(r, s);
    }
  }
  return best;
}

}  // namespace ambival
