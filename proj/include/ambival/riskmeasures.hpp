#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ambival/normal.hpp"

namespace ambival {

enum class RiskKind { var, avar };

struct RiskMeasureSpec {
  RiskKind kind = RiskKind::var;
  double level = 0.05;

  void validate() const {
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must lie in (0,1)");
  }
};

inline std::string to_string(RiskKind k) { return k == RiskKind::var ? "VAR" : "AVAR"; }

inline RiskKind parse_risk_kind(const std::string& s) {
  if (s == "VAR" || s == "var") return RiskKind::var;
  if (s == "AVAR" || s == "avar") return RiskKind::avar;
  throw std::invalid_argument("risk measure kind must be VAR or AVAR, got '" + s + "'");
}

namespace detail {

inline void check_sample(std::span<const double> z) {
  if (z.empty()) throw std::invalid_argument("risk measure: empty sample");
  for (double v : z)
    if (!std::isfinite(v)) throw std::invalid_argument("risk measure: non-finite sample value");
}

// 1-based rank of the upper empirical (1-q)-quantile among n points.
inline std::size_t upper_rank(std::size_t n, double q) {
  const double x = (1.0 - q) * static_cast<double>(n);
  // guard against 0.95*1e5 landing a hair above an integer
  auto k = static_cast<std::size_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
  return std::clamp<std::size_t>(k, 1, n);
}

}  // namespace detail

// V@R_q(Z) for an equally weighted sample of outcomes Z: the
// ceil((1-q)n)-th order statistic of the losses -Z.
inline double var_empirical(std::span<const double> z, double q) {
  detail::check_sample(z);
  RiskMeasureSpec{RiskKind::var, q}.validate();
  std::vector<double> loss(z.size());
  std::transform(z.begin(), z.end(), loss.begin(), [](double v) { return -v; });
  const std::size_t k = detail::upper_rank(loss.size(), q);
  std::nth_element(loss.begin(), loss.begin() + static_cast<std::ptrdiff_t>(k - 1), loss.end());
  return loss[k - 1];
}

// AV@R_q(Z) = (1/q) * integral_0^q V@R_v(Z) dv, exact for the empirical law:
// the mean of the top q-fraction of losses, the marginal observation
// entering with a fractional weight.
inline double avar_empirical(std::span<const double> z, double q) {
  detail::check_sample(z);
  RiskMeasureSpec{RiskKind::avar, q}.validate();
  const std::size_t n = z.size();
  std::vector<double> loss(n);
  std::transform(z.begin(), z.end(), loss.begin(), [](double v) { return -v; });
  const double mass = q * static_cast<double>(n);  // tail size in observations
  auto whole = static_cast<std::size_t>(std::floor(mass + 1e-9 * std::max(1.0, mass)));
  whole = std::min(whole, n);
  const std::size_t need = std::min(n, whole + 1);
  std::partial_sort(loss.begin(), loss.begin() + static_cast<std::ptrdiff_t>(need), loss.end(),
                    std::greater<>());
  double acc = 0.0;
  for (std::size_t i = 0; i < whole; ++i) acc += loss[i];
  const double frac = mass - static_cast<double>(whole);
  if (frac > 0.0 && whole < n) acc += frac * loss[whole];
  return acc / mass;
}

// Weighted versions for discrete conditional laws (probabilities summing to 1).
inline double var_weighted(std::span<const double> z, std::span<const double> prob, double q) {
  detail::check_sample(z);
  RiskMeasureSpec{RiskKind::var, q}.validate();
  if (prob.size() != z.size()) throw std::invalid_argument("risk measure: weights must match sample");
  std::vector<std::size_t> order(z.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return z[a] > z[b]; });
  const double target = 1.0 - q;
  double cum = 0.0;
  for (std::size_t i : order) {
    cum += prob[i];
    if (cum >= target - 1e-12) return -z[i];
  }
  return -z[order.back()];
}

inline double avar_weighted(std::span<const double> z, std::span<const double> prob, double q) {
  detail::check_sample(z);
  RiskMeasureSpec{RiskKind::avar, q}.validate();
  if (prob.size() != z.size()) throw std::invalid_argument("risk measure: weights must match sample");
  std::vector<std::size_t> order(z.size());
  std::iota(order.begin(), order.end(), 0);
  // largest losses first
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });
  double left = q, acc = 0.0;
  for (std::size_t i : order) {
    if (left <= 0.0) break;
    const double take = std::min(prob[i], left);
    acc += take * -z[i];
    left -= take;
  }
  return acc / q;
}

inline double evaluate(const RiskMeasureSpec& rm, std::span<const double> z) {
  return rm.kind == RiskKind::var ? var_empirical(z, rm.level) : avar_empirical(z, rm.level);
}

inline double evaluate(const RiskMeasureSpec& rm, std::span<const double> z, std::span<const double> prob) {
  return rm.kind == RiskKind::var ? var_weighted(z, prob, rm.level) : avar_weighted(z, prob, rm.level);
}

// rho(e) for a standard normal e.
inline double gaussian_c(const RiskMeasureSpec& rm) {
  rm.validate();
  const double z = normal_quantile(1.0 - rm.level);
  return rm.kind == RiskKind::var ? z : normal_pdf(z) / rm.level;
}

}  // namespace ambival
