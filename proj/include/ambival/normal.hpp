#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

namespace ambival {

inline double normal_pdf(double x) noexcept {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Density of N(mu, sigma^2) at x.
inline double normal_pdf(double x, double mu, double sigma) noexcept {
  return normal_pdf((x - mu) / sigma) / sigma;
}

inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must lie in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>{}, p);
}

inline double chi_squared_quantile(int dof, double p) {
  if (dof < 1) throw std::invalid_argument("chi_squared_quantile: dof must be >= 1");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("chi_squared_quantile: p must lie in (0,1)");
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(dof), p);
}

}  // namespace ambival
