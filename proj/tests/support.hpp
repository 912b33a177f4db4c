#pragma once

#include <cmath>
#include <functional>

#include "lp/fields.hpp"
#include "lp/geometry.hpp"

namespace lp::test {

inline DomainSpec annulus() { return DomainSpec::make(Disk{0.0, 0.0, 2.0}, Disk{0.0, 0.0, 1.0}); }

/// Grids are cached per spacing so a test binary builds each one once.
inline GridPtr annulus_grid(double h) {
  static std::vector<std::pair<double, GridPtr>> cache;
  for (const auto& [key, g] : cache)
    if (key == h) return g;
  cache.emplace_back(h, make_grid(annulus(), h));
  return cache.back().second;
}

inline const LinkField& annulus_unit(double h) {
  static std::vector<std::pair<double, LinkField>> cache;
  for (const auto& [key, l] : cache)
    if (key == h) return l;
  cache.emplace_back(h, LinkField::unit(annulus_grid(h)));
  return cache.back().second;
}

/// Adaptive Simpson quadrature of f on [a, b] to absolute tolerance eps.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double eps, int depth = 0) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double left = (m - a) / 6.0 * (fa + 4.0 * f(lm) + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * f(rm) + fb);
  if (depth > 40 || std::abs(left + right - whole) <= 15.0 * eps) return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(f, a, m, 0.5 * eps, depth + 1) + adaptive_simpson(f, m, b, 0.5 * eps, depth + 1);
}

/// Lowest eigenvalue of u'' + u'/r + lambda u = 0 on [r0, r1], u(r0) = 0,
/// u'(r1) = 0, by RK4 shooting and bisection on lambda.
inline double annulus_dirichlet_neumann(double r0, double r1) {
  auto end_slope = [&](double lambda) {
    const int steps = 4000;
    const double dr = (r1 - r0) / steps;
    double r = r0, u = 0.0, v = 1.0;
    auto rhs = [lambda](double rr, double uu, double vv) { return -vv / rr - lambda * uu; };
    for (int k = 0; k < steps; ++k) {
      const double k1u = v, k1v = rhs(r, u, v);
      const double k2u = v + 0.5 * dr * k1v, k2v = rhs(r + 0.5 * dr, u + 0.5 * dr * k1u, v + 0.5 * dr * k1v);
      const double k3u = v + 0.5 * dr * k2v, k3v = rhs(r + 0.5 * dr, u + 0.5 * dr * k2u, v + 0.5 * dr * k2v);
      const double k4u = v + dr * k3v, k4v = rhs(r + dr, u + dr * k3u, v + dr * k3v);
      u += dr / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u);
      v += dr / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
      r += dr;
    }
    return v;
  };
  // u'(r1) changes sign once below the second eigenvalue.
  double lo = 0.1, hi = 5.0;
  const double slo = end_slope(lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((end_slope(mid) > 0.0) == (slo > 0.0)) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace lp::test
