#include "spinsq/observables.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "spinsq/errors.hpp"

namespace spinsq {

namespace {

double dot(const Direction& a, const Direction& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

ComplexMatrix along(const SpinOperators& ops, const Direction& n) {
  return n[0] * ops.jx + n[1] * ops.jy + n[2] * ops.jz;
}

}  // namespace

double xi2_direction(const ComplexMatrix& rho, const SpinOperators& ops, const Direction& n1,
                     const Direction& n2, const Direction& n3) {
  const std::array<const Direction*, 3> frame{&n1, &n2, &n3};
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = a; b < 3; ++b) {
      const double expected = a == b ? 1.0 : 0.0;
      if (std::abs(dot(*frame[a], *frame[b]) - expected) > 1e-10) {
        throw Error(ErrorCategory::InvalidArgument, "xi2_direction: frame is not orthonormal");
      }
    }
  }
  const double j = ops.spin.j();
  const double mean2 = expectation(along(ops, n2), rho);
  const double mean3 = expectation(along(ops, n3), rho);
  const double denom = mean2 * mean2 + mean3 * mean3;
  if (denom <= 1e-12 * j * j) {
    throw Error(ErrorCategory::DegenerateDirection,
                "xi2_direction: mean spin transverse to n1 vanishes");
  }
  return 2.0 * j * variance(along(ops, n1), rho) / denom;
}

double xi2_z(double j, double jz2, double jx) {
  if (jx * jx <= 1e-12 * j * j) {
    throw Error(ErrorCategory::DegenerateDirection, "xi2_z: <J_x> vanishes");
  }
  return 2.0 * j * jz2 / (jx * jx);
}

double xi2_z(const ComplexMatrix& rho, const SpinOperators& ops) {
  return xi2_z(ops.spin.j(), expectation(ops.jz2, rho), expectation(ops.jx, rho));
}

double xi2_analytic(double t, MeasurementStrength m, SpinQuantumNumber spin) {
  if (!(t >= 0.0)) {
    throw Error(ErrorCategory::InvalidArgument, "xi2_analytic needs t >= 0");
  }
  const double mt = m.value * t;
  return std::exp(mt) / (1.0 + 2.0 * spin.j() * mt);
}

SqueezingMinimum xi2_analytic_minimum(MeasurementStrength m, SpinQuantumNumber spin) {
  const double two_j = 2.0 * spin.j();
  const double mt = 1.0 - 1.0 / two_j;
  return {mt / m.value, std::exp(mt) / two_j};
}

SqueezingMinimum find_minimum(const SqueezingCurve& curve) {
  const auto& t = curve.times;
  const auto& y = curve.xi2;
  if (t.size() != y.size()) {
    throw Error(ErrorCategory::InvalidArgument, "find_minimum: times and values differ in length");
  }
  if (t.size() < 3) {
    throw Error(ErrorCategory::InsufficientPoints, "find_minimum needs at least 3 samples");
  }
  const auto best = static_cast<std::size_t>(std::min_element(y.begin(), y.end()) - y.begin());
  if (best == 0 || best + 1 == y.size()) {
    throw Error(ErrorCategory::MinimumAtBoundary,
                "smallest xi2 sits at the grid edge (t = " + std::to_string(t[best]) +
                    "); extend t_end, e.g. to 3/M");
  }
  const double x0 = t[best - 1], x1 = t[best], x2 = t[best + 1];
  const double y0 = y[best - 1], y1 = y[best], y2 = y[best + 1];
  // Vertex of the interpolating parabola (divided differences; handles uneven spacing).
  const double d01 = (y1 - y0) / (x1 - x0);
  const double d12 = (y2 - y1) / (x2 - x1);
  const double curvature = (d12 - d01) / (x2 - x0);
  if (!(curvature > 0.0)) return {x1, y1};
  const double vertex = 0.5 * (x0 + x1) - d01 / (2.0 * curvature);
  const double value = y1 + d01 * (vertex - x1) + curvature * (vertex - x0) * (vertex - x1);
  return {vertex, value};
}

ScalingFit fit_scaling(std::span<const ScalingPoint> points) {
  std::set<double> distinct;
  for (const auto& p : points) {
    if (!(p.j > 0.0) || !(p.xi2_min > 0.0)) {
      throw Error(ErrorCategory::InvalidArgument, "fit_scaling needs positive J and xi2_min");
    }
    distinct.insert(p.j);
  }
  if (distinct.size() < 3) {
    throw Error(ErrorCategory::InsufficientPoints,
                "fit_scaling needs at least 3 distinct J values, got " +
                    std::to_string(distinct.size()));
  }

  ScalingFit fit;
  double sxy = 0.0;
  double sxx = 0.0;
  for (const auto& p : points) {
    fit.j_values.push_back(p.j);
    fit.xi2_min_values.push_back(p.xi2_min);
    fit.t_min_values.push_back(p.t_min);
    const double x = 1.0 / p.j;
    sxy += x * p.xi2_min;
    sxx += x * x;
  }
  fit.coefficient = sxy / sxx;

  double ss = 0.0;
  for (const auto& p : points) {
    const double r = p.xi2_min - fit.coefficient / p.j;
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / static_cast<double>(points.size()));

  // ln xi2 = ln a - b ln J
  const auto n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += std::log(p.j);
    my += std::log(p.xi2_min);
  }
  mx /= n;
  my /= n;
  double cov = 0.0, var = 0.0;
  for (const auto& p : points) {
    const double dx = std::log(p.j) - mx;
    cov += dx * (std::log(p.xi2_min) - my);
    var += dx * dx;
  }
  const double slope = cov / var;
  fit.exponent = -slope;
  fit.amplitude = std::exp(my - slope * mx);
  return fit;
}

}  // namespace spinsq
