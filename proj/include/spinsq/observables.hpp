#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "spinsq/control.hpp"
#include "spinsq/spin_algebra.hpp"

namespace spinsq {

using Direction = std::array<double, 3>;

/// N (Delta J_{n1})^2 / (<J_{n2}>^2 + <J_{n3}>^2) with N = 2J.
/// The frame must be orthonormal to 1e-10 (InvalidArgument otherwise);
/// DegenerateDirection when the denominator is <= 1e-12 J^2.
double xi2_direction(const ComplexMatrix& rho, const SpinOperators& ops, const Direction& n1,
                     const Direction& n2, const Direction& n3);

/// 2J <J_z^2> / <J_x>^2, the z-squeezing of an x-polarised state.
double xi2_z(const ComplexMatrix& rho, const SpinOperators& ops);
double xi2_z(double j, double jz2, double jx);

/// Linearised closed form e^{Mt} / (1 + 2JMt).
double xi2_analytic(double t, MeasurementStrength m, SpinQuantumNumber spin);

struct SqueezingMinimum {
  double t = 0.0;
  double xi2 = 0.0;
};

/// Stationary point of xi2_analytic: t* = (1 - 1/(2J))/M, xi2* = e^{1-1/(2J)}/(2J).
SqueezingMinimum xi2_analytic_minimum(MeasurementStrength m, SpinQuantumNumber spin);

struct SqueezingCurve {
  std::vector<double> times;
  std::vector<double> xi2;
  double j = 0.0;
  std::string gain_label;
};

/// Smallest sample refined by the parabola through it and its neighbours.
/// Throws MinimumAtBoundary when the smallest sample is the first or last.
SqueezingMinimum find_minimum(const SqueezingCurve& curve);

struct ScalingPoint {
  double j = 0.0;
  double xi2_min = 0.0;
  double t_min = 0.0;
};

struct ScalingFit {
  std::vector<double> j_values;
  std::vector<double> xi2_min_values;
  std::vector<double> t_min_values;
  /// Least-squares c in xi2_min = c / J (through the origin in 1/J).
  double coefficient = 0.0;
  /// RMS residual of the c / J model.
  double residual = 0.0;
  /// Free-exponent fit xi2_min = a J^{-b} (least squares in log-log).
  double amplitude = 0.0;
  double exponent = 0.0;
};

/// Needs at least three distinct J values (InsufficientPoints otherwise).
ScalingFit fit_scaling(std::span<const ScalingPoint> points);

}  // namespace spinsq
