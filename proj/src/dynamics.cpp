#include "spinsq/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kernels.hpp"
#include "spinsq/errors.hpp"
#include "spinsq/observables.hpp"

namespace spinsq {

TimeGrid TimeGrid::make(double t_start, double t_end, double dt) {
  if (!std::isfinite(t_start) || !std::isfinite(t_end) || !(t_end > t_start)) {
    throw Error(ErrorCategory::InvalidArgument, "time grid needs t_end > t_start");
  }
  const double span = t_end - t_start;
  if (!(dt > 0.0) || dt > span * (1.0 + 1e-12)) {
    throw Error(ErrorCategory::InvalidArgument, "time grid needs 0 < dt <= t_end - t_start");
  }
  const double ratio = span / dt;
  if (ratio > static_cast<double>(std::numeric_limits<int>::max())) {
    throw Error(ErrorCategory::InvalidArgument, "time grid has too many steps");
  }
  if (std::abs(ratio - std::round(ratio)) > 1e-6) {
    throw Error(ErrorCategory::InvalidArgument,
                "dt = " + std::to_string(dt) + " does not divide the interval evenly");
  }
  return TimeGrid{t_start, t_end, dt};
}

std::size_t TimeGrid::steps() const {
  return static_cast<std::size_t>(std::llround((t_end - t_start) / dt));
}

ObservableSample observe(double t, const ComplexMatrix& rho, double lambda,
                         const SpinOperators& ops) {
  ObservableSample s;
  s.t = t;
  s.jx = detail::sparse_mean(ops.jx_sparse, rho);
  s.jy = detail::sparse_mean(ops.jy_sparse, rho);
  s.jz = detail::jz_mean(rho, ops.m_values);
  s.jz2 = detail::jz2_mean(rho, ops.m_values);
  s.jy2 = detail::sparse_mean(ops.jy2_sparse, rho);
  s.purity = purity(rho);
  s.lambda = lambda;
  const double j = ops.spin.j();
  s.xi2_z = s.jx * s.jx > 1e-12 * j * j ? xi2_z(j, s.jz2, s.jx)
                                        : std::numeric_limits<double>::quiet_NaN();
  return s;
}

ComplexMatrix lindblad_dissipator(const ComplexMatrix& r, const ComplexMatrix& rho) {
  if (r.rows() != rho.rows() || r.cols() != rho.cols() || r.rows() != r.cols()) {
    throw Error(ErrorCategory::DimensionMismatch, "lindblad_dissipator: dimensions differ");
  }
  const ComplexMatrix rdr = r.adjoint() * r;
  return r * rho * r.adjoint() - 0.5 * (rdr * rho + rho * rdr);
}

ComplexMatrix me_rhs(const ComplexMatrix& rho, double t, MeasurementStrength m,
                     const GainSchedule& gain, const SpinOperators& ops) {
  if (rho.rows() != ops.dim() || rho.cols() != ops.dim()) {
    throw Error(ErrorCategory::DimensionMismatch, "me_rhs: state does not match the spin operators");
  }
  const double lambda = gain.evaluate(t, rho, ops);
  return detail::feedback_drift(rho, lambda, m.value, ops);
}

namespace {

// Bound on the spectral radius of the generator for a given lambda:
// |D[J_z]| <= 2J^2, |[J_y, {J_z, .}]| <= 4J^2, |D[J_y]| <= 2J^2.
double generator_bound(double lambda, double m, double j) {
  const double j2 = j * j;
  return 2.0 * j2 * m + 4.0 * j2 * std::abs(lambda) + 2.0 * j2 * lambda * lambda / m;
}

// Keeps dt * bound within the real-axis RK4 stability interval (~2.78).
constexpr double kStableProduct = 2.5;

int substeps_for(double dt, double lambda, double m, double j) {
  const double n = std::ceil(dt * generator_bound(lambda, m, j) / kStableProduct);
  if (!std::isfinite(n) || n > 1e9) return std::numeric_limits<int>::max();
  return std::max(1, static_cast<int>(n));
}

class Rk4Stepper {
 public:
  Rk4Stepper(MeasurementStrength m, const GainSchedule& gain, const SpinOperators& ops)
      : m_(m), gain_(gain), ops_(ops) {}

  ComplexMatrix rhs(double t, const ComplexMatrix& rho) const {
    return detail::feedback_drift(rho, gain_.evaluate(t, rho, ops_), m_.value, ops_);
  }

  // Advances rho over [t, t + h] in n equal substeps; returns the largest
  // trace correction applied.
  double advance(ComplexMatrix& rho, double t, double h, int n) const {
    const double sub = h / n;
    double correction = 0.0;
    for (int s = 0; s < n; ++s) {
      const double ts = t + s * sub;
      const ComplexMatrix k1 = rhs(ts, rho);
      const ComplexMatrix k2 = rhs(ts + 0.5 * sub, rho + (0.5 * sub) * k1);
      const ComplexMatrix k3 = rhs(ts + 0.5 * sub, rho + (0.5 * sub) * k2);
      const ComplexMatrix k4 = rhs(ts + sub, rho + sub * k3);
      rho += (sub / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      correction = std::max(correction, hermitize_and_normalize(rho));
    }
    return correction;
  }

 private:
  MeasurementStrength m_;
  const GainSchedule& gain_;
  const SpinOperators& ops_;
};

bool looks_valid(const ComplexMatrix& rho) {
  if (!rho.allFinite()) return false;
  return purity(rho) <= 1.0 + 1e-9;
}

}  // namespace

EvolutionRecord integrate_me(const DensityMatrix& rho0, const TimeGrid& grid,
                             MeasurementStrength m, const GainSchedule& gain,
                             const SpinOperators& ops, const IntegratorOptions& options) {
  if (rho0.dim() != ops.dim()) {
    throw Error(ErrorCategory::DimensionMismatch,
                "integrate_me: initial state does not match the spin operators");
  }
  rho0.check();

  const double j = ops.spin.j();
  const std::size_t n_steps = grid.steps();
  const Rk4Stepper stepper(m, gain, ops);

  EvolutionRecord record;
  record.samples.reserve(n_steps + 1);
  ComplexMatrix rho = rho0.matrix();

  auto store_state = [&](std::size_t k) {
    const bool strided = options.state_stride > 0 && k % options.state_stride == 0;
    if (strided || k == n_steps) {
      record.state_times.push_back(grid.time(k));
      record.states.emplace_back(rho);
    }
  };

  double lambda = gain.evaluate(grid.t_start, rho, ops);
  record.samples.push_back(observe(grid.t_start, rho, lambda, ops));
  store_state(0);

  for (std::size_t k = 0; k < n_steps; ++k) {
    const double t = grid.time(k);
    int n = substeps_for(grid.dt, lambda, m.value, j);
    ComplexMatrix trial;
    double correction = 0.0;
    for (;;) {
      if (n > options.max_substeps) {
        throw Error(ErrorCategory::PositivityViolation,
                    "integrate_me: no stable step found at t = " + std::to_string(t) +
                        " (needs more than " + std::to_string(options.max_substeps) +
                        " substeps)");
      }
      trial = rho;
      correction = stepper.advance(trial, t, grid.dt, n);
      if (!looks_valid(trial)) {
        n *= 2;
        continue;
      }
      // The gain may have grown during the step; redo if the end-of-step
      // value demands finer substeps than we used.
      const double lambda_end = gain.evaluate(grid.time(k + 1), trial, ops);
      const int needed = substeps_for(grid.dt, lambda_end, m.value, j);
      if (needed > n) {
        n = needed;
        continue;
      }
      lambda = lambda_end;
      break;
    }
    rho = std::move(trial);
    record.max_trace_correction = std::max(record.max_trace_correction, correction);
    record.max_substeps = std::max(record.max_substeps, n);

    if (options.positivity_check_every > 0 && (k + 1) % options.positivity_check_every == 0) {
      const double lowest = DensityMatrix(rho).min_eigenvalue();
      if (lowest < options.positivity_floor) {
        throw Error(ErrorCategory::PositivityViolation,
                    "integrate_me: eigenvalue " + std::to_string(lowest) + " at t = " +
                        std::to_string(grid.time(k + 1)) + "; reduce dt");
      }
    }
    record.samples.push_back(observe(grid.time(k + 1), rho, lambda, ops));
    store_state(k + 1);
  }
  return record;
}

}  // namespace spinsq
