#pragma once

// Deterministic (unconditioned) evolution under continuous J_z measurement
// and Markovian feedback:
//
//   d rho/dt = M D[J_z] rho - i lambda(t) [J_y, J_z rho + rho J_z]
//              + (lambda(t)^2 / M) D[J_y] rho
//
// With lambda == 0 this is pure measurement dephasing.

#include <cstddef>
#include <vector>

#include "spinsq/control.hpp"
#include "spinsq/spin_algebra.hpp"

namespace spinsq {

struct TimeGrid {
  double t_start = 0.0;
  double t_end = 0.0;
  double dt = 0.0;

  /// Validates t_end > t_start, 0 < dt <= span, span commensurate with dt.
  static TimeGrid make(double t_start, double t_end, double dt);

  std::size_t steps() const;
  double time(std::size_t k) const { return t_start + static_cast<double>(k) * dt; }
};

/// Expectation values recorded at one grid time.
struct ObservableSample {
  double t = 0.0;
  double jx = 0.0;
  double jy = 0.0;
  double jz = 0.0;
  double jz2 = 0.0;
  double jy2 = 0.0;
  double purity = 0.0;
  double lambda = 0.0;
  double xi2_z = 0.0;  // NaN when <J_x> vanishes
};

ObservableSample observe(double t, const ComplexMatrix& rho, double lambda,
                         const SpinOperators& ops);

struct EvolutionRecord {
  std::vector<ObservableSample> samples;  // one per grid point, including t_start
  std::vector<double> state_times;
  std::vector<DensityMatrix> states;
  double max_trace_correction = 0.0;
  int max_substeps = 1;
};

struct IntegratorOptions {
  /// Store every k-th state (and always the last); 0 stores only the final state.
  std::size_t state_stride = 0;
  std::size_t positivity_check_every = 100;
  double positivity_floor = -1e-6;
  /// Upper bound on RK4 substeps per grid step before giving up.
  int max_substeps = 1 << 16;
};

/// D[r] rho = r rho r^dagger - (r^dagger r rho + rho r^dagger r)/2.
ComplexMatrix lindblad_dissipator(const ComplexMatrix& r, const ComplexMatrix& rho);

/// Full right-hand side at time t. State-dependent gains read rho.
ComplexMatrix me_rhs(const ComplexMatrix& rho, double t, MeasurementStrength m,
                     const GainSchedule& gain, const SpinOperators& ops);

/// Classical RK4 on the grid. Each grid step is split into enough equal
/// substeps to stay inside the RK4 stability region of the current
/// generator; ensemble-consistent gains are re-evaluated at every stage.
/// After each substep rho is re-Hermitised and trace-normalised.
///
/// Throws PositivityViolation when the smallest eigenvalue drops below
/// options.positivity_floor and GainSingularity from the gain.
EvolutionRecord integrate_me(const DensityMatrix& rho0, const TimeGrid& grid,
                             MeasurementStrength m, const GainSchedule& gain,
                             const SpinOperators& ops, const IntegratorOptions& options = {});

}  // namespace spinsq
