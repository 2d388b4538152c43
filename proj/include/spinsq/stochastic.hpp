#pragma once

// Conditioned evolution under homodyne detection of J_z with the current
// fed back as H_fb = lambda(t) I_c(t) J_y / sqrt(M).
//
// Per step of length dt, with Wiener increment dW:
//   I_c dt   = 2 sqrt(M) <J_z>_c dt + dW
//   d rho_c  = dt { M D[J_z] - i lambda [J_y, J_z . + . J_z] + (lambda^2/M) D[J_y] } rho_c
//            + dW { sqrt(M) H[J_z] rho_c - i (lambda / sqrt(M)) [J_y, rho_c] }
//
// Averaging the update over dW recovers the deterministic feedback master
// equation in dynamics.hpp.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "spinsq/control.hpp"
#include "spinsq/dynamics.hpp"
#include "spinsq/spin_algebra.hpp"

namespace spinsq {

/// Wiener increments for one trajectory. The sequence is a pure function of
/// (master_seed, trajectory_index), independent of which thread draws it.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t master_seed, std::uint64_t trajectory_index);

  /// A stream whose increments are all zero.
  static NoiseStream silent();

  /// dW ~ Normal(0, dt).
  double next(double dt);

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t trajectory_index() const noexcept { return index_; }
  bool is_silent() const noexcept { return silent_; }

 private:
  NoiseStream() = default;

  std::uint64_t master_seed_ = 0;
  std::uint64_t index_ = 0;
  bool silent_ = true;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// H[r] rho = r rho + rho r^dagger - Tr[(r + r^dagger) rho] rho.
ComplexMatrix measurement_superop(const ComplexMatrix& r, const ComplexMatrix& rho);

/// Euler-Maruyama step of the measurement-only SME, then Hermitise + renormalise.
DensityMatrix sme_step_no_feedback(const DensityMatrix& rho_c, double dt, MeasurementStrength m,
                                   double dw, const SpinOperators& ops);

/// Euler-Maruyama step of the feedback SME for a given gain value.
DensityMatrix sme_step_feedback(const DensityMatrix& rho_c, double dt, MeasurementStrength m,
                                double lambda, double dw, const SpinOperators& ops);

/// In-place variant used by the trajectory loop.
void sme_advance(ComplexMatrix& rho_c, double dt, double m, double lambda, double dw,
                 const SpinOperators& ops);

struct ConditionedSample {
  double t = 0.0;
  double jz = 0.0;      // <J_z>_c
  double var_jz = 0.0;  // (Delta J_z)^2_c
  double jx = 0.0;      // <J_x>_c
  double purity = 0.0;
  // Gain and increments of the step that starts at t (NaN on the final sample).
  double lambda = 0.0;
  double current_increment = 0.0;  // integral of I_c over the step
  double wiener_increment = 0.0;
};

struct TrajectoryRecord {
  std::uint64_t master_seed = 0;
  std::uint64_t trajectory_index = 0;
  double dt = 0.0;
  std::vector<ConditionedSample> samples;
  std::vector<double> snapshot_times;
  std::vector<DensityMatrix> snapshots;
  /// Lowest eigenvalue seen at the positivity checks (0 if never checked).
  double min_eigenvalue = 0.0;
};

struct TrajectoryOptions {
  /// Record observables every k-th step (the final time is always recorded).
  std::size_t record_stride = 1;
  /// Store the conditioned state every k-th step; 0 keeps only the final state.
  std::size_t snapshot_stride = 0;
  std::size_t positivity_check_every = 100;
  double positivity_floor = -1e-6;
};

/// Integrates one conditioned trajectory. The gain must be None, Conditioned,
/// AnalyticClosedForm, Tabulated or a Perturbed wrapper of those; the
/// ensemble-consistent gain is a deterministic-ME construct and is rejected.
/// Throws GainSingularity when <J_x>_c falls to the gain's floor.
TrajectoryRecord run_trajectory(const DensityMatrix& rho0, const TimeGrid& grid,
                                MeasurementStrength m, const GainSchedule& gain,
                                const SpinOperators& ops, NoiseStream noise,
                                const TrajectoryOptions& options = {});

struct EnsembleAverage {
  std::size_t n_trajectories = 0;
  // Averages of the recorded conditioned observables, per sample time.
  std::vector<double> times;
  std::vector<double> mean_jz;
  std::vector<double> mean_var_jz;
  std::vector<double> mean_jx;
  std::vector<double> mean_conditional_purity;
  std::vector<double> mean_lambda;
  std::vector<double> mean_current_increment;
  /// E[rho_c] at each snapshot time, with its observables; record.samples[i].purity
  /// is the purity of the averaged state.
  EvolutionRecord record;
};

/// Sums in trajectory order. Throws EmptyCollection for no input and
/// InvalidArgument when the records were taken on different grids.
EnsembleAverage ensemble_average(std::span<const TrajectoryRecord> trajectories,
                                 const SpinOperators& ops);

}  // namespace spinsq
