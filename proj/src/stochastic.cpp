#include "spinsq/stochastic.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "kernels.hpp"
#include "spinsq/errors.hpp"

namespace spinsq {

NoiseStream::NoiseStream(std::uint64_t master_seed, std::uint64_t trajectory_index)
    : master_seed_(master_seed), index_(trajectory_index), silent_(false) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(trajectory_index),
                    static_cast<std::uint32_t>(trajectory_index >> 32)};
  engine_.seed(seq);
}

NoiseStream NoiseStream::silent() { return NoiseStream(); }

double NoiseStream::next(double dt) {
  if (silent_) return 0.0;
  return std::sqrt(dt) * normal_(engine_);
}

ComplexMatrix measurement_superop(const ComplexMatrix& r, const ComplexMatrix& rho) {
  if (r.rows() != rho.rows() || r.cols() != rho.cols()) {
    throw Error(ErrorCategory::DimensionMismatch, "measurement_superop: dimensions differ");
  }
  const Complex shift = ((r + r.adjoint()) * rho).trace();
  return r * rho + rho * r.adjoint() - shift * rho;
}

void sme_advance(ComplexMatrix& rho, double dt, double m, double lambda, double dw,
                 const SpinOperators& ops) {
  ComplexMatrix delta = dt * detail::feedback_drift(rho, lambda, m, ops);
  if (dw != 0.0) {
    const double mean = detail::jz_mean(rho, ops.m_values);
    const auto& mv = ops.m_values;
    const double root_m = std::sqrt(m);
    const auto d = rho.rows();
    for (Eigen::Index c = 0; c < d; ++c) {
      for (Eigen::Index r = 0; r < d; ++r) {
        delta(r, c) += (dw * root_m * (mv(r) + mv(c) - 2.0 * mean)) * rho(r, c);
      }
    }
    if (lambda != 0.0) {
      const ComplexMatrix comm = ops.jy_sparse * rho - rho * ops.jy_sparse;
      delta += Complex(0.0, -dw * lambda / root_m) * comm;
    }
  }
  rho += delta;
  hermitize_and_normalize(rho);
}

namespace {

void require_dims(const DensityMatrix& rho, const SpinOperators& ops) {
  if (rho.dim() != ops.dim()) {
    throw Error(ErrorCategory::DimensionMismatch, "state does not match the spin operators");
  }
}

void require_step(double dt, double dw) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw Error(ErrorCategory::InvalidArgument, "SME step needs dt > 0");
  }
  if (!std::isfinite(dw)) {
    throw Error(ErrorCategory::InvalidArgument, "SME step needs a finite Wiener increment");
  }
}

}  // namespace

DensityMatrix sme_step_no_feedback(const DensityMatrix& rho_c, double dt, MeasurementStrength m,
                                   double dw, const SpinOperators& ops) {
  return sme_step_feedback(rho_c, dt, m, 0.0, dw, ops);
}

DensityMatrix sme_step_feedback(const DensityMatrix& rho_c, double dt, MeasurementStrength m,
                                double lambda, double dw, const SpinOperators& ops) {
  require_dims(rho_c, ops);
  require_step(dt, dw);
  if (!std::isfinite(lambda)) {
    throw Error(ErrorCategory::InvalidArgument, "SME step needs a finite gain");
  }
  ComplexMatrix rho = rho_c.matrix();
  sme_advance(rho, dt, m.value, lambda, dw, ops);
  return DensityMatrix(std::move(rho));
}

TrajectoryRecord run_trajectory(const DensityMatrix& rho0, const TimeGrid& grid,
                                MeasurementStrength m, const GainSchedule& gain,
                                const SpinOperators& ops, NoiseStream noise,
                                const TrajectoryOptions& options) {
  require_dims(rho0, ops);
  if (gain.base_kind() == GainKind::EnsembleSelfConsistent) {
    throw Error(ErrorCategory::InvalidArgument,
                "run_trajectory: the ensemble-consistent gain needs the unconditioned state; "
                "use the conditioned gain instead");
  }
  if (options.record_stride == 0) {
    throw Error(ErrorCategory::InvalidArgument, "record_stride must be >= 1");
  }
  rho0.check();

  const std::size_t n_steps = grid.steps();
  const double dt = grid.dt;
  const double root_m = std::sqrt(m.value);
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

  TrajectoryRecord record;
  record.master_seed = noise.master_seed();
  record.trajectory_index = noise.trajectory_index();
  record.dt = dt;
  record.samples.reserve(n_steps / options.record_stride + 2);

  ComplexMatrix rho = rho0.matrix();
  for (std::size_t k = 0;; ++k) {
    const double t = grid.time(k);
    const bool last = k == n_steps;
    const bool keep = last || k % options.record_stride == 0;

    if ((last || (options.snapshot_stride > 0 && k % options.snapshot_stride == 0))) {
      record.snapshot_times.push_back(t);
      record.snapshots.emplace_back(rho);
    }

    const double jz = detail::jz_mean(rho, ops.m_values);
    ConditionedSample sample;
    if (keep) {
      sample.t = t;
      sample.jz = jz;
      sample.var_jz = detail::jz2_mean(rho, ops.m_values) - jz * jz;
      sample.jx = detail::sparse_mean(ops.jx_sparse, rho);
      sample.purity = purity(rho);
    }
    if (last) {
      sample.lambda = kNaN;
      sample.current_increment = kNaN;
      sample.wiener_increment = kNaN;
      record.samples.push_back(sample);
      break;
    }

    const double lambda = gain.evaluate(t, rho, ops);
    const double dw = noise.next(dt);
    if (keep) {
      sample.lambda = lambda;
      sample.wiener_increment = dw;
      sample.current_increment = 2.0 * root_m * jz * dt + dw;
      record.samples.push_back(sample);
    }
    sme_advance(rho, dt, m.value, lambda, dw, ops);

    if (options.positivity_check_every > 0 && (k + 1) % options.positivity_check_every == 0) {
      if (!rho.allFinite()) {
        throw Error(ErrorCategory::PositivityViolation,
                    "run_trajectory: state became non-finite at t = " + std::to_string(t));
      }
      const double lowest = DensityMatrix(rho).min_eigenvalue();
      record.min_eigenvalue = std::min(record.min_eigenvalue, lowest);
      if (lowest < options.positivity_floor) {
        throw Error(ErrorCategory::PositivityViolation,
                    "run_trajectory: eigenvalue " + std::to_string(lowest) + " at t = " +
                        std::to_string(grid.time(k + 1)) + "; reduce dt");
      }
    }
  }
  return record;
}

EnsembleAverage ensemble_average(std::span<const TrajectoryRecord> trajectories,
                                 const SpinOperators& ops) {
  if (trajectories.empty()) {
    throw Error(ErrorCategory::EmptyCollection, "ensemble_average: no trajectories");
  }
  const TrajectoryRecord& first = trajectories.front();
  const std::size_t n_samples = first.samples.size();
  const std::size_t n_snapshots = first.snapshots.size();
  for (const auto& tr : trajectories) {
    if (tr.samples.size() != n_samples || tr.snapshots.size() != n_snapshots ||
        tr.dt != first.dt) {
      throw Error(ErrorCategory::InvalidArgument,
                  "ensemble_average: trajectories were recorded on different grids");
    }
  }

  EnsembleAverage avg;
  avg.n_trajectories = trajectories.size();
  const double inv_n = 1.0 / static_cast<double>(trajectories.size());

  avg.times.resize(n_samples);
  avg.mean_jz.assign(n_samples, 0.0);
  avg.mean_var_jz.assign(n_samples, 0.0);
  avg.mean_jx.assign(n_samples, 0.0);
  avg.mean_conditional_purity.assign(n_samples, 0.0);
  avg.mean_lambda.assign(n_samples, 0.0);
  avg.mean_current_increment.assign(n_samples, 0.0);
  for (std::size_t i = 0; i < n_samples; ++i) avg.times[i] = first.samples[i].t;

  for (const auto& tr : trajectories) {
    for (std::size_t i = 0; i < n_samples; ++i) {
      const auto& s = tr.samples[i];
      avg.mean_jz[i] += s.jz;
      avg.mean_var_jz[i] += s.var_jz;
      avg.mean_jx[i] += s.jx;
      avg.mean_conditional_purity[i] += s.purity;
      avg.mean_lambda[i] += s.lambda;
      avg.mean_current_increment[i] += s.current_increment;
    }
  }
  for (auto* v : {&avg.mean_jz, &avg.mean_var_jz, &avg.mean_jx, &avg.mean_conditional_purity,
                  &avg.mean_lambda, &avg.mean_current_increment}) {
    for (double& x : *v) x *= inv_n;
  }

  for (std::size_t s = 0; s < n_snapshots; ++s) {
    ComplexMatrix sum = ComplexMatrix::Zero(ops.dim(), ops.dim());
    for (const auto& tr : trajectories) sum += tr.snapshots[s].matrix();
    sum *= inv_n;
    const double t = first.snapshot_times[s];
    avg.record.samples.push_back(observe(t, sum, std::numeric_limits<double>::quiet_NaN(), ops));
    avg.record.state_times.push_back(t);
    avg.record.states.emplace_back(std::move(sum));
  }
  return avg;
}

}  // namespace spinsq
