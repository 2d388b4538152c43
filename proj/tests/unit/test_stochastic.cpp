#include <cmath>
#include <vector>

#include <doctest.h>

#include "spinsq/dynamics.hpp"
#include "spinsq/errors.hpp"
#include "spinsq/experiments.hpp"
#include "spinsq/stochastic.hpp"

using namespace spinsq;

namespace {

double max_abs(const ComplexMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("noise streams are reproducible and independent") {
  NoiseStream a(7, 3), b(7, 3), c(7, 4), d(8, 3);
  std::vector<double> va, vb, vc, vd;
  for (int k = 0; k < 100; ++k) {
    va.push_back(a.next(1e-2));
    vb.push_back(b.next(1e-2));
    vc.push_back(c.next(1e-2));
    vd.push_back(d.next(1e-2));
  }
  CHECK(va == vb);
  CHECK(va != vc);
  CHECK(va != vd);
  auto s = NoiseStream::silent();
  CHECK(s.next(0.1) == 0.0);
}

TEST_CASE("wiener increments have variance dt") {
  NoiseStream n(123, 0);
  const double dt = 1e-3;
  const int count = 200000;
  double sum = 0.0, sq = 0.0;
  for (int k = 0; k < count; ++k) {
    const double w = n.next(dt);
    sum += w;
    sq += w * w;
  }
  const double mean = sum / count;
  const double var = sq / count - mean * mean;
  CHECK(std::abs(mean) < 4.0 * std::sqrt(dt / count));
  CHECK(var == doctest::Approx(dt).epsilon(0.02));
}

TEST_CASE("measurement superoperator is traceless and vanishes on J_z eigenstates") {
  const auto ops = build_spin_operators(SpinQuantumNumber::from_j(2.0));
  const auto rho = css_x(ops).matrix();
  const ComplexMatrix h = measurement_superop(ops.jz, rho);
  CHECK(std::abs(h.trace()) < 1e-13);
  CHECK(max_abs(h - h.adjoint()) < 1e-13);
  ComplexMatrix e = ComplexMatrix::Zero(5, 5);
  e(1, 1) = 1;
  CHECK(max_abs(measurement_superop(ops.jz, e)) < 1e-15);
}

TEST_CASE("zero noise step equals the Euler ME step") {
  const auto spin = SpinQuantumNumber::from_j(3.0);
  const auto ops = build_spin_operators(spin);
  const auto rho = css_x(ops);
  const MeasurementStrength m(1.0);
  const double dt = 1e-3, lambda = 0.7;
  const auto step = sme_step_feedback(rho, dt, m, lambda, 0.0, ops);
  const auto gain = GainSchedule::tabulated({0.0, 1.0}, {lambda, lambda});
  const ComplexMatrix euler = rho.matrix() + dt * me_rhs(rho.matrix(), 0.0, m, gain, ops);
  CHECK(max_abs(step.matrix() - euler) < 1e-14);
  const auto plain = sme_step_no_feedback(rho, dt, m, 0.0, ops);
  CHECK(max_abs(plain.matrix() - (rho.matrix() + dt * lindblad_dissipator(ops.jz, rho.matrix()))) <
        1e-14);
}

TEST_CASE("average of single SME steps matches the Euler ME step") {
  // The noise term is linear in dW with zero mean, so E[rho + d rho] is the
  // Euler step of the unconditional equation. Compare every entry within 3 sigma.
  const auto spin = SpinQuantumNumber::from_j(2.0);
  const auto ops = build_spin_operators(spin);
  const auto rho = css_x(ops);
  const MeasurementStrength m(1.0);
  const double dt = 1e-2, lambda = 0.8;
  const int n = 100000;
  NoiseStream noise(99, 0);
  ComplexMatrix sum = ComplexMatrix::Zero(5, 5);
  Eigen::MatrixXd sq_re = Eigen::MatrixXd::Zero(5, 5), sq_im = Eigen::MatrixXd::Zero(5, 5);
  for (int k = 0; k < n; ++k) {
    const ComplexMatrix s = sme_step_feedback(rho, dt, m, lambda, noise.next(dt), ops).matrix();
    sum += s;
    sq_re += s.real().cwiseProduct(s.real());
    sq_im += s.imag().cwiseProduct(s.imag());
  }
  const ComplexMatrix mean = sum / double(n);
  const auto gain = GainSchedule::tabulated({0.0, 1.0}, {lambda, lambda});
  const ComplexMatrix euler = rho.matrix() + dt * me_rhs(rho.matrix(), 0.0, m, gain, ops);
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 5; ++c) {
      const double sd_re = std::sqrt(std::max(sq_re(r, c) / n - std::pow(mean(r, c).real(), 2), 0.0) / n);
      const double sd_im = std::sqrt(std::max(sq_im(r, c) / n - std::pow(mean(r, c).imag(), 2), 0.0) / n);
      CHECK(std::abs(mean(r, c).real() - euler(r, c).real()) <= 3.0 * sd_re + 1e-12);
      CHECK(std::abs(mean(r, c).imag() - euler(r, c).imag()) <= 3.0 * sd_im + 1e-12);
    }
  }
}

TEST_CASE("spin-1/2 measurement unravelling is a Kraus map in the small-dt limit") {
  // For J = 1/2 the conditioned step with noise dW equals, to first order in
  // dt, the normalised action of K = 1 - (M/8) dt + sqrt(M) J_z (dW + 2 sqrt(M)<J_z> dt).
  const auto ops = build_spin_operators(SpinQuantumNumber::from_j(0.5));
  const auto rho = css_x(ops);
  const MeasurementStrength m(1.0);
  const double dt = 1e-6, dw = 1e-3;
  const auto next = sme_step_no_feedback(rho, dt, m, dw, ops);
  const double jz = expectation(ops.jz, rho);
  const double idt = 2.0 * jz * dt + dw;
  ComplexMatrix k = ComplexMatrix::Identity(2, 2) * (1.0 - dt / 8.0) + ops.jz * idt;
  ComplexMatrix kraus = k * rho.matrix() * k.adjoint();
  kraus /= kraus.trace().real();
  // The Kraus form keeps O(dW^2) terms that Ito drops; their size is dW^2.
  CHECK(max_abs(next.matrix() - kraus) < 2.0 * dw * dw);
}

TEST_CASE("conditioned trajectory bookkeeping") {
  const auto spin = SpinQuantumNumber::from_j(5.0);
  const auto ops = build_spin_operators(spin);
  const MeasurementStrength m(1.0);
  const auto grid = TimeGrid::make(0.0, 0.5, 1e-3);
  TrajectoryOptions opts;
  opts.record_stride = 10;
  opts.snapshot_stride = 100;
  opts.positivity_floor = -1.0;
  const auto gain = GainSchedule::conditioned(m, default_jx_floor(spin));
  const auto rec = run_trajectory(css_x(ops), grid, m, gain, ops, NoiseStream(11, 2), opts);
  CHECK(rec.master_seed == 11);
  CHECK(rec.trajectory_index == 2);
  CHECK(rec.samples.size() == 51);
  CHECK(rec.snapshots.size() == 6);
  CHECK(rec.samples.front().lambda == doctest::Approx(1.0));
  CHECK(std::isnan(rec.samples.back().wiener_increment));
  for (const auto& s : rec.snapshots) s.check(DensityMatrix::Tolerances{1e-9, 1e-9, -1.0});
  CHECK(rec.min_eigenvalue < 0.0);
  // The current increment is 2 sqrt(M) <J_z> dt + dW.
  for (std::size_t k = 0; k + 1 < rec.samples.size(); ++k) {
    const auto& s = rec.samples[k];
    CHECK(s.current_increment ==
          doctest::Approx(2.0 * s.jz * 1e-3 + s.wiener_increment).epsilon(1e-12));
  }
  // Same seed reproduces exactly.
  const auto again = run_trajectory(css_x(ops), grid, m, gain, ops, NoiseStream(11, 2), opts);
  CHECK(again.samples.back().jz == rec.samples.back().jz);
  CHECK_THROWS_AS(run_trajectory(css_x(ops), grid, m, GainSchedule::ensemble(m, 1e-6), ops,
                                 NoiseStream(11, 2), opts),
                  Error);
}

TEST_CASE("silent trajectory with a fixed schedule reproduces the ME") {
  // With dW = 0 the SME reduces to Euler integration of the ME.
  const auto spin = SpinQuantumNumber::from_j(3.0);
  const auto ops = build_spin_operators(spin);
  const MeasurementStrength m(1.0);
  const auto grid = TimeGrid::make(0.0, 0.5, 1e-4);
  TrajectoryOptions opts;
  opts.record_stride = 100;
  opts.snapshot_stride = 5000;
  opts.positivity_floor = -1e-3;
  const auto gain = GainSchedule::analytic(m, spin);
  const auto sme = run_trajectory(css_x(ops), grid, m, gain, ops, NoiseStream::silent(), opts);
  IntegratorOptions io;
  io.state_stride = 5000;
  const auto me = integrate_me(css_x(ops), grid, m, gain, ops, io);
  CHECK(trace_distance(sme.snapshots.back().matrix(), me.states.back().matrix()) < 1e-3);
}

TEST_CASE("ensemble averages are independent of the thread count") {
  const auto spin = SpinQuantumNumber::from_j(3.0);
  const auto ops = build_spin_operators(spin);
  const MeasurementStrength m(1.0);
  const auto grid = TimeGrid::make(0.0, 0.2, 1e-3);
  TrajectoryOptions opts;
  opts.record_stride = 20;
  opts.snapshot_stride = 50;
  opts.positivity_floor = -1.0;
  const auto gain = GainSchedule::conditioned(m, default_jx_floor(spin));
  auto run = [&](std::size_t threads) {
    std::vector<TrajectoryRecord> recs(12);
    parallel_for(recs.size(), threads, [&](std::size_t i) {
      recs[i] = run_trajectory(css_x(ops), grid, m, gain, ops, NoiseStream(5, i), opts);
    });
    return ensemble_average(recs, ops);
  };
  const auto one = run(1);
  const auto four = run(4);
  CHECK(one.n_trajectories == 12);
  CHECK(one.mean_jz == four.mean_jz);
  CHECK(one.mean_var_jz == four.mean_var_jz);
  REQUIRE(one.record.states.size() == four.record.states.size());
  for (std::size_t k = 0; k < one.record.states.size(); ++k) {
    CHECK(max_abs(one.record.states[k].matrix() - four.record.states[k].matrix()) == 0.0);
    one.record.states[k].check(DensityMatrix::Tolerances{1e-9, 1e-9, -1e-2});
  }
  CHECK_THROWS_AS(ensemble_average(std::span<const TrajectoryRecord>{}, ops), Error);
}

TEST_CASE("the default floor flags Euler-Maruyama negativity") {
  // A pure conditioned state picks up eigenvalues of order Var(J_z) |dt - dW^2|
  // per step, far below -1e-6 after a few hundred steps at dt = 1e-4.
  const auto spin = SpinQuantumNumber::from_j(2.0);
  const auto ops = build_spin_operators(spin);
  const MeasurementStrength m(1.0);
  const auto grid = TimeGrid::make(0.0, 0.5, 1e-4);
  try {
    run_trajectory(css_x(ops), grid, m, GainSchedule::none(), ops, NoiseStream(1, 0));
    FAIL("expected PositivityViolation");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::PositivityViolation);
  }
  TrajectoryOptions loose;
  loose.positivity_floor = -0.1;
  const auto rec =
      run_trajectory(css_x(ops), grid, m, GainSchedule::none(), ops, NoiseStream(1, 0), loose);
  CHECK(rec.min_eigenvalue < -1e-6);
  CHECK(rec.min_eigenvalue > -0.1);
}
