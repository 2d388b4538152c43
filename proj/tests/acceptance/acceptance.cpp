// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <string>
#include <vector>

#include "spinsq/dynamics.hpp"
#include "spinsq/errors.hpp"
#include "spinsq/experiments.hpp"
#include "spinsq/observables.hpp"
#include "spinsq/stochastic.hpp"

using namespace spinsq;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [x]");
    pass = pass && ok;
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double column(const CsvTable& t, std::size_t row, const std::string& name) {
  const auto it = std::find(t.columns.begin(), t.columns.end(), name);
  if (it == t.columns.end()) throw Error(ErrorCategory::InvalidArgument, "missing column " + name);
  return std::get<double>(t.rows[row][static_cast<std::size_t>(it - t.columns.begin())]);
}

double num(const ResultBundle& b, const std::string& key) { return std::stod(b.get(key)); }

double max_abs(const ComplexMatrix& m) { return m.cwiseAbs().maxCoeff(); }

Outcome operator_algebra() {
  Outcome o;
  double worst = 0.0;
  const Complex i(0, 1);
  for (double j : {0.5, 1.0, 5.0, 25.0, 50.0}) {
    const auto ops = build_spin_operators(SpinQuantumNumber::from_j(j));
    worst = std::max({worst, max_abs(ops.jx * ops.jy - ops.jy * ops.jx - i * ops.jz),
                      max_abs(ops.jy * ops.jz - ops.jz * ops.jy - i * ops.jx),
                      max_abs(ops.jz * ops.jx - ops.jx * ops.jz - i * ops.jy)});
    const ComplexMatrix cas = ops.jx * ops.jx + ops.jy * ops.jy + ops.jz * ops.jz -
                              j * (j + 1) * ComplexMatrix::Identity(ops.dim(), ops.dim());
    worst = std::max(worst, max_abs(cas));
  }
  o.require(worst <= 1e-10, "max residual " + fmt(worst));
  return o;
}

Outcome qnd_conservation() {
  Outcome o;
  for (double j : {5.0, 25.0}) {
    const auto ops = build_spin_operators(SpinQuantumNumber::from_j(j));
    const auto rec = integrate_me(css_x(ops), TimeGrid::make(0.0, 3.0, 1e-3), MeasurementStrength(1.0),
                                  GainSchedule::none(), ops);
    const auto& first = rec.samples.front();
    double drift_z = 0.0, drift_z2 = 0.0;
    for (const auto& s : rec.samples) {
      drift_z = std::max(drift_z, std::abs(s.jz - first.jz));
      drift_z2 = std::max(drift_z2, std::abs(s.jz2 - first.jz2));
    }
    const double final_purity = rec.samples.back().purity;
    o.require(drift_z <= 1e-8 && drift_z2 <= 1e-8,
              "J=" + fmt(j) + " drift Jz " + fmt(drift_z) + " Jz2 " + fmt(drift_z2));
    o.require(final_purity < 0.99, "J=" + fmt(j) + " final purity " + fmt(final_purity));
  }
  return o;
}

Outcome spin_half_dephasing() {
  Outcome o;
  const auto ops = build_spin_operators(SpinQuantumNumber::from_j(0.5));
  IntegratorOptions opts;
  opts.state_stride = 1000;
  const auto rec = integrate_me(css_x(ops), TimeGrid::make(0.0, 1.0, 1e-3), MeasurementStrength(1.0),
                                GainSchedule::none(), ops, opts);
  const double coherence = std::abs(rec.states.back().matrix()(0, 1));
  const double expected = 0.5 * std::exp(-0.5);
  o.require(std::abs(coherence - expected) <= 1e-6,
            "|rho_01| " + fmt(coherence) + " vs " + fmt(expected));
  return o;
}

Outcome feedback_holds_mean() {
  Outcome o;
  const double j = 25.0;
  const auto spin = SpinQuantumNumber::from_j(j);
  const auto ops = build_spin_operators(spin);
  const MeasurementStrength m(1.0);
  const auto rec = integrate_me(css_x(ops), TimeGrid::make(0.0, 3.0, 1e-3), m,
                                GainSchedule::ensemble(m, default_jx_floor(spin)), ops);
  double worst = 0.0;
  for (const auto& s : rec.samples) worst = std::max(worst, std::abs(s.jz));
  o.require(worst <= 1e-6 * j, "max |<Jz>| " + fmt(worst));
  return o;
}

SimulationConfig me_config(double j, GainKind gain) {
  SimulationConfig c;
  c.mode = Mode::Me;
  c.j = j;
  c.t_end = 3.0;
  c.dt = 1e-3;
  c.gain_type = gain;
  return c;
}

Outcome purity_claim() {
  Outcome o;
  const auto b = run_experiment(me_config(25.0, GainKind::EnsembleSelfConsistent));
  const auto& t = b.table("evolution");
  double lowest = 1.0, lowest_at = 0.0;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const double mt = column(t, k, "Mt");
    if (mt > 1.5 + 1e-9) break;
    const double p = column(t, k, "purity");
    if (p < lowest) lowest = p, lowest_at = mt;
  }
  o.require(lowest >= 0.90, "min purity on Mt<=1.5 " + fmt(lowest) + " at Mt=" + fmt(lowest_at));
  const double at_min = num(b, "purity_at_min");
  o.require(at_min >= 0.95, "purity at xi2 minimum " + fmt(at_min));
  return o;
}

Outcome curve_agreement() {
  Outcome o;
  const auto ens = run_experiment(me_config(25.0, GainKind::EnsembleSelfConsistent));
  const auto ana = run_experiment(me_config(25.0, GainKind::AnalyticClosedForm));
  const double xe = num(ens, "xi2_min"), xa = num(ana, "xi2_min");
  const double te = num(ens, "t_min"), ta = num(ana, "t_min");
  const double dx = std::abs(xe - xa) / xa, dt = std::abs(te - ta) / ta;
  o.require(dx <= 0.10, "xi2_min " + fmt(xe) + " vs " + fmt(xa) + " rel " + fmt(dx));
  o.require(dt <= 0.20, "t_min " + fmt(te) + " vs " + fmt(ta) + " rel " + fmt(dt));
  return o;
}

Outcome analytic_minimum() {
  Outcome o;
  const MeasurementStrength m(1.0);
  for (double j : {5.0, 25.0, 100.0}) {
    const auto spin = SpinQuantumNumber::from_j(j);
    SqueezingCurve curve;
    curve.j = j;
    for (int k = 0; k <= 3000; ++k) {
      const double t = k * 1e-3;
      curve.times.push_back(t);
      curve.xi2.push_back(xi2_analytic(t, m, spin));
    }
    const auto found = find_minimum(curve);
    const double t_star = 1.0 - 1.0 / (2 * j);
    const double x_star = std::exp(1.0 - 1.0 / (2 * j)) / (2 * j);
    const double et = std::abs(found.t - t_star) / t_star;
    const double ex = std::abs(found.xi2 - x_star) / x_star;
    o.require(et <= 1e-4 && ex <= 1e-4, "J=" + fmt(j) + " rel err t " + fmt(et) + " xi2 " + fmt(ex));
    if (j == 25.0) {
      const double large = std::exp(1.0) / (2 * j);
      const double rel = std::abs(found.xi2 - large) / large;
      o.require(rel <= 0.021, "J=25 vs e/2J rel " + fmt(rel));
    }
  }
  return o;
}

SimulationConfig robustness_config() {
  SimulationConfig c;
  c.mode = Mode::Robustness;
  c.j_list = {5, 10, 15, 20, 25, 30, 35, 40};
  c.t_end = 2.0;
  c.dt = 1e-3;
  c.gain_type = GainKind::AnalyticClosedForm;
  c.sweep_epsilon = 0.2;
  return c;
}

Outcome scaling_law(const ResultBundle& b) {
  Outcome o;
  const double exponent = num(b, "fit_exponent");
  const double coefficient = num(b, "fit_coefficient");
  o.require(exponent >= 0.9 && exponent <= 1.1, "b " + fmt(exponent));
  o.require(coefficient >= 1.4 && coefficient <= 2.0, "c " + fmt(coefficient));
  const auto& t = b.table("sweep");
  bool approaching = true;
  double prev_gap = INFINITY;
  std::string series;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const double jx = column(t, k, "J_xi2_min");
    const double gap = std::abs(jx - 1.665);
    approaching = approaching && gap < prev_gap;
    prev_gap = gap;
    series += (k ? "," : "") + fmt(jx);
  }
  o.require(approaching, "J*xi2_min approaches 1.665: " + series);
  return o;
}

Outcome robustness(const ResultBundle& b) {
  Outcome o;
  const double exponent = num(b, "perturbed_fit_exponent");
  const double c0 = num(b, "fit_coefficient");
  const double c1 = num(b, "perturbed_fit_coefficient");
  const double shift = std::abs(c1 - c0) / c0;
  o.require(exponent >= 0.9 && exponent <= 1.1, "perturbed b " + fmt(exponent));
  o.require(shift < 0.10, "c shift " + fmt(shift));
  o.require(std::abs(c1 - 1.744) < std::abs(c0 - 1.744),
            "c " + fmt(c0) + " -> " + fmt(c1) + " toward 1.744");
  const double bound = single_shot_bound(0.2);
  const auto& t = b.table("robustness");
  std::string offenders;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const double j = column(t, k, "J");
    if (j < 20) continue;
    const double x = column(t, k, "xi2_min_perturbed");
    if (!(bound > x)) offenders += (offenders.empty() ? "" : ",") + fmt(j) + ":" + fmt(x);
  }
  o.require(offenders.empty(), "0.04 > xi2_min for J>=20" +
                                   (offenders.empty() ? std::string() : " fails at " + offenders));
  return o;
}

SimulationConfig sme_config(GainKind gain) {
  SimulationConfig c;
  c.mode = Mode::Sme;
  c.j = 2.0;
  c.t_end = 1.0;
  c.dt = 1e-4;
  c.gain_type = gain;
  c.n_trajectories = 1000;
  c.master_seed = 20020101;
  c.record_stride = 100;
  c.snapshot_stride = 1000;
  c.compare_time = 1.0;
  return c;
}

Outcome unraveling(const ResultBundle& plain, const ResultBundle& fed) {
  Outcome o;
  const double d0 = num(plain, "trace_distance_at_compare_time");
  const double d1 = num(fed, "trace_distance_at_compare_time");
  o.require(d0 < 0.05, "no feedback D " + fmt(d0));
  o.require(d1 < 0.05, "conditioned feedback D " + fmt(d1) + " (n_failed " + fed.get("n_failed") + ")");
  return o;
}

Outcome current_statistics(const ResultBundle& plain, const ResultBundle& fed) {
  Outcome o;
  for (const auto* b : {&plain, &fed}) {
    const auto& t = b->table("ensemble");
    double pooled = 0.0, pooled_var = 0.0, at_compare = NAN;
    std::size_t used = 0;
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
      const double got = column(t, k, "mean_current_increment");
      if (!std::isfinite(got)) continue;
      const double resid = got - column(t, k, "expected_current_increment");
      const double se = column(t, k, "stderr_current_residual");
      pooled += resid;
      pooled_var += se * se;
      ++used;
      if (std::abs(column(t, k, "Mt") - 0.9) < 1e-9) at_compare = resid / se;
    }
    const double z = pooled / std::sqrt(pooled_var);
    const std::string tag = b->get("gain");
    o.require(std::abs(z) <= 3.0, tag + " pooled z " + fmt(z) + " over " + std::to_string(used));
    o.require(std::abs(at_compare) <= 3.0, tag + " z at Mt=0.9 " + fmt(at_compare));
  }
  return o;
}

std::string csv_dump(const ResultBundle& b) {
  std::string out;
  for (const auto& t : b.tables) out += t.name + "\n" + t.to_string();
  return out;
}

Outcome reproducibility() {
  Outcome o;
  auto c = sme_config(GainKind::Conditioned);
  c.n_trajectories = 24;
  c.t_end = 0.5;
  c.snapshot_stride = 500;
  std::vector<std::string> dumps;
  for (std::size_t threads : {1, 2, 5}) {
    c.threads = threads;
    dumps.push_back(csv_dump(run_experiment(c)));
  }
  c.threads = 1;
  dumps.push_back(csv_dump(run_experiment(c)));
  const bool same = std::all_of(dumps.begin(), dumps.end(), [&](auto& d) { return d == dumps[0]; });
  o.require(same, "sme CSV identical across reruns with 1/2/5 threads");
  auto other = c;
  other.master_seed += 1;
  o.require(csv_dump(run_experiment(other)) != dumps[0], "different seed changes output");
  const auto me = me_config(5.0, GainKind::EnsembleSelfConsistent);
  o.require(csv_dump(run_experiment(me)) == csv_dump(run_experiment(me)), "me CSV identical on rerun");
  return o;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };

  report(1, "operator algebra", operator_algebra);
  report(2, "QND conservation", qnd_conservation);
  report(3, "spin-1/2 dephasing", spin_half_dephasing);
  report(4, "feedback holds the mean", feedback_holds_mean);
  report(5, "purity during squeezing", purity_claim);
  report(6, "ensemble vs analytic gain", curve_agreement);
  report(7, "analytic minimum", analytic_minimum);

  ResultBundle sweep;
  std::string sweep_error;
  try {
    sweep = run_experiment(robustness_config());
  } catch (const std::exception& e) {
    sweep_error = e.what();
  }
  auto needs_sweep = [&](Outcome (*fn)(const ResultBundle&)) {
    return [&, fn] {
      if (!sweep_error.empty()) throw Error(ErrorCategory::InvalidArgument, sweep_error);
      return fn(sweep);
    };
  };
  report(8, "scaling law", needs_sweep(scaling_law));
  report(9, "robustness to gain error", needs_sweep(robustness));

  ResultBundle plain, fed;
  std::string sme_error;
  try {
    plain = run_experiment(sme_config(GainKind::None));
    fed = run_experiment(sme_config(GainKind::Conditioned));
  } catch (const std::exception& e) {
    sme_error = e.what();
  }
  auto needs_sme = [&](Outcome (*fn)(const ResultBundle&, const ResultBundle&)) {
    return [&, fn] {
      if (!sme_error.empty()) throw Error(ErrorCategory::InvalidArgument, sme_error);
      return fn(plain, fed);
    };
  };
  report(10, "unraveling consistency", needs_sme(unraveling));
  report(11, "current statistics", needs_sme(current_statistics));
  report(12, "reproducibility", reproducibility);

  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
