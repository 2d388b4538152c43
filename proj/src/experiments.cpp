#include "spinsq/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <sstream>
#include <thread>

#include "spinsq/dynamics.hpp"
#include "spinsq/errors.hpp"
#include "spinsq/observables.hpp"
#include "spinsq/spin_algebra.hpp"
#include "spinsq/stochastic.hpp"

namespace spinsq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Error with_context(const Error& e, const std::string& context) {
  return Error(e.category(), context + ": " + e.what());
}

std::string format_j(double j) {
  std::ostringstream os;
  os << j;
  return os.str();
}

TimeGrid physical_grid(const SimulationConfig& c) {
  return TimeGrid::make(0.0, c.t_end / c.m, c.effective_dt() / c.m);
}

struct MinimumResult {
  double t_min = kNaN;  // Mt
  double xi2_min = kNaN;
  double purity_at_min = kNaN;
  std::string status = "ok";
};

double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  auto it = std::lower_bound(xs.begin(), xs.end(), x);
  if (it == xs.begin()) return ys.front();
  if (it == xs.end()) return ys.back();
  const auto hi = static_cast<std::size_t>(it - xs.begin());
  const auto lo = hi - 1;
  const double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return (1.0 - w) * ys[lo] + w * ys[hi];
}

MinimumResult locate_minimum(const EvolutionRecord& record, double m, double j,
                             const std::string& label) {
  SqueezingCurve curve;
  curve.j = j;
  curve.gain_label = label;
  std::vector<double> purities;
  for (const auto& s : record.samples) {
    if (!std::isfinite(s.xi2_z)) break;
    curve.times.push_back(s.t * m);
    curve.xi2.push_back(s.xi2_z);
    purities.push_back(s.purity);
  }
  MinimumResult out;
  try {
    const SqueezingMinimum min = find_minimum(curve);
    out.t_min = min.t;
    out.xi2_min = min.xi2;
    out.purity_at_min = interpolate(curve.times, purities, min.t);
  } catch (const Error& e) {
    out.status = std::string(category_name(e.category()));
  }
  return out;
}

struct SweepPoint {
  double j = 0.0;
  MinimumResult minimum;
};

std::vector<SweepPoint> sweep_minima(const SimulationConfig& c, double epsilon) {
  std::vector<SweepPoint> points(c.j_list.size());
  const MeasurementStrength m(c.m);
  const TimeGrid grid = physical_grid(c);
  IntegratorOptions options;
  options.state_stride = 0;

  parallel_for(points.size(), c.threads, [&](std::size_t i) {
    const double j = c.j_list[i];
    points[i].j = j;
    try {
      const SpinQuantumNumber spin = SpinQuantumNumber::from_j(j);
      const SpinOperators ops = build_spin_operators(spin);
      SimulationConfig local = c;
      local.gain_epsilon = epsilon;
      const GainSchedule gain = make_gain(local, spin);
      const EvolutionRecord rec = integrate_me(css_x(ops), grid, m, gain, ops, options);
      points[i].minimum = locate_minimum(rec, c.m, j, gain.label());
    } catch (const Error& e) {
      points[i].minimum.status = std::string(category_name(e.category()));
    }
  });
  return points;
}

std::optional<ScalingFit> fit_points(const std::vector<SweepPoint>& points) {
  std::vector<ScalingPoint> ok;
  for (const auto& p : points) {
    if (p.minimum.status == "ok") ok.push_back({p.j, p.minimum.xi2_min, p.minimum.t_min});
  }
  try {
    return fit_scaling(ok);
  } catch (const Error&) {
    return std::nullopt;
  }
}

CsvTable sweep_table(const std::string& name, const std::vector<SweepPoint>& points) {
  CsvTable table{name, {"J", "t_min", "xi2_min", "J_xi2_min", "purity_at_min", "status"}, {}};
  for (const auto& p : points) {
    const auto& mn = p.minimum;
    table.add_row({p.j, mn.t_min, mn.xi2_min, p.j * mn.xi2_min, mn.purity_at_min, mn.status});
  }
  return table;
}

void put_fit(ResultBundle& bundle, const std::string& prefix, const std::optional<ScalingFit>& fit) {
  if (!fit) {
    bundle.put(prefix + "fit_status", "insufficient_points");
    bundle.warnings.push_back(prefix + "fit needs at least 3 distinct J values with a minimum");
    return;
  }
  bundle.put(prefix + "fit_status", "ok");
  bundle.put(prefix + "fit_coefficient", fit->coefficient);
  bundle.put(prefix + "fit_residual", fit->residual);
  bundle.put(prefix + "fit_amplitude", fit->amplitude);
  bundle.put(prefix + "fit_exponent", fit->exponent);
}

// The deterministic master equation whose solution E[rho_c] must match.
GainSchedule reference_gain(const SimulationConfig& c, SpinQuantumNumber spin) {
  SimulationConfig ref = c;
  if (c.effective_gain() == GainKind::Conditioned) {
    ref.gain_type = GainKind::EnsembleSelfConsistent;
    ref.mode = Mode::Me;
  }
  return make_gain(ref, spin);
}

}  // namespace

void ResultBundle::put(const std::string& key, const std::string& value) {
  for (auto& kv : summary) {
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  }
  summary.emplace_back(key, value);
}

void ResultBundle::put(const std::string& key, double value) { put(key, format_double(value)); }

const std::string& ResultBundle::get(const std::string& key) const {
  for (const auto& kv : summary) {
    if (kv.first == key) return kv.second;
  }
  throw Error(ErrorCategory::Config, "summary has no key '" + key + "'");
}

const CsvTable& ResultBundle::table(const std::string& name) const {
  for (const auto& t : tables) {
    if (t.name == name) return t;
  }
  throw Error(ErrorCategory::Config, "bundle has no table '" + name + "'");
}

GainSchedule make_gain(const SimulationConfig& c, SpinQuantumNumber spin) {
  const MeasurementStrength m(c.m);
  const double floor = default_jx_floor(spin);
  GainSchedule base = GainSchedule::none();
  switch (c.effective_gain()) {
    case GainKind::None: base = GainSchedule::none(); break;
    case GainKind::Conditioned: base = GainSchedule::conditioned(m, floor); break;
    case GainKind::EnsembleSelfConsistent: base = GainSchedule::ensemble(m, floor); break;
    case GainKind::AnalyticClosedForm: base = GainSchedule::analytic(m, spin); break;
    case GainKind::Tabulated: base = load_gain_table(c.gain_table); break;
    case GainKind::Perturbed:
      throw Error(ErrorCategory::Config, "use gain.epsilon to perturb a schedule");
  }
  if (c.gain_epsilon != 0.0) return GainSchedule::perturbed(std::move(base), c.gain_epsilon);
  return base;
}

ResultBundle run_me_experiment(const SimulationConfig& c) {
  if (c.mode != Mode::Me) throw Error(ErrorCategory::Config, "run_me_experiment needs mode = me");
  const SpinQuantumNumber spin = SpinQuantumNumber::from_j(c.j);
  const SpinOperators ops = build_spin_operators(spin);
  const MeasurementStrength m(c.m);
  const GainSchedule gain = make_gain(c, spin);

  IntegratorOptions options;
  options.state_stride = c.effective_snapshot_stride();
  EvolutionRecord rec;
  try {
    rec = integrate_me(css_x(ops), physical_grid(c), m, gain, ops, options);
  } catch (const Error& e) {
    throw with_context(e, "me run (J = " + format_j(c.j) + ", gain = " + gain.label() + ")");
  }

  ResultBundle bundle;
  std::vector<std::string> cols{"Mt", "purity", "Jx", "Jz2", "Jy2", "lambda", "xi2_z"};
  if (c.analytic_curve) cols.emplace_back("xi2_analytic");
  CsvTable evolution{"evolution", cols, {}};
  for (const auto& s : rec.samples) {
    std::vector<CsvCell> row{s.t * c.m, s.purity, s.jx, s.jz2, s.jy2, s.lambda, s.xi2_z};
    if (c.analytic_curve) row.emplace_back(xi2_analytic(s.t, m, spin));
    evolution.add_row(std::move(row));
  }
  bundle.tables.push_back(std::move(evolution));

  bundle.put("J", c.j);
  bundle.put("gain", gain.label());
  const MinimumResult mn = locate_minimum(rec, c.m, c.j, gain.label());
  bundle.put("minimum_status", mn.status);
  bundle.put("t_min", mn.t_min);
  bundle.put("xi2_min", mn.xi2_min);
  bundle.put("purity_at_min", mn.purity_at_min);
  if (c.analytic_curve) {
    const SqueezingMinimum am = xi2_analytic_minimum(m, spin);
    bundle.put("analytic_t_min", am.t * c.m);
    bundle.put("analytic_xi2_min", am.xi2);
  }
  bundle.put("final_purity", rec.samples.back().purity);
  bundle.put("max_trace_correction", rec.max_trace_correction);
  bundle.put("max_rk4_substeps", static_cast<double>(rec.max_substeps));
  if (mn.status != "ok") {
    bundle.warnings.push_back("no interior xi2 minimum (" + mn.status + ")");
  }
  return bundle;
}

ResultBundle run_sweep(const SimulationConfig& c) {
  if (c.mode != Mode::Sweep) throw Error(ErrorCategory::Config, "run_sweep needs mode = sweep");
  ResultBundle bundle;
  const auto base = sweep_minima(c, c.gain_epsilon);
  bundle.tables.push_back(sweep_table("sweep", base));
  put_fit(bundle, "", fit_points(base));

  const double eps = c.effective_sweep_epsilon();
  if (eps != 0.0) {
    const double combined = (1.0 + c.gain_epsilon) * (1.0 + eps) - 1.0;
    const auto perturbed = sweep_minima(c, combined);
    bundle.tables.push_back(sweep_table("sweep_perturbed", perturbed));
    bundle.put("perturbation_epsilon", eps);
    put_fit(bundle, "perturbed_", fit_points(perturbed));
  }
  for (const auto& p : base) {
    if (p.minimum.status != "ok") {
      bundle.warnings.push_back("J = " + format_j(p.j) + ": " + p.minimum.status);
    }
  }
  return bundle;
}

ResultBundle run_robustness(const SimulationConfig& c) {
  if (c.mode != Mode::Robustness) {
    throw Error(ErrorCategory::Config, "run_robustness needs mode = robustness");
  }
  const double eps = c.effective_sweep_epsilon();
  const double bound = single_shot_bound(eps);
  const auto base = sweep_minima(c, c.gain_epsilon);
  const auto perturbed = sweep_minima(c, (1.0 + c.gain_epsilon) * (1.0 + eps) - 1.0);

  ResultBundle bundle;
  CsvTable table{"robustness",
                 {"J", "xi2_min", "xi2_min_perturbed", "single_shot_bound",
                  "continuous_below_single_shot", "status"},
                 {}};
  for (std::size_t i = 0; i < base.size(); ++i) {
    const bool ok = base[i].minimum.status == "ok" && perturbed[i].minimum.status == "ok";
    const std::int64_t below = ok && perturbed[i].minimum.xi2_min < bound ? 1 : 0;
    table.add_row({base[i].j, base[i].minimum.xi2_min, perturbed[i].minimum.xi2_min, bound, below,
                   ok ? std::string("ok") : base[i].minimum.status + "/" + perturbed[i].minimum.status});
  }
  bundle.tables.push_back(std::move(table));
  bundle.tables.push_back(sweep_table("sweep", base));
  bundle.tables.push_back(sweep_table("sweep_perturbed", perturbed));

  const auto fit = fit_points(base);
  const auto pfit = fit_points(perturbed);
  put_fit(bundle, "", fit);
  put_fit(bundle, "perturbed_", pfit);
  bundle.put("perturbation_epsilon", eps);
  bundle.put("single_shot_bound", bound);
  if (fit && pfit) {
    bundle.put("coefficient_shift_relative",
               (pfit->coefficient - fit->coefficient) / fit->coefficient);
    bundle.put("exponent_shift", pfit->exponent - fit->exponent);
  }
  return bundle;
}

ResultBundle run_sme_experiment(const SimulationConfig& c) {
  if (c.mode != Mode::Sme) throw Error(ErrorCategory::Config, "run_sme_experiment needs mode = sme");
  const SpinQuantumNumber spin = SpinQuantumNumber::from_j(c.j);
  const SpinOperators ops = build_spin_operators(spin);
  const MeasurementStrength m(c.m);
  const GainSchedule gain = make_gain(c, spin);
  const TimeGrid grid = physical_grid(c);
  const DensityMatrix rho0 = css_x(ops);

  TrajectoryOptions options;
  options.record_stride = c.record_stride;
  options.snapshot_stride = c.effective_snapshot_stride();
  options.positivity_floor = c.positivity_floor;

  const std::size_t n = c.n_trajectories;
  std::vector<std::optional<TrajectoryRecord>> records(n);
  std::vector<std::string> failures(n);
  parallel_for(n, c.threads, [&](std::size_t i) {
    try {
      records[i] = run_trajectory(rho0, grid, m, gain, ops, NoiseStream(c.master_seed, i), options);
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::GainSingularity &&
          e.category() != ErrorCategory::PositivityViolation) {
        throw with_context(e, "trajectory " + std::to_string(i));
      }
      failures[i] = std::string(category_name(e.category()));
    }
  });

  ResultBundle bundle;
  CsvTable per_traj{"trajectories",
                    {"index", "status", "final_Jz", "final_var_Jz", "final_Jx", "final_purity",
                     "min_eigenvalue"},
                    {}};
  std::vector<TrajectoryRecord> ok;
  ok.reserve(n);
  std::size_t n_singular = 0, n_negative = 0;
  double lowest_eigenvalue = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (records[i]) {
      const auto& last = records[i]->samples.back();
      per_traj.add_row({static_cast<std::int64_t>(i), std::string("ok"), last.jz, last.var_jz,
                        last.jx, last.purity, records[i]->min_eigenvalue});
      lowest_eigenvalue = std::min(lowest_eigenvalue, records[i]->min_eigenvalue);
      ok.push_back(std::move(*records[i]));
    } else {
      per_traj.add_row({static_cast<std::int64_t>(i), failures[i], kNaN, kNaN, kNaN, kNaN, kNaN});
      ++(failures[i] == "gain_singularity" ? n_singular : n_negative);
    }
  }
  const std::size_t n_failed = n - ok.size();
  if (n_singular > 0) {
    bundle.warnings.push_back(std::to_string(n_singular) +
                              " trajectories hit a gain singularity and were excluded");
  }
  if (n_negative > 0) {
    bundle.warnings.push_back(std::to_string(n_negative) +
                              " trajectories fell below the positivity floor and were excluded");
  }
  if (ok.empty()) {
    throw Error(ErrorCategory::EmptyCollection, "every trajectory failed; nothing to average");
  }

  const EnsembleAverage avg = ensemble_average(ok, ops);

  // Per-time spread of <J_z>_c and of the current residual I_c dt - 2 sqrt(M) <J_z>_c dt.
  const std::size_t n_samples = avg.times.size();
  std::vector<double> jz_sq(n_samples, 0.0), resid(n_samples, 0.0), resid_sq(n_samples, 0.0);
  const double root_m = std::sqrt(c.m);
  for (const auto& tr : ok) {
    for (std::size_t i = 0; i < n_samples; ++i) {
      const auto& s = tr.samples[i];
      jz_sq[i] += s.jz * s.jz;
      const double r = s.current_increment - 2.0 * root_m * s.jz * tr.dt;
      resid[i] += r;
      resid_sq[i] += r * r;
    }
  }
  const double n_ok = static_cast<double>(ok.size());
  auto stderr_of = [&](double sum, double sum_sq) {
    if (ok.size() < 2) return kNaN;
    const double mean = sum / n_ok;
    const double var = std::max(0.0, (sum_sq - n_ok * mean * mean) / (n_ok - 1.0));
    return std::sqrt(var / n_ok);
  };

  CsvTable ensemble{"ensemble",
                    {"Mt", "mean_Jz", "stderr_Jz", "mean_var_Jz_c", "mean_Jx", "mean_purity_c",
                     "mean_lambda", "mean_current_increment", "expected_current_increment",
                     "stderr_current_residual"},
                    {}};
  for (std::size_t i = 0; i < n_samples; ++i) {
    ensemble.add_row({avg.times[i] * c.m, avg.mean_jz[i], stderr_of(avg.mean_jz[i] * n_ok, jz_sq[i]),
                      avg.mean_var_jz[i], avg.mean_jx[i], avg.mean_conditional_purity[i],
                      avg.mean_lambda[i], avg.mean_current_increment[i],
                      2.0 * root_m * avg.mean_jz[i] * grid.dt, stderr_of(resid[i], resid_sq[i])});
  }
  bundle.tables.push_back(std::move(ensemble));

  // Deterministic reference on the same grid, states aligned with the snapshots.
  std::vector<double> distances(avg.record.states.size(), kNaN);
  const GainSchedule ref_gain = reference_gain(c, spin);
  try {
    IntegratorOptions ref_options;
    ref_options.state_stride = options.snapshot_stride;
    const EvolutionRecord ref = integrate_me(rho0, grid, m, ref_gain, ops, ref_options);
    if (ref.states.size() == avg.record.states.size()) {
      for (std::size_t s = 0; s < distances.size(); ++s) {
        distances[s] = trace_distance(avg.record.states[s].matrix(), ref.states[s].matrix());
      }
    }
  } catch (const Error& e) {
    bundle.warnings.push_back(std::string("reference ME failed: ") + e.what());
  }

  CsvTable states{"ensemble_states",
                  {"Mt", "purity_of_mean", "Jx", "Jz", "Jz2", "xi2_z", "trace_distance_vs_me"},
                  {}};
  double max_distance = 0.0;
  double compare_distance = kNaN;
  double compare_at = kNaN;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < avg.record.samples.size(); ++s) {
    const auto& smp = avg.record.samples[s];
    const double mt = smp.t * c.m;
    states.add_row({mt, smp.purity, smp.jx, smp.jz, smp.jz2, smp.xi2_z, distances[s]});
    if (std::isfinite(distances[s])) max_distance = std::max(max_distance, distances[s]);
    if (std::abs(mt - c.compare_time) < best_gap) {
      best_gap = std::abs(mt - c.compare_time);
      compare_distance = distances[s];
      compare_at = mt;
    }
  }
  bundle.tables.push_back(std::move(states));
  bundle.tables.push_back(std::move(per_traj));

  bundle.put("J", c.j);
  bundle.put("gain", gain.label());
  bundle.put("reference_gain", ref_gain.label());
  bundle.put("n_trajectories", static_cast<double>(n));
  bundle.put("n_failed", static_cast<double>(n_failed));
  bundle.put("n_gain_singularity", static_cast<double>(n_singular));
  bundle.put("n_positivity_violation", static_cast<double>(n_negative));
  bundle.put("min_conditioned_eigenvalue", lowest_eigenvalue);
  bundle.put("master_seed", std::to_string(c.master_seed));
  bundle.put("compare_time", compare_at);
  bundle.put("trace_distance_at_compare_time", compare_distance);
  bundle.put("max_trace_distance", max_distance);
  bundle.put("final_mean_conditional_purity", avg.mean_conditional_purity.back());
  bundle.put("final_purity_of_mean", avg.record.samples.back().purity);
  return bundle;
}

ResultBundle run_regime_check(const SimulationConfig& c) {
  if (c.mode != Mode::RegimeCheck) {
    throw Error(ErrorCategory::Config, "run_regime_check needs mode = regime-check");
  }
  const RegimeReport r = regime_check(c.regime, c.regime_threshold);
  ResultBundle bundle;
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  bundle.put("g", r.inputs.g);
  bundle.put("kappa", r.inputs.kappa);
  bundle.put("gamma", r.inputs.gamma);
  bundle.put("delta", r.inputs.delta);
  bundle.put("chi", r.inputs.chi);
  bundle.put("beta_sq", r.inputs.beta_sq);
  bundle.put("n_atoms", r.inputs.n_atoms);
  bundle.put("threshold", r.threshold);
  bundle.put("adiabatic_margin", r.adiabatic_margin);
  bundle.put("adiabatic_ok", flag(r.adiabatic_ok));
  bundle.put("loss_margin", r.loss_margin);
  bundle.put("loss_ok", flag(r.loss_ok));
  bundle.put("detuning_margin", r.detuning_margin);
  bundle.put("detuning_ok", flag(r.detuning_ok));
  bundle.put("onset_ratio", r.onset_ratio);
  bundle.put("squeezing_onset_ok", flag(r.squeezing_onset_ok));
  bundle.put("all_ok", flag(r.adiabatic_ok && r.loss_ok && r.detuning_ok));
  return bundle;
}

ResultBundle run_experiment(const SimulationConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  ResultBundle bundle;
  switch (config.mode) {
    case Mode::Me: bundle = run_me_experiment(config); break;
    case Mode::Sme: bundle = run_sme_experiment(config); break;
    case Mode::Sweep: bundle = run_sweep(config); break;
    case Mode::Robustness: bundle = run_robustness(config); break;
    case Mode::RegimeCheck: bundle = run_regime_check(config); break;
  }
  const auto stop = std::chrono::steady_clock::now();
  bundle.wall_seconds = std::chrono::duration<double>(stop - start).count();
  bundle.config_echo = serialize_config(config);
  return bundle;
}

void write_bundle(const ResultBundle& bundle, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCategory::Io, "cannot create " + out_dir.string() + ": " + ec.message());

  std::ostringstream summary;
  summary << "version = " << kVersion << "\n";
  summary << "wall_seconds = " << format_double(bundle.wall_seconds) << "\n";
  for (const auto& [k, v] : bundle.summary) summary << k << " = " << v << "\n";
  summary << "warnings = " << bundle.warnings.size() << "\n";
  for (std::size_t i = 0; i < bundle.warnings.size(); ++i) {
    summary << "warning." << i << " = " << bundle.warnings[i] << "\n";
  }
  write_text_file(out_dir / "summary.txt", summary.str());
  if (!bundle.config_echo.empty()) write_text_file(out_dir / "config.ini", bundle.config_echo);
  for (const auto& table : bundle.tables) {
    write_text_file(out_dir / (table.name + ".csv"), table.to_string());
  }
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace spinsq
