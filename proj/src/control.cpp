#include "spinsq/control.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "spinsq/errors.hpp"

namespace spinsq {

MeasurementStrength::MeasurementStrength(double m) : value(m) {
  if (!(m > 0.0) || !std::isfinite(m)) {
    throw Error(ErrorCategory::InvalidArgument,
                "measurement strength must be positive, got " + std::to_string(m));
  }
}

namespace {

double state_gain(const ComplexMatrix& rho, const SpinOperators& ops, MeasurementStrength m,
                  double jx_floor, const char* what) {
  const double jx = expectation(ops.jx, rho);
  if (!(jx > jx_floor)) {
    throw Error(ErrorCategory::GainSingularity,
                std::string(what) + ": <J_x> = " + std::to_string(jx) +
                    " is at or below the floor " + std::to_string(jx_floor) +
                    "; the linearised feedback regime has broken down");
  }
  return 2.0 * m.value * expectation(ops.jz2, rho) / jx;
}

}  // namespace

double gain_conditioned(const ComplexMatrix& rho, const SpinOperators& ops,
                        MeasurementStrength m, double jx_floor) {
  return state_gain(rho, ops, m, jx_floor, "conditioned gain");
}

double gain_ensemble(const ComplexMatrix& rho, const SpinOperators& ops,
                     MeasurementStrength m, double jx_floor) {
  return state_gain(rho, ops, m, jx_floor, "ensemble gain");
}

double gain_analytic(double t, MeasurementStrength m, SpinQuantumNumber spin) {
  if (!(t >= 0.0)) {
    throw Error(ErrorCategory::InvalidArgument, "gain_analytic needs t >= 0");
  }
  const double mt = m.value * t;
  return m.value * std::exp(0.5 * mt) / (1.0 + 2.0 * spin.j() * mt);
}

std::string gain_kind_name(GainKind kind) {
  switch (kind) {
    case GainKind::None: return "none";
    case GainKind::Conditioned: return "conditioned";
    case GainKind::EnsembleSelfConsistent: return "ensemble";
    case GainKind::AnalyticClosedForm: return "analytic";
    case GainKind::Tabulated: return "tabulated";
    case GainKind::Perturbed: return "perturbed";
  }
  return "unknown";
}

GainKind parse_gain_kind(const std::string& name) {
  for (GainKind k : {GainKind::None, GainKind::Conditioned, GainKind::EnsembleSelfConsistent,
                     GainKind::AnalyticClosedForm, GainKind::Tabulated}) {
    if (gain_kind_name(k) == name) return k;
  }
  throw Error(ErrorCategory::Config, "unknown gain type '" + name +
                                         "' (expected none, conditioned, ensemble, "
                                         "analytic or tabulated)");
}

GainSchedule GainSchedule::none() { return GainSchedule(NoFeedback{}); }

GainSchedule GainSchedule::conditioned(MeasurementStrength m, double jx_floor) {
  return GainSchedule(StateBased{m, jx_floor, true});
}

GainSchedule GainSchedule::ensemble(MeasurementStrength m, double jx_floor) {
  return GainSchedule(StateBased{m, jx_floor, false});
}

GainSchedule GainSchedule::analytic(MeasurementStrength m, SpinQuantumNumber spin) {
  return GainSchedule(Analytic{m, spin});
}

GainSchedule GainSchedule::tabulated(std::vector<double> times, std::vector<double> values) {
  if (times.size() != values.size()) {
    throw Error(ErrorCategory::InvalidArgument, "gain table columns differ in length");
  }
  if (times.size() < 2) {
    throw Error(ErrorCategory::InvalidArgument, "gain table needs at least two rows");
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || !std::isfinite(values[i])) {
      throw Error(ErrorCategory::InvalidArgument, "gain table contains a non-finite entry");
    }
    if (i > 0 && !(times[i] > times[i - 1])) {
      throw Error(ErrorCategory::InvalidArgument,
                  "gain table times must be strictly increasing (row " + std::to_string(i + 1) +
                      ")");
    }
  }
  return GainSchedule(Table{std::move(times), std::move(values)});
}

GainSchedule GainSchedule::perturbed(GainSchedule inner, double epsilon) {
  if (!std::isfinite(epsilon) || epsilon <= -1.0) {
    throw Error(ErrorCategory::InvalidArgument, "perturbation epsilon must be finite and > -1");
  }
  return GainSchedule(Scaled{std::make_shared<const GainSchedule>(std::move(inner)), epsilon});
}

double GainSchedule::evaluate(double t, const ComplexMatrix& rho,
                              const SpinOperators& ops) const {
  struct Visitor {
    double t;
    const ComplexMatrix& rho;
    const SpinOperators& ops;

    double operator()(const NoFeedback&) const { return 0.0; }
    double operator()(const StateBased& s) const {
      return s.conditioned ? gain_conditioned(rho, ops, s.m, s.jx_floor)
                           : gain_ensemble(rho, ops, s.m, s.jx_floor);
    }
    double operator()(const Analytic& a) const { return gain_analytic(t, a.m, a.spin); }
    double operator()(const Table& table) const {
      const auto& ts = table.times;
      if (t < ts.front() || t > ts.back()) {
        throw Error(ErrorCategory::OutOfDomain,
                    "t = " + std::to_string(t) + " lies outside the gain table [" +
                        std::to_string(ts.front()) + ", " + std::to_string(ts.back()) + "]");
      }
      auto it = std::upper_bound(ts.begin(), ts.end(), t);
      if (it == ts.end()) return table.values.back();
      const auto hi = static_cast<std::size_t>(it - ts.begin());
      const auto lo = hi - 1;
      const double w = (t - ts[lo]) / (ts[hi] - ts[lo]);
      return (1.0 - w) * table.values[lo] + w * table.values[hi];
    }
    double operator()(const Scaled& s) const {
      return (1.0 + s.epsilon) * s.inner->evaluate(t, rho, ops);
    }
  };
  return std::visit(Visitor{t, rho, ops}, impl_);
}

GainKind GainSchedule::kind() const noexcept {
  struct Visitor {
    GainKind operator()(const NoFeedback&) const { return GainKind::None; }
    GainKind operator()(const StateBased& s) const {
      return s.conditioned ? GainKind::Conditioned : GainKind::EnsembleSelfConsistent;
    }
    GainKind operator()(const Analytic&) const { return GainKind::AnalyticClosedForm; }
    GainKind operator()(const Table&) const { return GainKind::Tabulated; }
    GainKind operator()(const Scaled&) const { return GainKind::Perturbed; }
  };
  return std::visit(Visitor{}, impl_);
}

GainKind GainSchedule::base_kind() const noexcept {
  if (const auto* s = std::get_if<Scaled>(&impl_)) return s->inner->base_kind();
  return kind();
}

bool GainSchedule::state_dependent() const noexcept {
  const GainKind k = base_kind();
  return k == GainKind::Conditioned || k == GainKind::EnsembleSelfConsistent;
}

double GainSchedule::scale() const noexcept {
  if (const auto* s = std::get_if<Scaled>(&impl_)) return (1.0 + s->epsilon) * s->inner->scale();
  return 1.0;
}

std::string GainSchedule::label() const {
  if (const auto* s = std::get_if<Scaled>(&impl_)) {
    std::ostringstream os;
    os << s->inner->label() << "*(1" << (s->epsilon >= 0 ? "+" : "") << s->epsilon << ")";
    return os.str();
  }
  return gain_kind_name(kind());
}

GainSchedule parse_gain_table(const std::string& text) {
  std::vector<double> times;
  std::vector<double> values;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    double t = 0.0;
    double v = 0.0;
    if (!(fields >> t)) {
      fields.clear();
      std::string rest;
      if (fields >> rest) {
        throw Error(ErrorCategory::Config,
                    "gain table line " + std::to_string(line_no) + ": expected two numbers");
      }
      continue;  // blank or comment-only
    }
    std::string extra;
    if (!(fields >> v) || (fields >> extra)) {
      throw Error(ErrorCategory::Config,
                  "gain table line " + std::to_string(line_no) + ": expected two numbers");
    }
    times.push_back(t);
    values.push_back(v);
  }
  return GainSchedule::tabulated(std::move(times), std::move(values));
}

GainSchedule load_gain_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCategory::Io, "cannot open gain table " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_gain_table(buf.str());
}

RegimeReport regime_check(const RegimeInputs& in, double threshold) {
  const double fields[] = {in.g, in.kappa, in.gamma, in.delta, in.chi, in.beta_sq, in.n_atoms};
  for (double x : fields) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      throw Error(ErrorCategory::InvalidArgument, "regime_check inputs must all be positive");
    }
  }
  if (!(threshold > 0.0)) {
    throw Error(ErrorCategory::InvalidArgument, "regime threshold must be positive");
  }
  RegimeReport r;
  r.inputs = in;
  r.threshold = threshold;
  r.adiabatic_margin = in.kappa / (in.chi * std::sqrt(in.beta_sq * in.n_atoms));
  r.loss_margin = in.g * in.g / (in.n_atoms * in.kappa * in.gamma);
  r.detuning_margin = in.delta / (in.gamma * std::pow(in.n_atoms, 1.5));
  r.onset_ratio = in.g * in.g * in.n_atoms / (in.kappa * in.gamma);
  r.adiabatic_ok = r.adiabatic_margin > threshold;
  r.loss_ok = r.loss_margin > threshold;
  r.detuning_ok = r.detuning_margin > threshold;
  r.squeezing_onset_ok = r.onset_ratio > 1.0;
  return r;
}

double single_shot_bound(double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw Error(ErrorCategory::InvalidArgument, "single_shot_bound needs epsilon in [0, 1]");
  }
  return epsilon * epsilon;
}

}  // namespace spinsq
