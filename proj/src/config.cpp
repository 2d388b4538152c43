#include "spinsq/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "spinsq/csv.hpp"
#include "spinsq/errors.hpp"

namespace spinsq {

namespace pt = boost::property_tree;

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::Me: return "me";
    case Mode::Sme: return "sme";
    case Mode::Sweep: return "sweep";
    case Mode::Robustness: return "robustness";
    case Mode::RegimeCheck: return "regime-check";
  }
  return "unknown";
}

Mode parse_mode(const std::string& name) {
  for (Mode m : {Mode::Me, Mode::Sme, Mode::Sweep, Mode::Robustness, Mode::RegimeCheck}) {
    if (mode_name(m) == name) return m;
  }
  throw Error(ErrorCategory::Config, "unknown mode '" + name + "'");
}

double SimulationConfig::effective_dt() const {
  if (dt) return *dt;
  return mode == Mode::Sme ? 1e-4 : 1e-3;
}

GainKind SimulationConfig::effective_gain() const {
  if (gain_type) return *gain_type;
  switch (mode) {
    case Mode::Sme: return GainKind::Conditioned;
    case Mode::Sweep:
    case Mode::Robustness: return GainKind::AnalyticClosedForm;
    default: return GainKind::EnsembleSelfConsistent;
  }
}

std::size_t SimulationConfig::effective_snapshot_stride() const {
  if (snapshot_stride) return *snapshot_stride;
  // Every 0.1 Mt on the default grids.
  return mode == Mode::Sme ? 1000 : 100;
}

double SimulationConfig::effective_sweep_epsilon() const {
  if (sweep_epsilon) return *sweep_epsilon;
  return mode == Mode::Robustness ? 0.2 : 0.0;
}

void SimulationConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCategory::Config, msg); };
  if (threads == 0) fail("run.threads must be >= 1");
  if (!(m > 0.0) || !std::isfinite(m)) fail("system.m must be positive");
  auto check_j = [&](double value, const char* key) {
    const double twice = 2.0 * value;
    if (!(value > 0.0) || std::abs(twice - std::round(twice)) > 1e-9) {
      fail(std::string(key) + " must be a positive multiple of 1/2");
    }
  };
  check_j(j, "system.j");
  for (double v : j_list) check_j(v, "system.j_list");
  if ((mode == Mode::Sweep || mode == Mode::Robustness) && j_list.empty()) {
    fail("system.j_list must not be empty for sweep/robustness");
  }
  if (!(t_end > 0.0) || !std::isfinite(t_end)) fail("grid.t_end must be positive");
  const double step = effective_dt();
  if (!(step > 0.0) || step > t_end) fail("grid.dt must lie in (0, t_end]");
  const double ratio = t_end / step;
  if (std::abs(ratio - std::round(ratio)) > 1e-6) fail("grid.dt must divide grid.t_end");
  if (!std::isfinite(gain_epsilon) || gain_epsilon <= -1.0) fail("gain.epsilon must be > -1");
  const GainKind kind = effective_gain();
  if (kind == GainKind::Tabulated && gain_table.empty()) {
    fail("gain.table is required for gain.type = tabulated");
  }
  if (mode == Mode::Sme && kind == GainKind::EnsembleSelfConsistent) {
    fail("gain.type = ensemble is a deterministic-ME gain; use conditioned for sme");
  }
  if (mode != Mode::Sme && kind == GainKind::Conditioned) {
    fail("gain.type = conditioned needs conditioned states; use it with mode sme");
  }
  if (mode == Mode::Sme && n_trajectories == 0) fail("sme.n_trajectories must be >= 1");
  if (record_stride == 0) fail("sme.record_stride must be >= 1");
  if (!(compare_time >= 0.0)) fail("sme.compare_time must be >= 0");
  if (!(positivity_floor <= 0.0)) fail("sme.positivity_floor must be <= 0");
  if (const double e = effective_sweep_epsilon(); !std::isfinite(e) || e <= -1.0) {
    fail("sweep.epsilon must be > -1");
  }
  if (mode == Mode::Robustness) {
    const double e = effective_sweep_epsilon();
    if (!(e >= 0.0 && e <= 1.0)) fail("sweep.epsilon must lie in [0, 1] for robustness");
  }
  if (mode == Mode::RegimeCheck) {
    const std::pair<const char*, double> fields[] = {
        {"g", regime.g},         {"kappa", regime.kappa}, {"gamma", regime.gamma},
        {"delta", regime.delta}, {"chi", regime.chi},     {"beta_sq", regime.beta_sq},
        {"n_atoms", regime.n_atoms}};
    for (const auto& [key, value] : fields) {
      if (!(value > 0.0)) fail(std::string("regime.") + key + " is missing or not positive");
    }
    if (!(regime_threshold > 0.0)) fail("regime.threshold must be positive");
  }
}

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"run", {"mode", "threads"}},
      {"system", {"j", "j_list", "m"}},
      {"grid", {"t_end", "dt"}},
      {"gain", {"type", "epsilon", "table"}},
      {"sme", {"n_trajectories", "master_seed", "record_stride", "compare_time", "positivity_floor"}},
      {"sweep", {"epsilon"}},
      {"output", {"dir", "snapshot_stride", "analytic_curve"}},
      {"regime", {"g", "kappa", "gamma", "delta", "chi", "beta_sq", "n_atoms", "threshold"}},
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw Error(ErrorCategory::Config, key + ": expected a number, got '" + raw + "'");
  }
  return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw Error(ErrorCategory::Config,
                key + ": expected a non-negative integer, got '" + raw + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw Error(ErrorCategory::Config, key + ": expected true/false, got '" + raw + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& raw) {
  std::string s = raw;
  for (char& c : s) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(s);
  std::vector<double> out;
  std::string token;
  while (in >> token) out.push_back(to_double(key, token));
  return out;
}

}  // namespace

SimulationConfig parse_config(const std::string& text, std::optional<Mode> subcommand) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCategory::Config, std::string("config syntax: ") + e.what());
  }

  SimulationConfig c;
  std::optional<Mode> declared;
  const auto& known = known_keys();
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) {
      throw Error(ErrorCategory::Config,
                  "key '" + section + "' must appear inside a [section]");
    }
    const auto sec = known.find(section);
    if (sec == known.end()) {
      throw Error(ErrorCategory::Config, "unknown section [" + section + "]");
    }
    for (const auto& [key, node] : body) {
      if (!sec->second.contains(key)) {
        throw Error(ErrorCategory::Config, "unknown key '" + key + "' in [" + section + "]");
      }
      const std::string name = section + "." + key;
      const std::string value = trim(node.data());

      if (section == "run") {
        if (key == "mode") {
          c.mode = parse_mode(value);
          declared = c.mode;
        }
        else c.threads = to_u64(name, value);
      } else if (section == "system") {
        if (key == "j") c.j = to_double(name, value);
        else if (key == "j_list") c.j_list = to_list(name, value);
        else c.m = to_double(name, value);
      } else if (section == "grid") {
        if (key == "t_end") c.t_end = to_double(name, value);
        else c.dt = to_double(name, value);
      } else if (section == "gain") {
        if (key == "type") c.gain_type = parse_gain_kind(value);
        else if (key == "epsilon") c.gain_epsilon = to_double(name, value);
        else c.gain_table = value;
      } else if (section == "sme") {
        if (key == "n_trajectories") c.n_trajectories = to_u64(name, value);
        else if (key == "master_seed") c.master_seed = to_u64(name, value);
        else if (key == "record_stride") c.record_stride = to_u64(name, value);
        else if (key == "compare_time") c.compare_time = to_double(name, value);
        else c.positivity_floor = to_double(name, value);
      } else if (section == "sweep") {
        c.sweep_epsilon = to_double(name, value);
      } else if (section == "output") {
        if (key == "dir") c.out_dir = value;
        else if (key == "snapshot_stride") c.snapshot_stride = to_u64(name, value);
        else c.analytic_curve = to_bool(name, value);
      } else if (section == "regime") {
        const double v = to_double(name, value);
        if (key == "g") c.regime.g = v;
        else if (key == "kappa") c.regime.kappa = v;
        else if (key == "gamma") c.regime.gamma = v;
        else if (key == "delta") c.regime.delta = v;
        else if (key == "chi") c.regime.chi = v;
        else if (key == "beta_sq") c.regime.beta_sq = v;
        else if (key == "n_atoms") c.regime.n_atoms = v;
        else c.regime_threshold = v;
      }
    }
  }
  if (subcommand) {
    if (declared && *declared != *subcommand) {
      throw Error(ErrorCategory::Config, "config declares mode '" + mode_name(*declared) +
                                             "' but the subcommand is '" +
                                             mode_name(*subcommand) + "'");
    }
    c.mode = *subcommand;
  }
  c.validate();
  return c;
}

SimulationConfig load_config(const std::string& path, std::optional<Mode> subcommand) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::Io, "cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), subcommand);
}

std::string serialize_config(const SimulationConfig& c) {
  std::ostringstream os;
  auto num = [](double v) { return format_double(v); };
  os << "[run]\n";
  os << "mode = " << mode_name(c.mode) << "\n";
  os << "threads = " << c.threads << "\n\n";
  os << "[system]\n";
  os << "j = " << num(c.j) << "\n";
  os << "j_list =";
  for (double v : c.j_list) os << " " << num(v);
  os << "\n";
  os << "m = " << num(c.m) << "\n\n";
  os << "[grid]\n";
  os << "t_end = " << num(c.t_end) << "\n";
  os << "dt = " << num(c.effective_dt()) << "\n\n";
  os << "[gain]\n";
  os << "type = " << gain_kind_name(c.effective_gain()) << "\n";
  os << "epsilon = " << num(c.gain_epsilon) << "\n";
  if (!c.gain_table.empty()) os << "table = " << c.gain_table << "\n";
  os << "\n[sme]\n";
  os << "n_trajectories = " << c.n_trajectories << "\n";
  os << "master_seed = " << c.master_seed << "\n";
  os << "record_stride = " << c.record_stride << "\n";
  os << "compare_time = " << num(c.compare_time) << "\n";
  os << "positivity_floor = " << num(c.positivity_floor) << "\n\n";
  os << "[sweep]\n";
  os << "epsilon = " << num(c.effective_sweep_epsilon()) << "\n\n";
  os << "[output]\n";
  os << "dir = " << c.out_dir << "\n";
  os << "snapshot_stride = " << c.effective_snapshot_stride() << "\n";
  os << "analytic_curve = " << (c.analytic_curve ? "true" : "false") << "\n";
  const auto& r = c.regime;
  const bool any_regime = r.g > 0.0 || r.kappa > 0.0 || r.gamma > 0.0 || r.delta > 0.0 ||
                          r.chi > 0.0 || r.beta_sq > 0.0 || r.n_atoms > 0.0;
  if (c.mode == Mode::RegimeCheck || any_regime) {
    os << "\n[regime]\n";
    os << "g = " << num(c.regime.g) << "\n";
    os << "kappa = " << num(c.regime.kappa) << "\n";
    os << "gamma = " << num(c.regime.gamma) << "\n";
    os << "delta = " << num(c.regime.delta) << "\n";
    os << "chi = " << num(c.regime.chi) << "\n";
    os << "beta_sq = " << num(c.regime.beta_sq) << "\n";
    os << "n_atoms = " << num(c.regime.n_atoms) << "\n";
    os << "threshold = " << num(c.regime_threshold) << "\n";
  }
  return os.str();
}

}  // namespace spinsq
