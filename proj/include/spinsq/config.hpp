#pragma once

// Run configuration. The on-disk form is an INI-style document:
//
//   [run]      mode, threads
//   [system]   j, j_list, m
//   [grid]     t_end, dt            (dimensionless Mt)
//   [gain]     type, epsilon, table
//   [sme]      n_trajectories, master_seed, record_stride, compare_time,
//              positivity_floor
//   [sweep]    epsilon
//   [output]   dir, snapshot_stride, analytic_curve
//   [regime]   g, kappa, gamma, delta, chi, beta_sq, n_atoms, threshold
//
// Keys outside this list are rejected. Defaults are listed in README.md.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spinsq/control.hpp"

namespace spinsq {

enum class Mode { Me, Sme, Sweep, Robustness, RegimeCheck };

std::string mode_name(Mode mode);
Mode parse_mode(const std::string& name);

struct SimulationConfig {
  Mode mode = Mode::Me;
  std::size_t threads = 1;

  double j = 25.0;
  std::vector<double> j_list = {5, 10, 15, 20, 25, 30, 40};
  double m = 1.0;

  double t_end = 3.0;  // Mt
  std::optional<double> dt;  // Mt; mode default when unset

  std::optional<GainKind> gain_type;  // mode default when unset
  double gain_epsilon = 0.0;          // Perturbed wrapper when nonzero
  std::string gain_table;

  std::size_t n_trajectories = 1000;
  std::uint64_t master_seed = 20020101;
  std::size_t record_stride = 100;
  double compare_time = 1.0;  // Mt at which the SME-vs-ME diagnostic is summarised
  // Conditioned states from Euler-Maruyama dip below zero by O(sqrt(dt)); a
  // trajectory is dropped only when its lowest eigenvalue passes this floor.
  double positivity_floor = -0.1;

  std::optional<double> sweep_epsilon;  // robustness mode defaults to 0.2

  std::string out_dir = "results";
  std::optional<std::size_t> snapshot_stride;
  bool analytic_curve = true;

  RegimeInputs regime;
  double regime_threshold = 10.0;

  // Resolved defaults.
  double effective_dt() const;
  GainKind effective_gain() const;
  std::size_t effective_snapshot_stride() const;
  double effective_sweep_epsilon() const;

  /// Throws Config on inconsistent values.
  void validate() const;

  friend bool operator==(const SimulationConfig&, const SimulationConfig&) = default;
};

/// When `subcommand` is given it becomes the mode; a conflicting [run] mode
/// in the text is a Config error.
SimulationConfig parse_config(const std::string& text,
                              std::optional<Mode> subcommand = std::nullopt);
SimulationConfig load_config(const std::string& path,
                             std::optional<Mode> subcommand = std::nullopt);

/// Writes every key, with defaults made explicit.
std::string serialize_config(const SimulationConfig& config);

}  // namespace spinsq
