#pragma once

// Experiment orchestration behind the CLI subcommands. Every runner returns
// a ResultBundle; write_bundle() puts it on disk as summary.txt plus one CSV
// per table.

#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "spinsq/config.hpp"
#include "spinsq/control.hpp"
#include "spinsq/csv.hpp"

namespace spinsq {

inline constexpr const char* kVersion = "1.0.0";

struct ResultBundle {
  /// Ordered key/value pairs for summary.txt.
  std::vector<std::pair<std::string, std::string>> summary;
  std::vector<CsvTable> tables;
  std::vector<std::string> warnings;
  std::string config_echo;
  double wall_seconds = 0.0;

  void put(const std::string& key, const std::string& value);
  void put(const std::string& key, double value);
  /// Value for a summary key; Config error if absent.
  const std::string& get(const std::string& key) const;
  const CsvTable& table(const std::string& name) const;
};

/// Builds the schedule named by the config for spin j (Perturbed when
/// gain_epsilon != 0).
GainSchedule make_gain(const SimulationConfig& config, SpinQuantumNumber spin);

ResultBundle run_me_experiment(const SimulationConfig& config);
ResultBundle run_sweep(const SimulationConfig& config);
ResultBundle run_robustness(const SimulationConfig& config);
ResultBundle run_sme_experiment(const SimulationConfig& config);
ResultBundle run_regime_check(const SimulationConfig& config);

/// Dispatches on config.mode and fills in metadata (config echo, version, wall time).
ResultBundle run_experiment(const SimulationConfig& config);

void write_bundle(const ResultBundle& bundle, const std::filesystem::path& out_dir);

/// Runs fn(0..n-1) on up to `threads` workers. Results must be written to
/// per-index slots; the first exception (lowest index) is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace spinsq
