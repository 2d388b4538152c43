#pragma once

// Feedback-strength schedules lambda(t) and the cavity-QED regime checker.

#include <filesystem>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "spinsq/spin_algebra.hpp"

namespace spinsq {

/// Measurement strength M (inverse time).
struct MeasurementStrength {
  double value = 1.0;

  explicit MeasurementStrength(double m);
};

/// Lower bound on <J_x> below which state-based gains refuse to evaluate.
inline double default_jx_floor(SpinQuantumNumber spin) { return 1e-6 * spin.j(); }

/// lambda = 2M <J_z^2>_c / <J_x>_c for a conditioned state.
/// Throws GainSingularity when <J_x>_c <= jx_floor.
double gain_conditioned(const ComplexMatrix& rho, const SpinOperators& ops,
                        MeasurementStrength m, double jx_floor);
inline double gain_conditioned(const DensityMatrix& rho, const SpinOperators& ops,
                               MeasurementStrength m) {
  return gain_conditioned(rho.matrix(), ops, m, default_jx_floor(ops.spin));
}

/// Same formula fed the unconditioned state.
double gain_ensemble(const ComplexMatrix& rho, const SpinOperators& ops,
                     MeasurementStrength m, double jx_floor);
inline double gain_ensemble(const DensityMatrix& rho, const SpinOperators& ops,
                            MeasurementStrength m) {
  return gain_ensemble(rho.matrix(), ops, m, default_jx_floor(ops.spin));
}

/// Closed form M e^{Mt/2} / (1 + 2JMt).
double gain_analytic(double t, MeasurementStrength m, SpinQuantumNumber spin);

enum class GainKind {
  None,
  Conditioned,
  EnsembleSelfConsistent,
  AnalyticClosedForm,
  Tabulated,
  Perturbed,
};

std::string gain_kind_name(GainKind kind);
GainKind parse_gain_kind(const std::string& name);

/// A feedback-strength schedule. Value type; cheap to copy.
///
/// State-dependent kinds (Conditioned, EnsembleSelfConsistent) read the
/// state handed to evaluate(); the others depend on t only.
class GainSchedule {
 public:
  static GainSchedule none();
  static GainSchedule conditioned(MeasurementStrength m, double jx_floor);
  static GainSchedule ensemble(MeasurementStrength m, double jx_floor);
  static GainSchedule analytic(MeasurementStrength m, SpinQuantumNumber spin);
  /// Linear interpolation on strictly increasing times; OutOfDomain outside.
  static GainSchedule tabulated(std::vector<double> times, std::vector<double> values);
  /// Scales every evaluation of `inner` by (1 + epsilon).
  static GainSchedule perturbed(GainSchedule inner, double epsilon);

  double evaluate(double t, const ComplexMatrix& rho, const SpinOperators& ops) const;

  GainKind kind() const noexcept;
  /// Kind after stripping any Perturbed wrappers.
  GainKind base_kind() const noexcept;
  bool state_dependent() const noexcept;
  /// Overall (1 + epsilon) factor accumulated through Perturbed wrappers.
  double scale() const noexcept;
  std::string label() const;

 private:
  struct NoFeedback {};
  struct StateBased {
    MeasurementStrength m;
    double jx_floor;
    bool conditioned;
  };
  struct Analytic {
    MeasurementStrength m;
    SpinQuantumNumber spin;
  };
  struct Table {
    std::vector<double> times;
    std::vector<double> values;
  };
  struct Scaled {
    std::shared_ptr<const GainSchedule> inner;
    double epsilon;
  };
  using Variant = std::variant<NoFeedback, StateBased, Analytic, Table, Scaled>;

  explicit GainSchedule(Variant v) : impl_(std::move(v)) {}
  Variant impl_;
};

/// Reads a two-column (t, lambda) table; whitespace or comma delimited,
/// '#' starts a comment. Times must be strictly increasing.
GainSchedule load_gain_table(const std::filesystem::path& path);
GainSchedule parse_gain_table(const std::string& text);

struct RegimeInputs {
  double g = 0.0;        // one-photon Rabi frequency
  double kappa = 0.0;    // cavity decay rate
  double gamma = 0.0;    // spontaneous emission rate
  double delta = 0.0;    // detuning
  double chi = 0.0;      // dispersive coupling
  double beta_sq = 0.0;  // |beta|^2, driving amplitude squared
  double n_atoms = 0.0;  // N = 2J

  friend bool operator==(const RegimeInputs&, const RegimeInputs&) = default;
};

struct RegimeReport {
  RegimeInputs inputs;
  double threshold = 10.0;
  // kappa / (chi |beta| sqrt(N))
  double adiabatic_margin = 0.0;
  bool adiabatic_ok = false;
  // g^2 / (N kappa gamma)
  double loss_margin = 0.0;
  bool loss_ok = false;
  // Delta / (gamma N^{3/2})
  double detuning_margin = 0.0;
  bool detuning_ok = false;
  // g^2 N / (kappa gamma); squeezing onset needs this > 1
  double onset_ratio = 0.0;
  bool squeezing_onset_ok = false;
};

/// "Much greater than" is encoded as margin > threshold (strict).
RegimeReport regime_check(const RegimeInputs& inputs, double threshold = 10.0);

/// epsilon^2: the J-independent floor of single-shot feedback with relative
/// gain error epsilon, epsilon in [0, 1].
double single_shot_bound(double epsilon);

}  // namespace spinsq
