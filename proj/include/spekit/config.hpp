#pragma once

// Run configuration for the pipeline commands. Stored as JSON; every field
// is optional and falls back to the E1-like defaults below.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spekit/correlate.hpp"
#include "spekit/fitters.hpp"
#include "spekit/kinetics.hpp"
#include "spekit/simulate.hpp"
#include "spekit/spectra.hpp"

namespace spekit {

struct PumpConfig {
  PumpModel model{0.02};
  /// Single-power commands; when unset rates.gamma_ge is used as is.
  std::optional<double> power_mw = 1.0;
  /// Power series for reproduce-fig2.
  std::vector<double> powers_mw{0.2, 0.4, 0.6, 0.8, 1.0};
};

struct DetectorConfig {
  DetectorModel model;
  /// Background counts per channel growing linearly with pump power,
  /// 1/(ns mW). Added to model.background_rate.
  double background_per_mw = 0.0;
};

struct PulsedConfig {
  PulseConfig pulse;
  /// Power during the gate, mW.
  double power_mw = 50.0;
};

struct SimulationSettings {
  double duration_ns = 1e8;
  /// When set, duration is chosen so this many photons are emitted on
  /// average (from the steady-state emission rate).
  std::optional<double> photons;
  std::uint64_t seed = 1;
  unsigned segments = 8;
  PulsedConfig pulsed;
};

struct SaturationSettings {
  double eta_ex = 1.0;
  double eta_col = 1.0;
  /// Synthetic series when no input file is given.
  std::vector<double> powers_mw{0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0};
  double integration_s = 1.0;
};

struct SpectrumSettings {
  std::size_t n_peaks = 2;
  std::vector<PeakShape> shapes;
  std::vector<WavelengthWindow> exclusion_windows = kDefaultRamanExclusion;
};

struct RunConfig {
  ThreeLevelRates rates;
  PumpConfig pump;
  DetectorConfig detector;
  SimulationSettings simulation;
  CorrelationConfig correlation;
  FitOptions fit;
  SaturationSettings saturation;
  SpectrumSettings spectrum;
  int linewidth_exponent = 3;
  unsigned threads = 1;
  std::optional<std::filesystem::path> input;

  /// E1-like emitter: tau1 -> 3.33 ns and tau2 -> 675 ns at zero power,
  /// gamma_eg / gamma_em = 30.
  static RunConfig defaults();

  /// Checks every constituent invariant; throws ConfigError.
  void validate() const;
};

/// Unknown keys are rejected so typos do not silently fall back to defaults.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const RunConfig& cfg);

}  // namespace spekit
