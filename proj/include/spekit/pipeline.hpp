#pragma once

// Simulation -> correlation -> fitting -> report files. Every command writes
// a JSON report plus CSV plot data into the output directory; output bytes
// depend only on the config (seed included), never on the thread count.
//
// Errors keep their class and gain a stage prefix ("simulate: ...").

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spekit/config.hpp"
#include "spekit/correlate.hpp"
#include "spekit/fitters.hpp"
#include "spekit/simulate.hpp"

namespace spekit {

enum class Command {
  kSimulate,
  kG2,
  kLifetime,
  kSaturation,
  kPolarization,
  kSpectrum,
  kLinewidth,
  kReproduceFig2,
};

std::optional<Command> parse_command(std::string_view name);
std::string_view command_name(Command cmd);
std::vector<std::string_view> command_names();

struct PipelineOutput {
  std::vector<std::filesystem::path> files;  ///< in write order
  std::string report_json;                   ///< contents of the main report
};

PipelineOutput run_pipeline(Command cmd, const RunConfig& cfg, const std::filesystem::path& out_dir);

// Building blocks, also used directly by tests.

/// Steady-state photon emission rate gamma_eg * p_e, 1/ns.
double emission_rate(const ThreeLevelRates& rates);

/// CW simulation, detector model, then HBT split. `index` selects an
/// independent seed family (one per power in a series).
struct HbtMeasurement {
  std::vector<std::uint64_t> ch0;
  std::vector<std::uint64_t> ch1;
  double duration_ns = 0.0;
  std::uint64_t emitted = 0;
};
HbtMeasurement simulate_hbt(const RunConfig& cfg, const ThreeLevelRates& rates, double power_mw,
                            std::uint64_t index = 0);

struct Fig2Point {
  double power_mw = 0.0;
  Histogram histogram;
  G2Fit fit;
  G2Params kinetics;  ///< closed-form prediction from the configured rates
  std::uint64_t emitted = 0;
};

struct Fig2Result {
  std::vector<Fig2Point> points;
  LinearExtrapolation inv_tau1;  ///< 1/tau1 versus power
  LinearExtrapolation inv_tau2;  ///< 1/tau2 versus power
  bool antibunched_up_to_1mw = false;
};

/// Power series of simulated g2 measurements, fitted and extrapolated.
Fig2Result reproduce_fig2(const RunConfig& cfg);

}  // namespace spekit
