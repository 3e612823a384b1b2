#pragma once

// Kinetic Monte Carlo photon streams from a three-level emitter, plus a
// simple detector model and a 50/50 beamsplitter.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "spekit/kinetics.hpp"

namespace spekit {

struct PhotonRecord {
  std::uint64_t timestamp_ps = 0;
  std::uint8_t channel = 0;

  friend bool operator==(const PhotonRecord&, const PhotonRecord&) = default;
};

/// Time-ordered (timestamp, then channel) detection events.
using PhotonStream = std::vector<PhotonRecord>;

/// Rectangular excitation gate; pulses start at integer multiples of period.
struct PulseConfig {
  double period_ns = 25.0;      // 40 MHz
  double pulse_width_ns = 1.0;
};

struct SimConfig {
  double duration_ns = 0.0;
  std::uint64_t seed = 0;
  std::optional<PulseConfig> pulsed;
  /// Independent trajectory segments. Output depends on this, not on threads.
  unsigned segments = 1;
  unsigned threads = 1;

  void validate() const;
};

struct DetectorModel {
  double efficiency = 1.0;
  double dead_time_ps = 0.0;
  double dark_rate = 0.0;        ///< 1/ns, per channel
  double jitter_sigma_ps = 0.0;
  double background_rate = 0.0;  ///< 1/ns, per channel (already scaled by power if needed)

  void validate() const;
};

struct SimulationResult {
  PhotonStream photons;              ///< all on channel 0
  std::array<double, 3> dwell_ns{};  ///< time spent in g, e, m
  std::uint64_t excitations = 0;
  std::uint64_t shelving_events = 0;
};

/// Gillespie trajectory; a photon is recorded at every radiative e->g jump.
/// Identical (rates, cfg) give bit-identical output.
SimulationResult simulate_emitter(const ThreeLevelRates& rates, const SimConfig& cfg);
PhotonStream simulate_photon_stream(const ThreeLevelRates& rates, const SimConfig& cfg);

/// Thinning, Gaussian jitter, dark/background events over [0, duration_ns),
/// then non-paralyzable dead time, independently per channel present in
/// `stream` (channel 0 if empty).
PhotonStream apply_detector(std::span<const PhotonRecord> stream, const DetectorModel& det,
                            std::uint64_t seed, double duration_ns);

/// Routes each event to channel 0 or 1 with probability 1/2.
std::pair<PhotonStream, PhotonStream> split_hbt(std::span<const PhotonRecord> stream,
                                                std::uint64_t seed);

/// Timestamps of one channel, in stream order.
std::vector<std::uint64_t> channel_timestamps(std::span<const PhotonRecord> stream,
                                              std::uint8_t channel);

/// Stable merge of time-ordered streams.
PhotonStream merge_streams(std::span<const PhotonRecord> a, std::span<const PhotonRecord> b);

/// Derives an independent RNG seed for a pipeline stage.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stage, std::uint64_t index = 0);

}  // namespace spekit
