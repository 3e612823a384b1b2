#pragma once

// Coincidence histograms from time-tag streams.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace spekit {

enum class CorrelationMode { kFull, kStartStop };

struct CorrelationConfig {
  std::int64_t bin_width_ps = 256;
  std::int64_t window_ps = 100000;  ///< max |tau| covered
  CorrelationMode mode = CorrelationMode::kFull;
  /// Recording length used for rates; derived from the streams when unset.
  std::optional<double> duration_ps;
  unsigned threads = 1;

  void validate() const;
};

/// Expected-count scale for each bin (counts / expected = normalized value).
struct Normalization {
  std::vector<double> expected;
  double relative_sigma = 0.0;  ///< uncertainty of the rate product
};

struct Histogram {
  std::vector<double> bin_edges_ps;
  std::vector<std::uint64_t> counts;
  std::optional<Normalization> normalization;

  std::size_t size() const { return counts.size(); }
  double center_ps(std::size_t i) const { return 0.5 * (bin_edges_ps[i] + bin_edges_ps[i + 1]); }
  double width_ps(std::size_t i) const { return bin_edges_ps[i + 1] - bin_edges_ps[i]; }
  /// counts / expected; raw counts when not normalized.
  double normalized(std::size_t i) const;
  /// Poisson sigma of normalized(i) (sqrt(max(count,1)) based), including
  /// the normalization uncertainty.
  double sigma(std::size_t i) const;
  std::uint64_t total() const;
};

/// Bin layout shared by the correlators. Bins are centred on tau = 0: the
/// central bin is the open interval (-w/2, w/2); a delay lying exactly on an
/// edge goes to the neighbouring bin farther from zero, so the layout is
/// mirror-symmetric.
struct DelayBinning {
  std::int64_t bin_width_ps = 0;
  std::int64_t outer_bins = 0;  ///< bins on each side of the centre bin

  explicit DelayBinning(const CorrelationConfig& cfg);
  std::size_t bin_count() const { return static_cast<std::size_t>(2 * outer_bins + 1); }
  /// Largest |tau| that lands in a bin (exclusive).
  double reach_ps() const { return bin_width_ps * (0.5 + static_cast<double>(outer_bins)); }
  std::optional<std::size_t> bin_of(std::int64_t tau_ps) const;
  std::vector<double> edges() const;
};

/// Cross-correlation of ch1 against ch0 (tau = t1 - t0), normalized so that
/// uncorrelated streams give 1. Throws InvalidInput for empty channels or a
/// window longer than the recording.
Histogram g2_histogram(std::span<const std::uint64_t> ch0, std::span<const std::uint64_t> ch1,
                       const CorrelationConfig& cfg);

/// Raw coincidence counts only (no normalization, no duration checks).
std::vector<std::uint64_t> coincidence_counts(std::span<const std::uint64_t> ch0,
                                              std::span<const std::uint64_t> ch1,
                                              const CorrelationConfig& cfg);

/// Arrival times folded modulo the pulse period and histogrammed from the
/// pulse start with cfg.bin_width_ps bins (half-open [lo, hi)).
Histogram decay_histogram(std::span<const std::uint64_t> timestamps, double pulse_period_ns,
                          const CorrelationConfig& cfg);

/// Combines +tau and -tau bins of a centred histogram; output bins cover |tau|.
Histogram fold_symmetric(const Histogram& h);

}  // namespace spekit
