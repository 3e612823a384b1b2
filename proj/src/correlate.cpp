#include "spekit/correlate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include "spekit/errors.hpp"

namespace spekit {
namespace {

void require_sorted(std::span<const std::uint64_t> ts, const char* name) {
  for (std::size_t i = 1; i < ts.size(); ++i) {
    if (ts[i] < ts[i - 1]) {
      std::ostringstream os;
      os << name << " is not time-ordered at index " << i;
      throw InvalidInput(os.str());
    }
  }
}

std::int64_t diff(std::uint64_t a, std::uint64_t b) {
  return static_cast<std::int64_t>(a) - static_cast<std::int64_t>(b);
}

// Full correlation of ch0[begin, end) against all of ch1.
void accumulate_full(std::span<const std::uint64_t> ch0, std::size_t begin, std::size_t end,
                     std::span<const std::uint64_t> ch1, const DelayBinning& bins,
                     std::vector<std::uint64_t>& counts) {
  // A delay is in range iff 2|tau| < reach2.
  const std::int64_t reach2 = bins.bin_width_ps * (2 * bins.outer_bins + 1);
  std::size_t lo = 0;
  if (begin < end) {
    // First ch1 event that can pair with ch0[begin].
    lo = static_cast<std::size_t>(
        std::partition_point(ch1.begin(), ch1.end(),
                             [&](std::uint64_t t1) { return 2 * diff(ch0[begin], t1) >= reach2; }) -
        ch1.begin());
  }
  for (std::size_t i = begin; i < end; ++i) {
    const std::uint64_t t0 = ch0[i];
    while (lo < ch1.size() && 2 * diff(t0, ch1[lo]) >= reach2) ++lo;
    for (std::size_t j = lo; j < ch1.size(); ++j) {
      const std::int64_t tau = diff(ch1[j], t0);
      if (2 * tau >= reach2) break;
      if (auto b = bins.bin_of(tau)) ++counts[*b];
    }
  }
}

void accumulate_start_stop(std::span<const std::uint64_t> ch0, std::span<const std::uint64_t> ch1,
                           const DelayBinning& bins, std::vector<std::uint64_t>& counts) {
  // Start on ch0, stop on the next ch1 event (tau >= 0) ...
  std::size_t j = 0;
  for (std::uint64_t t0 : ch0) {
    while (j < ch1.size() && ch1[j] < t0) ++j;
    if (j == ch1.size()) break;
    if (auto b = bins.bin_of(diff(ch1[j], t0))) ++counts[*b];
  }
  // ... and start on ch1, stop on the next strictly later ch0 event (tau < 0).
  std::size_t i = 0;
  for (std::uint64_t t1 : ch1) {
    while (i < ch0.size() && ch0[i] <= t1) ++i;
    if (i == ch0.size()) break;
    if (auto b = bins.bin_of(diff(t1, ch0[i]))) ++counts[*b];
  }
}

}  // namespace

void CorrelationConfig::validate() const {
  if (bin_width_ps <= 0) throw InvalidInput("bin width must be > 0");
  if (window_ps < bin_width_ps) throw InvalidInput("window must be >= bin width");
  if (duration_ps && !(*duration_ps > 0.0)) throw InvalidInput("duration must be > 0");
}

double Histogram::normalized(std::size_t i) const {
  const double c = static_cast<double>(counts[i]);
  if (!normalization) return c;
  return c / normalization->expected[i];
}

double Histogram::sigma(std::size_t i) const {
  const double c = static_cast<double>(counts[i]);
  const double poisson = std::sqrt(std::max(c, 1.0));
  if (!normalization) return poisson;
  const double e = normalization->expected[i];
  const double a = poisson / e;
  const double b = c / e * normalization->relative_sigma;
  return std::sqrt(a * a + b * b);
}

std::uint64_t Histogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

DelayBinning::DelayBinning(const CorrelationConfig& cfg) : bin_width_ps(cfg.bin_width_ps) {
  cfg.validate();
  // Smallest n with w (n + 1/2) >= window.
  const std::int64_t w = cfg.bin_width_ps;
  outer_bins = (2 * cfg.window_ps - w + 2 * w - 1) / (2 * w);
}

std::optional<std::size_t> DelayBinning::bin_of(std::int64_t tau_ps) const {
  const std::int64_t a = tau_ps < 0 ? -tau_ps : tau_ps;
  const std::int64_t centre = outer_bins;
  if (2 * a < bin_width_ps) return static_cast<std::size_t>(centre);
  const std::int64_t k = (2 * a - bin_width_ps) / (2 * bin_width_ps) + 1;
  if (k > outer_bins) return std::nullopt;
  return static_cast<std::size_t>(tau_ps > 0 ? centre + k : centre - k);
}

std::vector<double> DelayBinning::edges() const {
  std::vector<double> e;
  e.reserve(bin_count() + 1);
  const double w = static_cast<double>(bin_width_ps);
  for (std::int64_t k = -outer_bins; k <= outer_bins + 1; ++k) {
    e.push_back((static_cast<double>(k) - 0.5) * w);
  }
  return e;
}

std::vector<std::uint64_t> coincidence_counts(std::span<const std::uint64_t> ch0,
                                              std::span<const std::uint64_t> ch1,
                                              const CorrelationConfig& cfg) {
  const DelayBinning bins(cfg);
  require_sorted(ch0, "channel 0");
  require_sorted(ch1, "channel 1");

  std::vector<std::uint64_t> counts(bins.bin_count(), 0);
  if (cfg.mode == CorrelationMode::kStartStop) {
    accumulate_start_stop(ch0, ch1, bins, counts);
    return counts;
  }

  const std::size_t shards = std::max<std::size_t>(
      1, std::min<std::size_t>(cfg.threads, ch0.size() / 4096 + 1));
  if (shards == 1) {
    accumulate_full(ch0, 0, ch0.size(), ch1, bins, counts);
    return counts;
  }
  std::vector<std::vector<std::uint64_t>> partial(shards,
                                                  std::vector<std::uint64_t>(counts.size(), 0));
  {
    std::vector<std::jthread> pool;
    for (std::size_t s = 0; s < shards; ++s) {
      pool.emplace_back([&, s] {
        const std::size_t b = ch0.size() * s / shards;
        const std::size_t e = ch0.size() * (s + 1) / shards;
        accumulate_full(ch0, b, e, ch1, bins, partial[s]);
      });
    }
  }
  for (const auto& p : partial) {
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += p[i];
  }
  return counts;
}

Histogram g2_histogram(std::span<const std::uint64_t> ch0, std::span<const std::uint64_t> ch1,
                       const CorrelationConfig& cfg) {
  cfg.validate();
  if (ch0.empty() || ch1.empty()) throw InvalidInput("g2 histogram needs events on both channels");

  double duration = 0.0;
  if (cfg.duration_ps) {
    duration = *cfg.duration_ps;
  } else {
    const std::uint64_t first = std::min(ch0.front(), ch1.front());
    const std::uint64_t last = std::max(ch0.back(), ch1.back());
    duration = static_cast<double>(last - first) + 1.0;
  }
  if (static_cast<double>(cfg.window_ps) >= duration) {
    throw InvalidInput("correlation window exceeds the recording duration");
  }

  const DelayBinning bins(cfg);
  Histogram h;
  h.bin_edges_ps = bins.edges();
  h.counts = coincidence_counts(ch0, ch1, cfg);

  // Uncorrelated streams: E[count] = r0 r1 (T - |tau|) w.
  const double n0 = static_cast<double>(ch0.size());
  const double n1 = static_cast<double>(ch1.size());
  Normalization norm;
  norm.expected.resize(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double overlap = std::max(duration - std::abs(h.center_ps(i)), 1.0);
    norm.expected[i] = n0 * n1 * overlap * h.width_ps(i) / (duration * duration);
  }
  norm.relative_sigma = std::sqrt(1.0 / n0 + 1.0 / n1);
  h.normalization = std::move(norm);
  return h;
}

Histogram decay_histogram(std::span<const std::uint64_t> timestamps, double pulse_period_ns,
                          const CorrelationConfig& cfg) {
  if (!(pulse_period_ns > 0.0)) throw InvalidInput("pulse period must be > 0");
  if (cfg.bin_width_ps <= 0) throw InvalidInput("bin width must be > 0");
  if (timestamps.empty()) throw InvalidInput("decay histogram needs at least one event");
  const auto period = static_cast<std::uint64_t>(std::llround(pulse_period_ns * 1e3));
  if (period == 0) throw InvalidInput("pulse period below 1 ps");
  const auto w = static_cast<std::uint64_t>(cfg.bin_width_ps);
  const std::size_t nbins = static_cast<std::size_t>((period + w - 1) / w);

  Histogram h;
  h.bin_edges_ps.reserve(nbins + 1);
  for (std::size_t i = 0; i <= nbins; ++i) {
    h.bin_edges_ps.push_back(static_cast<double>(std::min<std::uint64_t>(i * w, period)));
  }
  h.counts.assign(nbins, 0);
  for (std::uint64_t t : timestamps) ++h.counts[(t % period) / w];
  return h;
}

Histogram fold_symmetric(const Histogram& h) {
  const std::size_t n = h.size();
  if (n % 2 == 0 || h.bin_edges_ps.size() != n + 1) {
    throw InvalidInput("fold_symmetric expects an odd number of tau-centred bins");
  }
  const std::size_t centre = n / 2;
  Histogram out;
  out.counts.resize(centre + 1);
  out.bin_edges_ps.resize(centre + 2);
  out.bin_edges_ps[0] = 0.0;
  std::vector<double> expected(centre + 1, 0.0);
  for (std::size_t k = 0; k <= centre; ++k) {
    const std::size_t right = centre + k;
    const std::size_t left = centre - k;
    out.counts[k] = k == 0 ? h.counts[centre] : h.counts[right] + h.counts[left];
    out.bin_edges_ps[k + 1] = h.bin_edges_ps[right + 1];
    if (h.normalization) {
      expected[k] = k == 0 ? h.normalization->expected[centre]
                           : h.normalization->expected[right] + h.normalization->expected[left];
    }
  }
  if (h.normalization) {
    out.normalization = Normalization{std::move(expected), h.normalization->relative_sigma};
  }
  return out;
}

}  // namespace spekit
