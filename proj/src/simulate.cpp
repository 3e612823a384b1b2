#include "spekit/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "spekit/errors.hpp"

namespace spekit {
namespace {

constexpr std::uint64_t kStageSimulate = 0x53494d55ULL;  // "SIMU"
constexpr std::uint64_t kStageDetector = 0x44455445ULL;  // "DETE"
constexpr std::uint64_t kStageSplit = 0x53504c54ULL;     // "SPLT"

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t to_ps(double t_ns) { return static_cast<std::uint64_t>(std::llround(t_ns * 1e3)); }

enum class Level { kGround, kExcited, kMetastable };

struct SegmentOutput {
  PhotonStream photons;
  std::array<double, 3> dwell{};
  std::uint64_t excitations = 0;
  std::uint64_t shelving = 0;
};

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

// One trajectory starting in |g> at `t_begin`; photons and dwell times are
// only recorded inside [t_keep, t_end).
SegmentOutput run_segment(const ThreeLevelRates& k, const std::optional<PulseConfig>& pulse,
                          double t_begin, double t_keep, double t_end, std::uint64_t seed) {
  SegmentOutput out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  auto waiting_time = [&](double rate) { return -std::log1p(-uniform(rng)) / rate; };

  const double decay_total = k.gamma_eg + k.gamma_em;
  const double radiative_branch = k.gamma_eg / decay_total;

  Level level = Level::kGround;
  double t = t_begin;
  auto dwell = [&](Level lv, double from, double to) {
    out.dwell[static_cast<int>(lv)] += overlap(from, to, t_keep, t_end);
  };

  while (t < t_end) {
    switch (level) {
      case Level::kGround: {
        if (k.gamma_ge <= 0.0) {
          dwell(level, t, t_end);
          t = t_end;
          break;
        }
        if (!pulse) {
          const double next = t + waiting_time(k.gamma_ge);
          dwell(level, t, next);
          t = next;
          level = Level::kExcited;
          if (t >= t_keep && t < t_end) ++out.excitations;
          break;
        }
        const double period = pulse->period_ns;
        const double index = std::floor(t / period);
        const double pulse_start = index * period;
        const double pulse_end = pulse_start + pulse->pulse_width_ns;
        if (t >= pulse_end) {
          const double next = pulse_start + period;
          dwell(level, t, next);
          t = next;
          break;
        }
        // Memoryless: a draw that overruns the gate is discarded at its edge.
        const double candidate = t + waiting_time(k.gamma_ge);
        if (candidate < pulse_end) {
          dwell(level, t, candidate);
          t = candidate;
          level = Level::kExcited;
          if (t >= t_keep && t < t_end) ++out.excitations;
        } else {
          const double next = pulse_start + period;
          dwell(level, t, next);
          t = next;
        }
        break;
      }
      case Level::kExcited: {
        const double next = t + waiting_time(decay_total);
        dwell(level, t, next);
        t = next;
        const bool radiative = uniform(rng) < radiative_branch;
        if (t >= t_end) break;
        if (radiative) {
          level = Level::kGround;
          if (t >= t_keep) out.photons.push_back({to_ps(t), 0});
        } else {
          level = Level::kMetastable;
          if (t >= t_keep) ++out.shelving;
        }
        break;
      }
      case Level::kMetastable: {
        if (k.gamma_mg <= 0.0) {
          dwell(level, t, t_end);
          t = t_end;
          break;
        }
        const double next = t + waiting_time(k.gamma_mg);
        dwell(level, t, next);
        t = next;
        level = Level::kGround;
        break;
      }
    }
  }
  return out;
}

double burn_in_ns(const ThreeLevelRates& rates) {
  double slowest = 0.0;
  try {
    const auto r = relaxation_rates(rates);
    slowest = r[1];
  } catch (const ModelError&) {
    // Oscillatory relaxation: the real part sets the envelope.
    slowest = 0.5 * (rates.gamma_ge + rates.gamma_eg + rates.gamma_em + rates.gamma_mg);
  }
  if (!(slowest > 0.0)) return 0.0;
  return 20.0 / slowest;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stage, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stage) ^ index);
}

void SimConfig::validate() const {
  if (!(duration_ns > 0.0) || !std::isfinite(duration_ns)) {
    throw InvalidInput("simulation duration must be finite and > 0");
  }
  if (segments == 0) throw InvalidInput("segments must be >= 1");
  if (pulsed) {
    if (!(pulsed->period_ns > 0.0)) throw InvalidInput("pulse period must be > 0");
    if (!(pulsed->pulse_width_ns > 0.0) || !(pulsed->pulse_width_ns < pulsed->period_ns)) {
      throw InvalidInput("pulse width must satisfy 0 < width < period");
    }
  }
}

void DetectorModel::validate() const {
  if (!(efficiency >= 0.0 && efficiency <= 1.0)) throw InvalidInput("efficiency must be in [0,1]");
  if (!(dead_time_ps >= 0.0)) throw InvalidInput("dead_time must be >= 0");
  if (!(dark_rate >= 0.0) || !(background_rate >= 0.0)) {
    throw InvalidInput("dark and background rates must be >= 0");
  }
  if (!(jitter_sigma_ps >= 0.0)) throw InvalidInput("jitter sigma must be >= 0");
}

SimulationResult simulate_emitter(const ThreeLevelRates& rates, const SimConfig& cfg) {
  rates.validate();
  cfg.validate();

  const unsigned nseg = cfg.segments;
  const double seg_len = cfg.duration_ns / nseg;
  const double burn_in = nseg > 1 ? burn_in_ns(rates) : 0.0;

  std::vector<SegmentOutput> parts(nseg);
  auto work = [&](unsigned s) {
    const double keep = seg_len * s;
    const double end = s + 1 == nseg ? cfg.duration_ns : seg_len * (s + 1);
    const double begin = s == 0 ? 0.0 : keep - burn_in;
    parts[s] = run_segment(rates, cfg.pulsed, begin, keep, end,
                           derive_seed(cfg.seed, kStageSimulate, s));
  };

  const unsigned nthreads = std::max(1u, std::min(cfg.threads, nseg));
  if (nthreads == 1) {
    for (unsigned s = 0; s < nseg; ++s) work(s);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < nthreads; ++w) {
      pool.emplace_back([&, w] {
        for (unsigned s = w; s < nseg; s += nthreads) work(s);
      });
    }
  }

  SimulationResult result;
  std::size_t total = 0;
  for (const auto& p : parts) total += p.photons.size();
  result.photons.reserve(total);
  for (auto& p : parts) {
    result.photons.insert(result.photons.end(), p.photons.begin(), p.photons.end());
    for (int i = 0; i < 3; ++i) result.dwell_ns[i] += p.dwell[i];
    result.excitations += p.excitations;
    result.shelving_events += p.shelving;
  }
  return result;
}

PhotonStream simulate_photon_stream(const ThreeLevelRates& rates, const SimConfig& cfg) {
  return simulate_emitter(rates, cfg).photons;
}

std::vector<std::uint64_t> channel_timestamps(std::span<const PhotonRecord> stream,
                                              std::uint8_t channel) {
  std::vector<std::uint64_t> out;
  for (const auto& r : stream) {
    if (r.channel == channel) out.push_back(r.timestamp_ps);
  }
  return out;
}

PhotonStream merge_streams(std::span<const PhotonRecord> a, std::span<const PhotonRecord> b) {
  PhotonStream out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out),
             [](const PhotonRecord& x, const PhotonRecord& y) {
               return x.timestamp_ps < y.timestamp_ps ||
                      (x.timestamp_ps == y.timestamp_ps && x.channel < y.channel);
             });
  return out;
}

PhotonStream apply_detector(std::span<const PhotonRecord> stream, const DetectorModel& det,
                            std::uint64_t seed, double duration_ns) {
  det.validate();
  if (!(duration_ns >= 0.0)) throw InvalidInput("duration must be >= 0");

  std::vector<std::uint8_t> channels;
  for (const auto& r : stream) {
    if (std::find(channels.begin(), channels.end(), r.channel) == channels.end()) {
      channels.push_back(r.channel);
    }
  }
  if (channels.empty()) channels.push_back(0);
  std::sort(channels.begin(), channels.end());

  const std::uint64_t dead_ps = static_cast<std::uint64_t>(std::llround(det.dead_time_ps));
  PhotonStream merged;
  for (std::uint8_t ch : channels) {
    std::mt19937_64 rng(derive_seed(seed, kStageDetector, ch));
    std::bernoulli_distribution keep(det.efficiency);
    std::normal_distribution<double> jitter(0.0, det.jitter_sigma_ps);

    std::vector<std::uint64_t> ts;
    for (const auto& r : stream) {
      if (r.channel != ch) continue;
      if (!keep(rng)) continue;
      if (det.jitter_sigma_ps > 0.0) {
        const double shifted = static_cast<double>(r.timestamp_ps) + jitter(rng);
        ts.push_back(shifted <= 0.0 ? 0 : static_cast<std::uint64_t>(std::llround(shifted)));
      } else {
        ts.push_back(r.timestamp_ps);
      }
    }

    const double noise_rate = det.dark_rate + det.background_rate;
    if (noise_rate > 0.0 && duration_ns > 0.0) {
      std::poisson_distribution<std::uint64_t> count(noise_rate * duration_ns);
      std::uniform_real_distribution<double> when(0.0, duration_ns);
      const std::uint64_t n = count(rng);
      for (std::uint64_t i = 0; i < n; ++i) ts.push_back(to_ps(when(rng)));
    }
    std::sort(ts.begin(), ts.end());

    PhotonStream kept;
    kept.reserve(ts.size());
    bool have_last = false;
    std::uint64_t last = 0;
    for (std::uint64_t t : ts) {
      if (have_last && t - last < dead_ps) continue;
      kept.push_back({t, ch});
      last = t;
      have_last = true;
    }
    merged = merge_streams(merged, kept);
  }
  return merged;
}

std::pair<PhotonStream, PhotonStream> split_hbt(std::span<const PhotonRecord> stream,
                                                std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, kStageSplit));
  std::bernoulli_distribution coin(0.5);
  std::pair<PhotonStream, PhotonStream> out;
  out.first.reserve(stream.size() / 2 + 16);
  out.second.reserve(stream.size() / 2 + 16);
  for (const auto& r : stream) {
    if (coin(rng)) {
      out.second.push_back({r.timestamp_ps, 1});
    } else {
      out.first.push_back({r.timestamp_ps, 0});
    }
  }
  return out;
}

}  // namespace spekit
