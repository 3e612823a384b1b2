#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "spekit/correlate.hpp"
#include "spekit/errors.hpp"
#include "spekit/kinetics.hpp"
#include "spekit/simulate.hpp"

using namespace spekit;

namespace {

PhotonStream poisson_stream(std::uint64_t seed, double rate_per_ns, double duration_ns) {
  std::mt19937_64 rng(seed);
  PhotonStream s;
  for (auto t : oracle::poisson_times(rng, rate_per_ns * 1e-3, duration_ns * 1e3)) s.push_back({t, 0});
  return s;
}

bool time_ordered(const PhotonStream& s) {
  return std::is_sorted(s.begin(), s.end(), [](const PhotonRecord& a, const PhotonRecord& b) {
    return a.timestamp_ps < b.timestamp_ps;
  });
}

}  // namespace

TEST_SUITE("simulate") {

TEST_CASE("no pumping gives an empty stream") {
  SimConfig cfg{1e6, 3};
  CHECK(simulate_photon_stream({0.0, 0.3, 0.01, 0.002}, cfg).empty());
}

TEST_CASE("mean emission rate matches the steady state") {
  ThreeLevelRates k{0.1, 0.3, 0.0, 0.5};
  SimConfig cfg{1e7, 42};
  auto s = simulate_photon_stream(k, cfg);
  double expected = k.gamma_eg * steady_state(k).p_e * cfg.duration_ns;
  CHECK(std::abs(static_cast<double>(s.size()) - expected) < 3.0 * std::sqrt(expected));
  CHECK(time_ordered(s));
}

TEST_CASE("excited-state occupancy matches the steady state") {
  ThreeLevelRates k{0.1, 0.3, 0.01, 0.002};
  SimConfig cfg{5e7, 7};
  auto r = simulate_emitter(k, cfg);
  double total = r.dwell_ns[0] + r.dwell_ns[1] + r.dwell_ns[2];
  CHECK(total == doctest::Approx(cfg.duration_ns).epsilon(1e-9));
  auto p = steady_state(k);
  // Binomial error bar with one independent sample per slow relaxation time.
  double tau_c = 1.0 / relaxation_rates(k)[1];
  double n_eff = cfg.duration_ns / (2.0 * tau_c);
  std::array<double, 3> expect{p.p_g, p.p_e, p.p_m};
  for (int i = 0; i < 3; ++i) {
    double frac = r.dwell_ns[i] / total;
    double sigma = std::sqrt(expect[i] * (1.0 - expect[i]) / n_eff);
    CAPTURE(i);
    CHECK(std::abs(frac - expect[i]) < 3.0 * sigma);
  }
  // Every excitation ends in a photon or a shelving event.
  auto diff = static_cast<long long>(r.excitations) -
              static_cast<long long>(r.photons.size() + r.shelving_events);
  CHECK(std::llabs(diff) <= 1);
}

TEST_CASE("determinism and thread independence") {
  ThreeLevelRates k{0.05, 0.3, 0.01, 0.002};
  SimConfig a{2e6, 99};
  a.segments = 4;
  a.threads = 1;
  SimConfig b = a;
  b.threads = 4;
  auto s1 = simulate_photon_stream(k, a);
  auto s2 = simulate_photon_stream(k, a);
  auto s3 = simulate_photon_stream(k, b);
  CHECK(s1 == s2);
  CHECK(s1 == s3);
  SimConfig c = a;
  c.seed = 100;
  CHECK(simulate_photon_stream(k, c) != s1);
}

TEST_CASE("segments keep the statistics") {
  ThreeLevelRates k{0.1, 0.3, 0.0, 0.5};
  SimConfig cfg{1e7, 5};
  cfg.segments = 8;
  auto s = simulate_photon_stream(k, cfg);
  double expected = k.gamma_eg * steady_state(k).p_e * cfg.duration_ns;
  CHECK(std::abs(static_cast<double>(s.size()) - expected) < 3.0 * std::sqrt(expected));
  CHECK(time_ordered(s));
  CHECK(s.back().timestamp_ps < static_cast<std::uint64_t>(cfg.duration_ns * 1e3));
}

TEST_CASE("pulsed excitation decays exponentially after each pulse") {
  ThreeLevelRates k{2.0, 1.0 / 3.45, 0.0, 0.0};
  SimConfig cfg{2e7, 8};
  cfg.pulsed = PulseConfig{25.0, 1.0};
  auto s = simulate_photon_stream(k, cfg);
  REQUIRE(s.size() > 100000);
  // Histogram of arrival phase with 0.5 ns bins.
  std::vector<double> h(50, 0.0);
  for (const auto& r : s) {
    double phase = std::fmod(r.timestamp_ps * 1e-3, 25.0);
    h[static_cast<std::size_t>(phase / 0.5)] += 1.0;
  }
  // Log-linear weighted regression over 2..20 ns (after the gate closes).
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 4; i < 40; ++i) {
    double x = (i + 0.5) * 0.5, y = std::log(h[i]), w = h[i];
    sw += w; sx += w * x; sy += w * y; sxx += w * x * x; sxy += w * x * y;
  }
  double slope = (sw * sxy - sx * sy) / (sw * sxx - sx * sx);
  CHECK(-1.0 / slope == doctest::Approx(3.45).epsilon(0.03));
}

TEST_CASE("config validation") {
  ThreeLevelRates k{0.1, 0.3, 0.01, 0.002};
  CHECK_THROWS_AS(simulate_photon_stream(k, SimConfig{0.0, 1}), InvalidInput);
  SimConfig bad{1e3, 1};
  bad.pulsed = PulseConfig{25.0, 25.0};
  CHECK_THROWS_AS(simulate_photon_stream(k, bad), InvalidInput);
  SimConfig noseg{1e3, 1};
  noseg.segments = 0;
  CHECK_THROWS_AS(simulate_photon_stream(k, noseg), InvalidInput);
  CHECK_THROWS_AS(simulate_photon_stream({0.1, 0.0, 0.0, 0.0}, SimConfig{1e3, 1}), InvalidInput);
}

TEST_CASE("ideal detector is the identity") {
  auto s = poisson_stream(1, 0.01, 1e6);
  auto out = apply_detector(s, DetectorModel{}, 3, 1e6);
  CHECK(out == s);
}

TEST_CASE("detector efficiency thins binomially") {
  auto s = poisson_stream(2, 0.1, 1e7);
  double n = static_cast<double>(s.size());
  REQUIRE(n > 9e5);
  DetectorModel d;
  d.efficiency = 0.5;
  auto out = apply_detector(s, d, 4, 1e7);
  CHECK(std::abs(static_cast<double>(out.size()) - 0.5 * n) < 4.0 * std::sqrt(0.25 * n));
}

TEST_CASE("non-paralyzable dead time") {
  const double r = 0.01, dead_ns = 100.0, duration = 1e8;
  auto s = poisson_stream(3, r, duration);
  DetectorModel d;
  d.dead_time_ps = dead_ns * 1e3;
  auto out = apply_detector(s, d, 5, duration);
  double expected = r / (1.0 + r * dead_ns);
  CHECK(out.size() / duration == doctest::Approx(expected).epsilon(0.02));
  for (std::size_t i = 1; i < out.size(); ++i) {
    REQUIRE(out[i].timestamp_ps - out[i - 1].timestamp_ps >= static_cast<std::uint64_t>(d.dead_time_ps));
  }
}

TEST_CASE("dark counts and jitter") {
  DetectorModel d;
  d.dark_rate = 1e-3;
  auto dark = apply_detector({}, d, 6, 1e7);
  double expected = 1e-3 * 1e7;
  CHECK(std::abs(static_cast<double>(dark.size()) - expected) < 4.0 * std::sqrt(expected));
  CHECK(time_ordered(dark));

  auto s = poisson_stream(4, 0.01, 1e6);
  DetectorModel j;
  j.jitter_sigma_ps = 50.0;
  auto out = apply_detector(s, j, 7, 1e6);
  REQUIRE(out.size() == s.size());
  CHECK(time_ordered(out));
  double mean_shift = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    mean_shift += static_cast<double>(out[i].timestamp_ps) - static_cast<double>(s[i].timestamp_ps);
  }
  mean_shift /= static_cast<double>(s.size());
  CHECK(std::abs(mean_shift) < 4.0 * 50.0 / std::sqrt(static_cast<double>(s.size())));
}

TEST_CASE("detector is deterministic and validates") {
  auto s = poisson_stream(5, 0.05, 1e6);
  DetectorModel d;
  d.efficiency = 0.7;
  d.jitter_sigma_ps = 30.0;
  d.dark_rate = 1e-4;
  d.dead_time_ps = 20000.0;
  CHECK(apply_detector(s, d, 9, 1e6) == apply_detector(s, d, 9, 1e6));
  d.efficiency = 1.5;
  CHECK_THROWS_AS(apply_detector(s, d, 9, 1e6), InvalidInput);
}

TEST_CASE("HBT beamsplitter") {
  auto empty = split_hbt({}, 1);
  CHECK(empty.first.empty());
  CHECK(empty.second.empty());

  auto s = poisson_stream(6, 0.1, 1e7);
  double n = static_cast<double>(s.size());
  auto [a, b] = split_hbt(s, 10);
  CHECK(a.size() + b.size() == s.size());
  CHECK(std::abs(static_cast<double>(a.size()) - static_cast<double>(b.size())) < 4.0 * std::sqrt(n / 4.0));
  for (const auto& r : a) REQUIRE(r.channel == 0);
  for (const auto& r : b) REQUIRE(r.channel == 1);
  auto merged = merge_streams(a, b);
  REQUIRE(merged.size() == s.size());
  for (std::size_t i = 0; i < s.size(); ++i) REQUIRE(merged[i].timestamp_ps == s[i].timestamp_ps);
}

TEST_CASE("split two-level stream shows the antibunching dip") {
  ThreeLevelRates k{0.2, 0.3, 0.0, 0.0};
  SimConfig cfg{2e7, 21};
  auto s = simulate_photon_stream(k, cfg);
  auto [a, b] = split_hbt(s, 22);
  CorrelationConfig cc;
  cc.bin_width_ps = 256;
  cc.window_ps = 40000;
  cc.duration_ps = cfg.duration_ns * 1e3;
  auto h = g2_histogram(channel_timestamps(a, 0), channel_timestamps(b, 1), cc);
  // Bin-averaged exact g2 via 5-point Gauss-Legendre.
  static constexpr std::array<double, 5> x{-0.9061798459, -0.5384693101, 0.0, 0.5384693101, 0.9061798459};
  static constexpr std::array<double, 5> w{0.2369268851, 0.4786286705, 0.5688888889, 0.4786286705, 0.2369268851};
  double chi2 = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    double lo = h.bin_edges_ps[i] * 1e-3, hi = h.bin_edges_ps[i + 1] * 1e-3;
    double avg = 0.0;
    for (int q = 0; q < 5; ++q) {
      double t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x[q];
      avg += 0.5 * w[q] * (1.0 - std::exp(-(k.gamma_ge + k.gamma_eg) * std::abs(t)));
    }
    double z = (h.normalized(i) - avg) / h.sigma(i);
    chi2 += z * z;
  }
  CHECK(chi2 / h.size() < 1.3);
  CHECK(h.normalized(h.size() / 2) < 0.1);
}

TEST_CASE("derived seeds are distinct") {
  CHECK(derive_seed(1, 1, 0) != derive_seed(1, 1, 1));
  CHECK(derive_seed(1, 1, 0) != derive_seed(1, 2, 0));
  CHECK(derive_seed(1, 1, 0) != derive_seed(2, 1, 0));
  CHECK(derive_seed(7, 3, 5) == derive_seed(7, 3, 5));
}

}  // TEST_SUITE
