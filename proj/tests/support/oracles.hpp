#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls into the library code paths it is used to check.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <utility>
#include <vector>

#include "spekit/kinetics.hpp"

namespace oracle {

using State = std::array<double, 3>;  // p_g, p_e, p_m

inline State rate_rhs(const spekit::ThreeLevelRates& k, const State& p) {
  const double g = p[0], e = p[1], m = p[2];
  return {-k.gamma_ge * g + k.gamma_eg * e + k.gamma_mg * m,
          k.gamma_ge * g - (k.gamma_eg + k.gamma_em) * e,
          k.gamma_em * e - k.gamma_mg * m};
}

// Dormand-Prince 5(4) with adaptive steps.
inline State integrate(const spekit::ThreeLevelRates& k, State y, double t_end,
                       double rtol = 1e-12, double atol = 1e-15) {
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  auto axpy = [](const State& y0, std::initializer_list<std::pair<double, const State*>> terms,
                 double h) {
    State out = y0;
    for (const auto& [c, s] : terms) {
      for (int i = 0; i < 3; ++i) out[i] += h * c * (*s)[i];
    }
    return out;
  };

  double t = 0.0;
  double h = std::min(1e-3, t_end);
  State k1 = rate_rhs(k, y);
  while (t < t_end) {
    if (t + h > t_end) h = t_end - t;
    State k2 = rate_rhs(k, axpy(y, {{a21, &k1}}, h));
    State k3 = rate_rhs(k, axpy(y, {{a31, &k1}, {a32, &k2}}, h));
    State k4 = rate_rhs(k, axpy(y, {{a41, &k1}, {a42, &k2}, {a43, &k3}}, h));
    State k5 = rate_rhs(k, axpy(y, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}, h));
    State k6 = rate_rhs(k, axpy(y, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}, h));
    State y5 = axpy(y, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}}, h);
    State k7 = rate_rhs(k, y5);
    double err = 0.0;
    for (int i = 0; i < 3; ++i) {
      double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
      err = std::max(err, std::abs(ei) / sc);
    }
    if (err <= 1.0) {
      t += h;
      y = y5;
      k1 = k7;
    }
    double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    h *= fac;
  }
  return y;
}

// g2 from the ODE: p_e(tau | ground) / p_e(long-time limit).
inline double g2(const spekit::ThreeLevelRates& k, double tau, double t_inf = 1e5) {
  State pe_inf = integrate(k, {1.0, 0.0, 0.0}, t_inf);
  State p = integrate(k, {1.0, 0.0, 0.0}, tau);
  return p[1] / pe_inf[1];
}

// Coincidences tau = t1 - t0 over all pairs. Bins are centred on zero with
// width w; the centre bin is |tau| < w/2 and a delay exactly on a bin edge
// is counted in the bin farther from zero.
inline std::vector<std::uint64_t> all_pairs(const std::vector<std::uint64_t>& ch0,
                                            const std::vector<std::uint64_t>& ch1,
                                            std::int64_t w, std::int64_t window) {
  const std::int64_t outer = (2 * window - w + 2 * w - 1) / (2 * w);  // ceil((window - w/2)/w)
  std::vector<std::uint64_t> h(static_cast<std::size_t>(2 * outer + 1), 0);
  for (auto t0 : ch0) {
    for (auto t1 : ch1) {
      const std::int64_t tau = static_cast<std::int64_t>(t1) - static_cast<std::int64_t>(t0);
      const std::int64_t a = tau < 0 ? -tau : tau;
      std::int64_t k = 0;
      if (2 * a >= w) k = (2 * a - w) / (2 * w) + 1;
      if (k > outer) continue;
      h[static_cast<std::size_t>(outer + (tau < 0 ? -k : k))]++;
    }
  }
  return h;
}

inline std::vector<std::uint64_t> poisson_times(std::mt19937_64& rng, double rate_per_ps,
                                                double duration_ps) {
  std::exponential_distribution<double> gap(rate_per_ps);
  std::vector<std::uint64_t> out;
  double t = gap(rng);
  while (t < duration_ps) {
    out.push_back(static_cast<std::uint64_t>(t));
    t += gap(rng);
  }
  return out;
}

}  // namespace oracle
