#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "spekit/errors.hpp"
#include "spekit/fitters.hpp"
#include "spekit/kinetics.hpp"

using namespace spekit;

namespace {

const ThreeLevelRates kRef{0.1, 0.3, 0.01, 0.002};

Eigen::Matrix3d rate_matrix(const ThreeLevelRates& k) {
  Eigen::Matrix3d m;
  m << -k.gamma_ge, k.gamma_eg, k.gamma_mg,
       k.gamma_ge, -(k.gamma_eg + k.gamma_em), 0.0,
       0.0, k.gamma_em, -k.gamma_mg;
  return m;
}

ThreeLevelRates random_rates(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> lg(-3.0, 0.0);
  return {std::pow(10.0, lg(rng)), std::pow(10.0, lg(rng)), std::pow(10.0, lg(rng)),
          std::pow(10.0, lg(rng))};
}

}  // namespace

TEST_SUITE("kinetics") {

TEST_CASE("steady state trivial cases") {
  auto p = steady_state({0.0, 0.3, 0.01, 0.002});
  CHECK(p.p_g == 1.0);
  CHECK(p.p_e == 0.0);
  CHECK(p.p_m == 0.0);

  p = steady_state({0.2, 0.2, 0.0, 0.5});
  CHECK(p.p_g == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p.p_e == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p.p_m == 0.0);
}

TEST_CASE("steady state against long-time ODE integration") {
  auto p = steady_state(kRef);
  auto ode = oracle::integrate(kRef, {1.0, 0.0, 0.0}, 1e5);
  CHECK(p.p_g == doctest::Approx(ode[0]).epsilon(1e-10));
  CHECK(p.p_e == doctest::Approx(ode[1]).epsilon(1e-10));
  CHECK(p.p_m == doctest::Approx(ode[2]).epsilon(1e-10));

  Eigen::Vector3d v(p.p_g, p.p_e, p.p_m);
  CHECK((rate_matrix(kRef) * v).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("absorbing metastable state is reported") {
  CHECK_THROWS_WITH_AS(steady_state({0.1, 0.3, 0.01, 0.0}),
                       doctest::Contains("absorbing"), ModelError);
}

TEST_CASE("invalid rates are rejected") {
  CHECK_THROWS_AS(steady_state({0.1, 0.0, 0.01, 0.002}), InvalidInput);
  CHECK_THROWS_AS(steady_state({-0.1, 0.3, 0.01, 0.002}), InvalidInput);
  CHECK_THROWS_AS(steady_state({0.1, 0.3, NAN, 0.002}), InvalidInput);
}

TEST_CASE("g2_exact matches the adaptive ODE oracle") {
  for (double tau : {1.0, 10.0, 100.0, 1000.0}) {
    CAPTURE(tau);
    CHECK(std::abs(g2_exact(kRef, tau) - oracle::g2(kRef, tau)) < 1e-8);
  }
}

TEST_CASE("g2_exact reduces to the two-level form without shelving") {
  ThreeLevelRates k{0.15, 0.27, 0.0, 0.01};
  for (double tau = 0.0; tau < 60.0; tau += 0.37) {
    double two = 1.0 - std::exp(-(k.gamma_ge + k.gamma_eg) * tau);
    CHECK(std::abs(g2_exact(k, tau) - two) < 1e-10);
  }
}

TEST_CASE("g2_exact preconditions") {
  CHECK_THROWS_AS(g2_exact({0.0, 0.3, 0.01, 0.002}, 1.0), ModelError);
  std::vector<double> unsorted{1.0, 0.5};
  CHECK_THROWS_AS(g2_exact(kRef, unsorted), InvalidInput);
  std::vector<double> negative{-1.0};
  CHECK_THROWS_AS(g2_exact(kRef, negative), InvalidInput);
  auto grid = g2_exact(kRef, std::vector<double>{0.0, 1.0, 2.0});
  REQUIRE(grid.size() == 3);
  CHECK(grid[1].g2 == g2_exact(kRef, 1.0));
}

TEST_CASE("property: antibunching and asymptote") {
  std::mt19937_64 rng(11);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    auto k = random_rates(rng);
    CHECK(g2_exact(k, 0.0) == 0.0);
    std::array<double, 2> r;
    try {
      r = relaxation_rates(k);
    } catch (const ModelError&) {
      continue;  // oscillatory relaxation: no tau2
    }
    double tau2 = 1.0 / r[1];
    CAPTURE(k.gamma_ge);
    CAPTURE(k.gamma_eg);
    CAPTURE(k.gamma_em);
    CAPTURE(k.gamma_mg);
    CHECK(std::abs(g2_exact(k, 40.0 * tau2) - 1.0) < 1e-6);
    ++checked;
  }
  CHECK(checked > 200);
}

TEST_CASE("property: population conservation under propagation") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    auto k = random_rates(rng);
    double a = u(rng), b = u(rng) * (1.0 - a);
    LevelPopulations p0{a, b, 1.0 - a - b};
    double t = std::pow(10.0, 4.0 * u(rng) - 1.0);
    auto p = propagate(k, p0, t);
    CHECK(std::abs(p.sum() - 1.0) < 1e-12);
    CHECK(p.p_g > -1e-12);
    CHECK(p.p_e > -1e-12);
    CHECK(p.p_m > -1e-12);
  }
}

TEST_CASE("property: propagation composes") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (int trial = 0; trial < 100; ++trial) {
    auto k = random_rates(rng);
    double t1 = u(rng), t2 = u(rng);
    auto direct = propagate(k, {1.0, 0.0, 0.0}, t1 + t2);
    auto stepped = propagate(k, propagate(k, {1.0, 0.0, 0.0}, t1), t2);
    CHECK(direct.p_g == doctest::Approx(stepped.p_g).epsilon(1e-9));
    CHECK(direct.p_e == doctest::Approx(stepped.p_e).epsilon(1e-9));
    CHECK(direct.p_m == doctest::Approx(stepped.p_m).epsilon(1e-9));
  }
}

TEST_CASE("propagate near-degenerate spectrum stays accurate") {
  // (1, 1, 1, 1) has a repeated nonzero eigenvalue; nudge gamma_mg off it.
  for (double eps : {0.0, 1e-12, 1e-8, 1e-5}) {
    ThreeLevelRates k{1.0, 1.0, 1.0, 1.0 + eps};
    for (double t : {0.3, 3.0}) {
      auto p = propagate(k, {1.0, 0.0, 0.0}, t);
      auto ode = oracle::integrate(k, {1.0, 0.0, 0.0}, t);
      CAPTURE(eps);
      CHECK(p.p_e == doctest::Approx(ode[1]).epsilon(1e-9));
      CHECK(p.p_m == doctest::Approx(ode[2]).epsilon(1e-9));
    }
  }
}

TEST_CASE("g2_exact handles complex and degenerate spectra") {
  // A^2 < 4B: oscillatory relaxation.
  ThreeLevelRates osc{1.0, 0.1, 1.0, 1.0};
  CHECK_THROWS_AS(relaxation_rates(osc), ModelError);
  CHECK_THROWS_AS(g2_params_from_rates(osc), ModelError);
  for (double tau : {0.5, 2.0, 7.0}) {
    CHECK(g2_exact(osc, tau) == doctest::Approx(oracle::g2(osc, tau, 200.0)).epsilon(1e-9));
  }
  // Repeated root: A = 4, B = 4.
  ThreeLevelRates deg{1.0, 1.0, 1.0, 1.0};
  CHECK_THROWS_AS(g2_params_from_rates(deg), ModelError);
  for (double tau : {0.5, 2.0, 7.0}) {
    CHECK(g2_exact(deg, tau) == doctest::Approx(oracle::g2(deg, tau, 200.0)).epsilon(1e-9));
  }
}

TEST_CASE("eigenvalue identity against characteristic-polynomial roots") {
  std::mt19937_64 rng(14);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto k = random_rates(rng);
    Eigen::Matrix3d m = rate_matrix(k);
    // det(lambda I - M) = lambda (lambda^2 + a lambda + b): a = -trace,
    // b = sum of the principal 2x2 minors.
    double a = -m.trace();
    double b = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0) + m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0) +
               m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
    double disc = a * a - 4.0 * b;
    if (disc < 1e-12 * a * a) continue;
    // Stable quadratic roots.
    double q = -0.5 * (a + std::copysign(std::sqrt(disc), a));
    double x1 = q, x2 = b / q;
    double fast = std::max(std::abs(x1), std::abs(x2));
    double slow = std::min(std::abs(x1), std::abs(x2));
    auto r = relaxation_rates(k);
    CHECK(r[0] == doctest::Approx(fast).epsilon(1e-10));
    CHECK(r[1] == doctest::Approx(slow).epsilon(1e-10));
    if (k.gamma_em > 0.0 && k.gamma_ge > 0.0) {
      try {
        auto p = g2_params_from_rates(k);
        CHECK(1.0 / p.tau1 == doctest::Approx(fast).epsilon(1e-10));
        CHECK(1.0 / p.tau2 == doctest::Approx(slow).epsilon(1e-10));
      } catch (const ModelError&) {
        // negative bunching amplitude regime
      }
    }
    ++checked;
  }
  CHECK(checked > 150);
}

TEST_CASE("eigenvalues agree with a general eigen-solver") {
  Eigen::EigenSolver<Eigen::Matrix3d> es(rate_matrix(kRef));
  std::vector<double> mags;
  for (int i = 0; i < 3; ++i) mags.push_back(std::abs(es.eigenvalues()[i].real()));
  std::sort(mags.begin(), mags.end());
  auto r = relaxation_rates(kRef);
  CHECK(mags[0] < 1e-12);
  CHECK(r[1] == doctest::Approx(mags[1]).epsilon(1e-10));
  CHECK(r[0] == doctest::Approx(mags[2]).epsilon(1e-10));
}

TEST_CASE("g2 params: two-level limit") {
  auto p = g2_params_from_rates({0.1, 0.3, 0.0, 0.002});
  CHECK(p.alpha_bunching == 0.0);
  CHECK(1.0 / p.tau1 == doctest::Approx(0.4));
}

TEST_CASE("g2 params validated by fitting the two-exponential form to the exact curve") {
  std::vector<DataPoint> pts;
  for (double tau = 0.0; tau <= 3000.0; tau += 2.5) pts.push_back({tau, g2_exact(kRef, tau), 1.0});
  auto closed = g2_params_from_rates(kRef);
  std::vector<double> init{2.0, 400.0, 0.5};  // deliberately off
  auto fit = fit_curve(ModelId::kG2, pts, init, Bounds{{1e-6, 1e-6, 0.0}, {1e6, 1e9, 1e3}});
  CHECK(fit.converged);
  CHECK(fit.value("tau1") == doctest::Approx(closed.tau1).epsilon(1e-6));
  CHECK(fit.value("tau2") == doctest::Approx(closed.tau2).epsilon(1e-6));
  CHECK(fit.value("alpha") == doctest::Approx(closed.alpha_bunching).epsilon(1e-6));
}

TEST_CASE("closed form reproduces the exact curve when gamma_eg >= 50 gamma_em") {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int set = 0; set < 10; ++set) {
    ThreeLevelRates k;
    k.gamma_eg = 0.1 + 0.4 * u(rng);
    k.gamma_em = k.gamma_eg / (50.0 + 200.0 * u(rng));
    k.gamma_mg = k.gamma_em * (0.02 + 0.3 * u(rng));
    k.gamma_ge = k.gamma_eg * (0.01 + 0.5 * u(rng));
    auto p = g2_params_from_rates(k);
    double sup = 0.0;
    for (double tau = 0.0; tau <= 10.0 * p.tau2; tau += p.tau1 / 20.0) {
      double ex = g2_exact(k, tau);
      sup = std::max(sup, std::abs(p.evaluate(tau) - ex) / std::max(ex, 1.0));
    }
    CAPTURE(set);
    CHECK(sup < 1e-3);
  }
}

TEST_CASE("property: bunching appears exactly when alpha > 0") {
  std::mt19937_64 rng(16);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto k = random_rates(rng);
    if (trial % 5 == 0) k.gamma_em = 0.0;
    G2Params p;
    try {
      p = g2_params_from_rates(k);
    } catch (const ModelError&) {
      continue;
    }
    // Well separated time scales only, so a finite scan sees the peak.
    if (std::isfinite(p.tau2) && p.tau2 < 5.0 * p.tau1) continue;
    double peak = 0.0;
    double horizon = std::isfinite(p.tau2) ? 10.0 * p.tau2 : 50.0 * p.tau1;
    for (double tau = 0.0; tau <= horizon; tau += horizon / 4000.0) {
      peak = std::max(peak, g2_exact(k, tau));
    }
    CAPTURE(p.alpha_bunching);
    CAPTURE(peak);
    CHECK((peak > 1.0 + 1e-9) == (p.alpha_bunching > 1e-6));
    ++checked;
  }
  CHECK(checked > 50);
}

TEST_CASE("zero-power limits of the E1-like emitter") {
  ThreeLevelRates k{1e-7, (1.0 / 3.33) * 30.0 / 31.0, (1.0 / 3.33) / 31.0, 1.0 / 675.0};
  auto p = g2_params_from_rates(k);
  CHECK(p.tau1 == doctest::Approx(3.33).epsilon(1e-5));
  CHECK(p.tau2 == doctest::Approx(675.0).epsilon(1e-3));
  CHECK(p.tau2 > p.tau1);
  CHECK(p.alpha_bunching >= 0.0);
}

TEST_CASE("pump rate") {
  CHECK(pump_rate(0.0, {0.2}) == 0.0);
  CHECK(pump_rate(0.5, {0.2}) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK_THROWS_AS(pump_rate(-1.0, {0.2}), InvalidInput);
  CHECK_THROWS_AS(pump_rate(1.0, {0.0}), InvalidInput);
  auto k = rates_at_power(kRef, 2.0, {0.05});
  CHECK(k.gamma_ge == doctest::Approx(0.1));
  CHECK(k.gamma_eg == kRef.gamma_eg);
}

TEST_CASE("1/tau1 is linear in power through the pump model") {
  ThreeLevelRates base{0.0, 0.29, 0.0097, 1.0 / 675.0};
  RateSeries s;
  std::vector<DataPoint> pts;
  for (double p : {0.2, 0.4, 0.6, 0.8, 1.0}) {
    auto g = g2_params_from_rates(rates_at_power(base, p, {0.02}));
    pts.push_back({p, 1.0 / g.tau1, 1.0});
  }
  auto fit = fit_curve(ModelId::kLine, pts, std::vector<double>{0.3, 0.02});
  double ss_res = fit.residual_norm * fit.residual_norm;
  double mean = 0.0;
  for (auto& q : pts) mean += q.y / pts.size();
  double ss_tot = 0.0;
  for (auto& q : pts) ss_tot += (q.y - mean) * (q.y - mean);
  CHECK(1.0 - ss_res / ss_tot > 0.9999);
}

TEST_CASE("zero-power extrapolation") {
  SUBCASE("exact line") {
    RateSeries s;
    for (double p : {0.1, 0.3, 0.5, 0.9}) s.push_back({p, 0.3 + 0.02 * p, 1e-3 * (1.0 + p)});
    auto e = extrapolate_zero_power(s);
    CHECK(e.intercept == doctest::Approx(0.3).epsilon(1e-13));
    CHECK(e.slope == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(e.weighted);
  }
  SUBCASE("hand-computed weighted fit") {
    // Two points determine the line; sigmas from (X^T W X)^-1.
    RateSeries s{{1.0, 2.0, 0.5}, {3.0, 5.0, 1.0}};
    auto e = extrapolate_zero_power(s);
    CHECK(e.slope == doctest::Approx(1.5));
    CHECK(e.intercept == doctest::Approx(0.5));
    // W = diag(4, 1): S = 5, Sx = 7, Sxx = 13, det = 16.
    CHECK(e.sigma_intercept == doctest::Approx(std::sqrt(13.0 / 16.0)));
    CHECK(e.sigma_slope == doctest::Approx(std::sqrt(5.0 / 16.0)));
    CHECK(e.covariance == doctest::Approx(-7.0 / 16.0));
  }
  SUBCASE("equal sigmas use ordinary least squares") {
    RateSeries s{{0.2, 1.0, 0.1}, {0.4, 1.3, 0.1}, {0.6, 1.4, 0.1}, {0.8, 1.8, 0.1}};
    auto e = extrapolate_zero_power(s);
    CHECK_FALSE(e.weighted);
    // OLS by hand: xbar = 0.5, ybar = 1.375, Sxy = 0.25, Sxx = 0.2.
    CHECK(e.slope == doctest::Approx(1.25));
    CHECK(e.intercept == doctest::Approx(0.75));
  }
  SUBCASE("series built from the kinetics") {
    RateSeries s;
    ThreeLevelRates base{0.0, 0.3, 0.01, 0.002};
    for (double p : {0.1, 0.3, 0.5, 0.7, 1.0}) {
      auto g = g2_params_from_rates(rates_at_power(base, p, {0.05}));
      s.push_back({p, 1.0 / g.tau1, 1e-3});
    }
    auto e = extrapolate_zero_power(s);
    CHECK(e.intercept == doctest::Approx(0.31).epsilon(0.05));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(extrapolate_zero_power({{1.0, 1.0, 0.1}}), InvalidInput);
    CHECK_THROWS_AS(extrapolate_zero_power({{1.0, 1.0, 0.1}, {2.0, 1.0, 0.0}}), InvalidInput);
    CHECK_THROWS_AS(extrapolate_zero_power({{1.0, 1.0, 0.1}, {1.0, 2.0, 0.1}}), InvalidInput);
    CHECK_THROWS_AS(extrapolate_zero_power({{0.0, 1.0, 0.1}, {1.0, 2.0, 0.1}}), InvalidInput);
  }
}

TEST_CASE("quantum efficiency from steady-state fluxes") {
  CHECK(quantum_efficiency({0.1, 0.3, 0.0, 0.002}) == 1.0);
  ThreeLevelRates k{0.1, 0.3, 0.01, 50.0};
  // Flux oracle from the ODE steady state: radiative returns over all returns.
  auto ode = oracle::integrate(k, {1.0, 0.0, 0.0}, 1e3);
  double oracle_qe = k.gamma_eg * ode[1] / (k.gamma_eg * ode[1] + k.gamma_mg * ode[2]);
  CHECK(quantum_efficiency(k) == doctest::Approx(oracle_qe).epsilon(1e-9));
  CHECK(quantum_efficiency(k) == doctest::Approx(0.968).epsilon(1e-3));
  ThreeLevelRates e1{0.02, (1.0 / 3.33) * 30.0 / 31.0, (1.0 / 3.33) / 31.0, 1.0 / 675.0};
  CHECK(quantum_efficiency(e1) > 0.9);
  CHECK_THROWS_AS(quantum_efficiency({0.1, 0.0, 0.0, 0.1}), InvalidInput);
}

}  // TEST_SUITE
