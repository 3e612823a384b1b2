#pragma once

// Three-level (ground / excited / metastable) incoherent rate model.
//
//   d/dt [pg]   [-k_ge   k_eg          k_mg ] [pg]
//        [pe] = [ k_ge  -(k_eg + k_em)  0   ] [pe]
//        [pm]   [ 0      k_em         -k_mg ] [pm]
//
// All rates are in 1/ns, times in ns, optical powers in mW.

#include <array>
#include <span>
#include <vector>

namespace spekit {

struct ThreeLevelRates {
  double gamma_ge = 0.0;  ///< excitation (pump dependent), 1/ns
  double gamma_eg = 0.0;  ///< radiative decay, 1/ns
  double gamma_em = 0.0;  ///< shelving into the metastable state, 1/ns
  double gamma_mg = 0.0;  ///< metastable deshelving, 1/ns

  /// Throws InvalidInput unless all rates are finite, >= 0 and gamma_eg > 0.
  void validate() const;
};

struct LevelPopulations {
  double p_g = 1.0;
  double p_e = 0.0;
  double p_m = 0.0;

  double sum() const { return p_g + p_e + p_m; }
};

/// Linear pump: gamma_ge = cross_section * power.
struct PumpModel {
  double cross_section = 0.0;  ///< 1/(ns mW)
};

struct G2Params {
  double tau1 = 0.0;  ///< ns, antibunching time
  double tau2 = 0.0;  ///< ns, bunching (metastable) time
  double alpha_bunching = 0.0;
  double sigma_tau1 = 0.0;
  double sigma_tau2 = 0.0;
  double sigma_alpha = 0.0;

  /// 1 - (1 + alpha) exp(-|tau|/tau1) + alpha exp(-|tau|/tau2)
  double evaluate(double tau_ns) const;
};

struct RatePoint {
  double power_mw = 0.0;
  double value = 0.0;  ///< 1/ns
  double sigma = 0.0;  ///< 1/ns
};

using RateSeries = std::vector<RatePoint>;

struct LinearExtrapolation {
  double intercept = 0.0;        ///< 1/ns at zero power
  double slope = 0.0;            ///< 1/(ns mW)
  double sigma_intercept = 0.0;
  double sigma_slope = 0.0;
  double covariance = 0.0;       ///< cov(intercept, slope)
  bool weighted = true;          ///< false when the equal-sigma fallback was used
};

struct G2Sample {
  double tau = 0.0;  ///< ns
  double g2 = 0.0;
};

/// Stationary populations (null vector of the rate matrix, normalized).
/// Throws ModelError when the metastable state is absorbing.
LevelPopulations steady_state(const ThreeLevelRates& rates);

/// Populations at time t (ns) starting from `initial`, from the analytic
/// eigen-solution of the rate matrix.
LevelPopulations propagate(const ThreeLevelRates& rates, const LevelPopulations& initial,
                           double t_ns);

/// The two nonzero eigenvalue magnitudes of the rate matrix, fast one first.
std::array<double, 2> relaxation_rates(const ThreeLevelRates& rates);

/// g2(tau) = p_e(tau | p_g(0) = 1) / p_e(inf). `tau_grid` must be sorted and
/// nonnegative. Degenerate eigenvalues use the repeated-root solution.
std::vector<G2Sample> g2_exact(const ThreeLevelRates& rates, std::span<const double> tau_grid);
double g2_exact(const ThreeLevelRates& rates, double tau_ns);

/// Closed-form (tau1, tau2, alpha) such that G2Params::evaluate equals g2_exact.
/// Sigmas are zero. Throws ModelError for degenerate eigenvalues and for the
/// fast-deshelving regime where the bunching amplitude would be negative.
G2Params g2_params_from_rates(const ThreeLevelRates& rates);

/// gamma_ge for a given optical power (mW).
double pump_rate(double power_mw, const PumpModel& pump);

/// Rates with gamma_ge replaced by pump_rate(power_mw, pump).
ThreeLevelRates rates_at_power(ThreeLevelRates base, double power_mw, const PumpModel& pump);

/// Weighted straight-line fit value = intercept + slope * power, evaluated at
/// P = 0. Falls back to ordinary least squares (residual-scaled covariance)
/// when every sigma is identical.
LinearExtrapolation extrapolate_zero_power(const RateSeries& series);

/// Fraction of returns to the ground state that are radiative, from
/// steady-state fluxes: k_eg p_e / (k_eg p_e + k_mg p_m).
double quantum_efficiency(const ThreeLevelRates& rates);

}  // namespace spekit
