#include "spekit/kinetics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "spekit/errors.hpp"

namespace spekit {
namespace {

using cplx = std::complex<double>;

Eigen::Matrix3d rate_matrix(const ThreeLevelRates& k) {
  Eigen::Matrix3d m;
  m << -k.gamma_ge, k.gamma_eg, k.gamma_mg,
       k.gamma_ge, -(k.gamma_eg + k.gamma_em), 0.0,
       0.0, k.gamma_em, -k.gamma_mg;
  return m;
}

struct Spectrum2 {
  // Nonzero eigenvalues are -r1 and -r2, fast root first.
  cplx r1;
  cplx r2;
  double sum = 0.0;      // r1 + r2
  double product = 0.0;  // r1 * r2
  double discriminant = 0.0;
};

Spectrum2 nonzero_spectrum(const ThreeLevelRates& k) {
  const double a = k.gamma_ge + k.gamma_eg + k.gamma_em + k.gamma_mg;
  const double b = k.gamma_ge * k.gamma_em + k.gamma_ge * k.gamma_mg + k.gamma_eg * k.gamma_mg +
                   k.gamma_em * k.gamma_mg;
  Spectrum2 s;
  s.sum = a;
  s.product = b;
  s.discriminant = a * a - 4.0 * b;
  if (s.discriminant >= 0.0) {
    const double r1 = 0.5 * (a + std::sqrt(s.discriminant));
    s.r1 = r1;
    s.r2 = r1 > 0.0 ? b / r1 : 0.0;
  } else {
    const double im = 0.5 * std::sqrt(-s.discriminant);
    s.r1 = cplx(0.5 * a, im);
    s.r2 = cplx(0.5 * a, -im);
  }
  return s;
}

// (1 - exp(-r t)) / r, continuous at r = 0.
cplx decay_integral(cplx r, double t) {
  const cplx x = r * t;
  if (std::abs(x) < 1e-5) {
    return t * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0);
  }
  return (1.0 - std::exp(-x)) / r;
}

// d/dr of decay_integral.
cplx decay_integral_slope(cplx r, double t) {
  const cplx x = r * t;
  if (std::abs(x) < 1e-3) {
    return t * t * (-0.5 + x / 3.0 - x * x / 8.0 + x * x * x / 30.0);
  }
  return -(1.0 - std::exp(-x) * (1.0 + x)) / (r * r);
}

bool nearly_degenerate(const Spectrum2& s) {
  return std::abs(s.r1 - s.r2) <= 1e-6 * std::abs(s.r1);
}

void require_finite_nonneg(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0) {
    std::ostringstream os;
    os << name << " must be finite and >= 0 (got " << v << ")";
    throw InvalidInput(os.str());
  }
}

}  // namespace

void ThreeLevelRates::validate() const {
  require_finite_nonneg(gamma_ge, "gamma_ge");
  require_finite_nonneg(gamma_eg, "gamma_eg");
  require_finite_nonneg(gamma_em, "gamma_em");
  require_finite_nonneg(gamma_mg, "gamma_mg");
  if (gamma_eg <= 0.0) throw InvalidInput("gamma_eg must be > 0");
}

double G2Params::evaluate(double tau_ns) const {
  const double t = std::abs(tau_ns);
  return 1.0 - (1.0 + alpha_bunching) * std::exp(-t / tau1) +
         alpha_bunching * std::exp(-t / tau2);
}

LevelPopulations steady_state(const ThreeLevelRates& rates) {
  rates.validate();
  const auto& k = rates;
  if (k.gamma_ge == 0.0) return {1.0, 0.0, 0.0};
  if (k.gamma_em == 0.0) {
    const double total = k.gamma_ge + k.gamma_eg;
    return {k.gamma_eg / total, k.gamma_ge / total, 0.0};
  }
  if (k.gamma_mg == 0.0) {
    throw ModelError(
        "steady state undefined: metastable state |m> is absorbing (gamma_em > 0, gamma_mg = 0)");
  }
  const double wg = k.gamma_mg * (k.gamma_eg + k.gamma_em);
  const double we = k.gamma_ge * k.gamma_mg;
  const double wm = k.gamma_ge * k.gamma_em;
  const double total = wg + we + wm;
  return {wg / total, we / total, wm / total};
}

LevelPopulations propagate(const ThreeLevelRates& rates, const LevelPopulations& initial,
                           double t_ns) {
  rates.validate();
  if (!(t_ns >= 0.0)) throw InvalidInput("propagation time must be >= 0");
  if (t_ns == 0.0) return initial;

  // Putzer expansion around the eigenvalues (0, -r1, -r2):
  //   exp(Mt) = I + f[0,-r1] M + f[0,-r1,-r2] M (M + r1 I)
  const Spectrum2 s = nonzero_spectrum(rates);
  const cplx c1 = decay_integral(s.r1, t_ns);
  cplx c2;
  if (nearly_degenerate(s)) {
    c2 = -decay_integral_slope(0.5 * (s.r1 + s.r2), t_ns);
  } else {
    c2 = (decay_integral(s.r2, t_ns) - c1) / (s.r1 - s.r2);
  }
  const Eigen::Matrix3d m = rate_matrix(rates);
  const Eigen::Vector3d p0(initial.p_g, initial.p_e, initial.p_m);
  const Eigen::Vector3d mp = m * p0;
  const Eigen::Vector3d mmp = m * mp;
  // M(M + r1 I) p0 = M^2 p0 + r1 M p0; imaginary parts cancel against c2.
  const Eigen::Vector3cd second = mmp.cast<cplx>() + s.r1 * mp.cast<cplx>();
  const Eigen::Vector3cd p = p0.cast<cplx>() + c1 * mp.cast<cplx>() + c2 * second;
  return {p[0].real(), p[1].real(), p[2].real()};
}

std::array<double, 2> relaxation_rates(const ThreeLevelRates& rates) {
  rates.validate();
  const Spectrum2 s = nonzero_spectrum(rates);
  if (s.discriminant < 0.0) {
    throw ModelError("rate matrix has complex eigenvalues; relaxation is oscillatory");
  }
  return {s.r1.real(), s.r2.real()};
}

double g2_exact(const ThreeLevelRates& rates, double tau_ns) {
  rates.validate();
  if (rates.gamma_ge <= 0.0) {
    throw ModelError("g2 undefined without excitation (gamma_ge = 0)");
  }
  if (!(tau_ns >= 0.0)) throw InvalidInput("tau must be >= 0");
  const double pe_inf = steady_state(rates).p_e;
  const LevelPopulations p = propagate(rates, {1.0, 0.0, 0.0}, tau_ns);
  return p.p_e / pe_inf;
}

std::vector<G2Sample> g2_exact(const ThreeLevelRates& rates, std::span<const double> tau_grid) {
  rates.validate();
  if (rates.gamma_ge <= 0.0) {
    throw ModelError("g2 undefined without excitation (gamma_ge = 0)");
  }
  for (std::size_t i = 0; i < tau_grid.size(); ++i) {
    if (!(tau_grid[i] >= 0.0)) throw InvalidInput("tau grid must be nonnegative");
    if (i > 0 && tau_grid[i] < tau_grid[i - 1]) throw InvalidInput("tau grid must be sorted");
  }
  const double pe_inf = steady_state(rates).p_e;
  std::vector<G2Sample> out;
  out.reserve(tau_grid.size());
  for (double tau : tau_grid) {
    const LevelPopulations p = propagate(rates, {1.0, 0.0, 0.0}, tau);
    out.push_back({tau, p.p_e / pe_inf});
  }
  return out;
}

G2Params g2_params_from_rates(const ThreeLevelRates& rates) {
  rates.validate();
  const auto& k = rates;
  if (k.gamma_ge <= 0.0) throw ModelError("g2 parameters undefined without excitation");

  G2Params out;
  if (k.gamma_em == 0.0) {
    // Metastable state decoupled: pure two-level antibunching.
    out.tau1 = 1.0 / (k.gamma_ge + k.gamma_eg);
    out.tau2 = (k.gamma_mg > 0.0 && k.gamma_mg < k.gamma_ge + k.gamma_eg)
                   ? 1.0 / k.gamma_mg
                   : std::numeric_limits<double>::infinity();
    out.alpha_bunching = 0.0;
    return out;
  }

  const Spectrum2 s = nonzero_spectrum(rates);
  if (s.discriminant < 0.0 || nearly_degenerate(s)) {
    throw ModelError(
        "rate matrix eigenvalues are degenerate or complex; the two-exponential form does not "
        "apply, use g2_exact");
  }
  const double r1 = s.r1.real();
  const double r2 = s.r2.real();
  const double pe_inf = steady_state(rates).p_e;
  // p_e(t) = pe_inf + c1 exp(-r1 t) + c2 exp(-r2 t), p_e(0) = 0, p_e'(0) = gamma_ge.
  const double c2 = (k.gamma_ge - r1 * pe_inf) / (r1 - r2);
  const double alpha = c2 / pe_inf;
  if (alpha < 0.0) {
    throw ModelError(
        "metastable deshelving faster than the antibunching mode: negative bunching amplitude, "
        "use g2_exact");
  }
  out.tau1 = 1.0 / r1;
  out.tau2 = 1.0 / r2;
  out.alpha_bunching = alpha;
  return out;
}

double pump_rate(double power_mw, const PumpModel& pump) {
  if (!(pump.cross_section > 0.0) || !std::isfinite(pump.cross_section)) {
    throw InvalidInput("pump cross_section must be finite and > 0");
  }
  if (!(power_mw >= 0.0) || !std::isfinite(power_mw)) {
    throw InvalidInput("optical power must be finite and >= 0");
  }
  return pump.cross_section * power_mw;
}

ThreeLevelRates rates_at_power(ThreeLevelRates base, double power_mw, const PumpModel& pump) {
  base.gamma_ge = pump_rate(power_mw, pump);
  return base;
}

LinearExtrapolation extrapolate_zero_power(const RateSeries& series) {
  const std::size_t n = series.size();
  if (n < 2) throw InvalidInput("zero-power extrapolation needs at least 2 points");
  for (const auto& pt : series) {
    if (!(pt.power_mw > 0.0) || !std::isfinite(pt.power_mw)) {
      throw InvalidInput("powers must be finite and strictly positive");
    }
    if (!(pt.sigma > 0.0) || !std::isfinite(pt.sigma)) {
      throw InvalidInput("sigmas must be finite and strictly positive");
    }
    if (!std::isfinite(pt.value)) throw InvalidInput("rate values must be finite");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (series[i].power_mw == series[j].power_mw) {
        throw InvalidInput("powers must be distinct");
      }
    }
  }

  const bool equal_sigmas = std::all_of(series.begin(), series.end(), [&](const RatePoint& p) {
    return p.sigma == series.front().sigma;
  });

  // Normal equations for y = a + b x with weights w.
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& pt : series) {
    const double w = equal_sigmas ? 1.0 : 1.0 / (pt.sigma * pt.sigma);
    sw += w;
    sx += w * pt.power_mw;
    sy += w * pt.value;
    sxx += w * pt.power_mw * pt.power_mw;
    sxy += w * pt.power_mw * pt.value;
  }
  const double det = sw * sxx - sx * sx;
  LinearExtrapolation out;
  out.weighted = !equal_sigmas;
  out.slope = (sw * sxy - sx * sy) / det;
  out.intercept = (sxx * sy - sx * sxy) / det;

  double scale = 1.0;
  if (equal_sigmas) {
    if (n > 2) {
      double rss = 0.0;
      for (const auto& pt : series) {
        const double r = pt.value - out.intercept - out.slope * pt.power_mw;
        rss += r * r;
      }
      scale = rss / static_cast<double>(n - 2);
    } else {
      scale = series.front().sigma * series.front().sigma;
    }
  }
  out.sigma_intercept = std::sqrt(scale * sxx / det);
  out.sigma_slope = std::sqrt(scale * sw / det);
  out.covariance = -scale * sx / det;
  return out;
}

double quantum_efficiency(const ThreeLevelRates& rates) {
  require_finite_nonneg(rates.gamma_ge, "gamma_ge");
  require_finite_nonneg(rates.gamma_eg, "gamma_eg");
  require_finite_nonneg(rates.gamma_em, "gamma_em");
  require_finite_nonneg(rates.gamma_mg, "gamma_mg");
  if (rates.gamma_eg + rates.gamma_em <= 0.0) {
    throw InvalidInput("quantum efficiency undefined: excited state has no decay channel");
  }
  if (rates.gamma_eg == 0.0) return 0.0;
  const bool has_flux = rates.gamma_ge > 0.0 && (rates.gamma_em == 0.0 || rates.gamma_mg > 0.0);
  if (!has_flux) {
    // No stationary cycling; the per-excitation branching ratio is the limit.
    return rates.gamma_eg / (rates.gamma_eg + rates.gamma_em);
  }
  const LevelPopulations p = steady_state(rates);
  const double radiative = rates.gamma_eg * p.p_e;
  const double via_metastable = rates.gamma_mg * p.p_m;
  return radiative / (radiative + via_metastable);
}

}  // namespace spekit
