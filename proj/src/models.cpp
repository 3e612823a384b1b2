#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <tuple>
#include <utility>
#include <numbers>

#include <Eigen/Dense>

#include "spekit/errors.hpp"
#include "spekit/fitters.hpp"

namespace spekit {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

Model make_line() {
  return {"line",
          {"intercept", "slope"},
          [](double x, std::span<const double> p) { return p[0] + p[1] * x; },
          [](double x, std::span<const double>, std::span<double> g) {
            g[0] = 1.0;
            g[1] = x;
          }};
}

Model make_g2() {
  return {"g2_three_level",
          {"tau1", "tau2", "alpha"},
          [](double x, std::span<const double> p) {
            const double t = std::abs(x);
            return 1.0 - (1.0 + p[2]) * std::exp(-t / p[0]) + p[2] * std::exp(-t / p[1]);
          },
          [](double x, std::span<const double> p, std::span<double> g) {
            const double t = std::abs(x);
            const double e1 = std::exp(-t / p[0]);
            const double e2 = std::exp(-t / p[1]);
            g[0] = -(1.0 + p[2]) * e1 * t / (p[0] * p[0]);
            g[1] = p[2] * e2 * t / (p[1] * p[1]);
            g[2] = e2 - e1;
          }};
}

Model make_exp_decay() {
  return {"exp_decay",
          {"amplitude", "tau", "baseline"},
          [](double x, std::span<const double> p) { return p[0] * std::exp(-x / p[1]) + p[2]; },
          [](double x, std::span<const double> p, std::span<double> g) {
            const double e = std::exp(-x / p[1]);
            g[0] = e;
            g[1] = p[0] * e * x / (p[1] * p[1]);
            g[2] = 1.0;
          }};
}

Model make_saturation() {
  return {"saturation",
          {"R_eff", "P_eff", "alpha_slope", "beta_dark"},
          [](double x, std::span<const double> p) {
            return p[0] * x / (p[1] + x) + p[2] * x + p[3];
          },
          [](double x, std::span<const double> p, std::span<double> g) {
            const double d = p[1] + x;
            g[0] = x / d;
            g[1] = -p[0] * x / (d * d);
            g[2] = x;
            g[3] = 1.0;
          }};
}

Model make_polarization() {
  return {"polarization",
          {"amplitude", "phi", "offset"},
          [](double x, std::span<const double> p) {
            const double s = std::sin((x + p[1]) * kDeg);
            return p[0] * s * s + p[2];
          },
          [](double x, std::span<const double> p, std::span<double> g) {
            const double u = (x + p[1]) * kDeg;
            const double s = std::sin(u);
            g[0] = s * s;
            g[1] = p[0] * std::sin(2.0 * u) * kDeg;
            g[2] = 1.0;
          }};
}

Model make_power_law(const char* name, const char* coeff, int exponent) {
  return {name,
          {"gamma0", coeff},
          [exponent](double x, std::span<const double> p) {
            return p[0] + p[1] * std::pow(x, exponent);
          },
          [exponent](double x, std::span<const double>, std::span<double> g) {
            g[0] = 1.0;
            g[1] = std::pow(x, exponent);
          }};
}

// Mean of e^{-t/tau} over [a, b] (a >= 0) and its derivative in tau.
std::pair<double, double> exp_mean(double a, double b, double tau) {
  const double ea = std::exp(-a / tau), eb = std::exp(-b / tau);
  const double d = b - a;
  if (d <= 1e-12 * std::max(b, 1.0)) return {ea, ea * a / (tau * tau)};
  return {tau * (ea - eb) / d, ((ea - eb) + (a * ea - b * eb) / tau) / d};
}

// Three-level g2 averaged over histogram bins; x is the bin index and
// bins[i] the |tau| range (ns) the bin covers.
Model make_g2_binned(std::vector<std::pair<double, double>> bins) {
  auto shared = std::make_shared<const std::vector<std::pair<double, double>>>(std::move(bins));
  return {"g2_three_level",
          {"tau1", "tau2", "alpha"},
          [shared](double x, std::span<const double> p) {
            const auto [a, b] = (*shared)[static_cast<std::size_t>(x)];
            return 1.0 - (1.0 + p[2]) * exp_mean(a, b, p[0]).first + p[2] * exp_mean(a, b, p[1]).first;
          },
          [shared](double x, std::span<const double> p, std::span<double> g) {
            const auto [a, b] = (*shared)[static_cast<std::size_t>(x)];
            const auto [m1, d1] = exp_mean(a, b, p[0]);
            const auto [m2, d2] = exp_mean(a, b, p[1]);
            g[0] = -(1.0 + p[2]) * d1;
            g[1] = p[2] * d2;
            g[2] = m2 - m1;
          }};
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

// Refits with sigmas from the model expectation (var = model * scale) so
// low-count bins do not bias the estimate.
FitResult refit_poisson(const Model& model, std::vector<DataPoint>& data,
                        const std::vector<double>& scale, FitResult fit, const Bounds& bounds,
                        const FitOptions& options, int passes) {
  for (int pass = 0; pass < passes; ++pass) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double mu = std::max(model.value(data[i].x, fit.params), 0.0);
      // Expected counts mu/scale, floored at one count.
      const double counts = std::max(mu / scale[i], 1.0);
      data[i].sigma = std::sqrt(counts) * scale[i];
    }
    fit = fit_curve(model, data, fit.params, bounds, options);
  }
  return fit;
}

}  // namespace

const Model& builtin_model(ModelId id) {
  static const std::array<Model, 7> models = {
      make_line(),
      make_g2(),
      make_exp_decay(),
      make_saturation(),
      make_polarization(),
      make_power_law("linewidth_t3", "cubic_coeff", 3),
      make_power_law("linewidth_t5", "quintic_coeff", 5),
  };
  return models.at(static_cast<std::size_t>(id));
}

// ---------------------------------------------------------------------------

G2Fit fit_g2(const Histogram& hist, std::optional<G2Params> init, const FitOptions& options) {
  if (!hist.normalization) throw InvalidInput("fit_g2 needs a normalized histogram");
  if (hist.size() < 4) throw InvalidInput("fit_g2 needs at least 4 bins");
  const bool centred = hist.size() % 2 == 1 && hist.bin_edges_ps.front() < 0.0 &&
                       std::abs(hist.bin_edges_ps.front() + hist.bin_edges_ps.back()) <
                           1e-9 * hist.bin_edges_ps.back();
  const Histogram folded = centred ? fold_symmetric(hist) : hist;

  G2Fit out;
  std::vector<double> scale;
  std::vector<std::pair<double, double>> ranges;
  for (std::size_t i = 0; i < folded.size(); ++i) {
    const double e = folded.normalization->expected[i];
    if (!(e > 0.0)) continue;
    out.data.push_back({1e-3 * std::abs(folded.center_ps(i)), folded.normalized(i), folded.sigma(i)});
    scale.push_back(1.0 / e);
    double lo = 1e-3 * folded.bin_edges_ps[i], hi = 1e-3 * folded.bin_edges_ps[i + 1];
    if (lo < 0.0 && hi > 0.0) {
      // Centre bin of a centred layout; symmetric, so [0, hi] has the same mean.
      hi = std::max(-lo, hi);
      lo = 0.0;
    } else if (hi <= 0.0) {
      std::tie(lo, hi) = std::pair{-hi, -lo};
    }
    ranges.emplace_back(lo, hi);
  }
  if (out.data.size() < 4) throw InvalidInput("fit_g2: too few populated bins");
  std::size_t zero_bin = 0;
  for (std::size_t i = 1; i < out.data.size(); ++i) {
    if (out.data[i].x < out.data[zero_bin].x) zero_bin = i;
  }
  out.g2_zero = out.data[zero_bin].y;
  out.g2_zero_sigma = out.data[zero_bin].sigma;

  const auto min_it = std::min_element(out.data.begin(), out.data.end(),
                                       [](const DataPoint& a, const DataPoint& b) { return a.y < b.y; });
  if (min_it->y > 0.8) throw FitError("no antibunching signature (minimum g2 bin > 0.8)");

  std::vector<double> p0(3);
  if (init) {
    p0 = {init->tau1, init->tau2, std::max(init->alpha_bunching, 0.0)};
  } else {
    // Smoothed copy for the heuristics.
    const std::size_t n = out.data.size();
    std::vector<double> smooth(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t lo = i >= 2 ? i - 2 : 0;
      const std::size_t hi = std::min(n - 1, i + 2);
      double s = 0.0;
      for (std::size_t j = lo; j <= hi; ++j) s += out.data[j].y;
      smooth[i] = s / static_cast<double>(hi - lo + 1);
    }
    const auto peak = static_cast<std::size_t>(std::max_element(smooth.begin(), smooth.end()) -
                                               smooth.begin());
    double alpha0 = std::max(smooth[peak] - 1.0, 0.0);
    const double half = 0.5 * (1.0 + alpha0);
    double tau1 = out.data.size() > 1 ? out.data[1].x - out.data[0].x : 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (smooth[i] >= half) {
        tau1 = std::max(out.data[i].x / std::numbers::ln2, tau1 * 0.5);
        break;
      }
    }
    double tau2 = 100.0 * tau1;
    if (alpha0 > 0.02) {
      for (std::size_t i = peak; i < n; ++i) {
        if (smooth[i] - 1.0 < alpha0 / std::numbers::e) {
          tau2 = std::max(out.data[i].x, 3.0 * tau1);
          break;
        }
      }
    } else {
      alpha0 = 0.01;
    }
    p0 = {tau1, tau2, alpha0};
  }

  const Model model = make_g2_binned(std::move(ranges));
  const Bounds bounds{{1e-6, 1e-6, 0.0}, {kInf, kInf, kInf}};
  FitResult fit;
  std::vector<DataPoint> indexed = out.data;
  for (std::size_t i = 0; i < indexed.size(); ++i) indexed[i].x = static_cast<double>(i);
  std::vector<DataPoint> work = indexed;
  try {
    fit = fit_curve(model, work, p0, bounds, options);
    fit = refit_poisson(model, work, scale, fit, bounds, options, 2);
    if (fit.params[2] <= 1e-9) throw FitError("alpha at its bound");
  } catch (const FitError&) {
    // No resolvable bunching: two-level form with alpha pinned at zero.
    work = indexed;
    const Bounds pinned{{1e-6, p0[1], 0.0}, {kInf, p0[1], 0.0}};
    std::vector<double> start = {p0[0], p0[1], 0.0};
    fit = fit_curve(model, work, start, pinned, options);
    fit = refit_poisson(model, work, scale, fit, pinned, options, 2);
    fit.params[1] = kInf;
    fit.diagnosis = "no bunching resolved; alpha fixed at 0";
  }
  out.params.tau1 = fit.params[0];
  out.params.tau2 = fit.params[1];
  out.params.alpha_bunching = fit.params[2];
  out.params.sigma_tau1 = fit.sigmas[0];
  out.params.sigma_tau2 = fit.sigmas[1];
  out.params.sigma_alpha = fit.sigmas[2];
  if (out.params.tau2 <= out.params.tau1) {
    fit.converged = false;
    fit.diagnosis = "fitted tau2 does not exceed tau1";
  }
  out.fit = std::move(fit);
  return out;
}

// ---------------------------------------------------------------------------

LifetimeFit fit_lifetime(const Histogram& hist, const FitOptions& options) {
  const std::size_t n = hist.size();
  if (n < 12) throw InvalidInput("fit_lifetime needs at least 12 bins");
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<double>(hist.counts[i]);

  const std::size_t tail = std::max<std::size_t>(n / 10, 3);
  const double baseline0 =
      median(std::vector<double>(y.end() - static_cast<std::ptrdiff_t>(tail), y.end()));
  const auto peak = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
  const std::size_t first = peak + 1;

  LifetimeFit out;
  out.fit.model = "exp_decay";
  out.fit.names = builtin_model(ModelId::kExpDecay).parameters;
  out.fit.params.assign(3, 0.0);
  out.fit.sigmas.assign(3, 0.0);
  out.fit.covariance = Eigen::MatrixXd::Zero(3, 3);

  const double noise = 3.0 * std::sqrt(std::max(baseline0, 1.0));
  std::size_t above = 0;
  for (std::size_t i = first; i < n; ++i) {
    if (y[i] > baseline0 + noise) ++above;
  }
  if (first >= n || above < 10) {
    out.fit.converged = false;
    out.fit.diagnosis = "non-decaying data: fewer than 10 bins above baseline after the peak";
    return out;
  }

  const double t_ref = 1e-3 * hist.center_ps(first);
  std::vector<DataPoint> data;
  std::vector<double> scale;
  for (std::size_t i = first; i < n; ++i) {
    data.push_back({1e-3 * hist.center_ps(i) - t_ref, y[i], std::sqrt(std::max(y[i], 1.0))});
    scale.push_back(1.0);
  }
  const double amp0 = std::max(y[first] - baseline0, 1.0);
  double tau0 = data.back().x / 4.0;
  for (const auto& d : data) {
    if (d.y - baseline0 < amp0 / std::numbers::e) {
      tau0 = std::max(d.x, 1e-3 * hist.width_ps(first));
      break;
    }
  }

  const Model& model = builtin_model(ModelId::kExpDecay);
  const Bounds bounds{{0.0, 1e-6, 0.0}, {kInf, kInf, kInf}};
  try {
    FitResult fit = fit_curve(model, data, std::vector<double>{amp0, tau0, baseline0}, bounds, options);
    fit = refit_poisson(model, data, scale, fit, bounds, options, 2);
    out.fit = std::move(fit);
  } catch (const FitError& e) {
    out.fit.converged = false;
    out.fit.diagnosis = e.what();
    return out;
  }
  out.model = {out.fit.params[1], out.fit.params[0], out.fit.params[2], t_ref};
  if (!(out.model.amplitude > 0.0)) {
    out.fit.converged = false;
    out.fit.diagnosis = "no decaying component";
  }
  return out;
}

// ---------------------------------------------------------------------------

double SaturationModel::rate(double p_mw) const {
  return R_eff() * p_mw / (P_eff() + p_mw) + alpha_slope * p_mw + beta_dark;
}

SaturationFit fit_saturation(std::span<const SaturationPoint> points, double eta_ex,
                             double eta_col, const FitOptions& options) {
  if (points.size() < 5) throw InvalidInput("saturation fit needs at least 5 powers");
  if (!(eta_ex > 0.0 && eta_ex <= 1.0) || !(eta_col > 0.0 && eta_col <= 1.0)) {
    throw InvalidInput("efficiencies must lie in (0, 1]");
  }
  std::vector<DataPoint> data;
  double p_min = kInf;
  double p_max = 0.0;
  for (const auto& pt : points) {
    if (!(pt.power_mw >= 0.0)) throw InvalidInput("powers must be >= 0");
    data.push_back({pt.power_mw, pt.rate_cps, pt.sigma_cps});
    if (pt.power_mw > 0.0) p_min = std::min(p_min, pt.power_mw);
    p_max = std::max(p_max, pt.power_mw);
  }
  if (!(p_max > 0.0)) throw InvalidInput("saturation fit needs positive powers");

  // For fixed P_eff the model is linear in (R_eff, alpha, beta): scan P_eff.
  struct Candidate {
    double chi2 = kInf;
    double r = 0, pe = 0, a = 0, b = 0;
  } best;
  auto solve_linear = [&](double pe, bool with_emitter) {
    const Eigen::Index k = with_emitter ? 3 : 2;
    Eigen::MatrixXd a(static_cast<Eigen::Index>(data.size()), k);
    Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      const double w = 1.0 / data[i].sigma;
      Eigen::Index c = 0;
      if (with_emitter) a(row, c++) = w * data[i].x / (pe + data[i].x);
      a(row, c++) = w * data[i].x;
      a(row, c++) = w;
      y[row] = w * data[i].y;
    }
    const Eigen::VectorXd sol = a.colPivHouseholderQr().solve(y);
    Candidate c;
    c.chi2 = (a * sol - y).squaredNorm();
    c.pe = pe;
    if (with_emitter) {
      c.r = sol[0];
      c.a = sol[1];
      c.b = sol[2];
    } else {
      c.a = sol[0];
      c.b = sol[1];
    }
    return c;
  };
  const double lo = std::log(p_min / 20.0);
  const double hi = std::log(p_max * 20.0);
  for (int i = 0; i <= 80; ++i) {
    const double pe = std::exp(lo + (hi - lo) * i / 80.0);
    const Candidate c = solve_linear(pe, true);
    if (c.r > 0.0 && c.chi2 < best.chi2) best = c;
  }

  const Model& model = builtin_model(ModelId::kSaturation);
  SaturationFit out;
  out.model.eta_EX = eta_ex;
  out.model.eta_COL = eta_col;

  auto background_only = [&](const std::string& why) {
    const Candidate lin = solve_linear(1.0, false);
    const double pe = best.pe > 0.0 ? best.pe : p_max;
    const Bounds pinned{{0.0, pe, 0.0, 0.0}, {0.0, pe, kInf, kInf}};
    out.fit = fit_curve(model, data,
                        std::vector<double>{0.0, pe, std::max(lin.a, 0.0), std::max(lin.b, 0.0)},
                        pinned, options);
    out.fit.sigmas[1] = std::numeric_limits<double>::quiet_NaN();
    out.fit.diagnosis = why;
  };

  const double y_scale = std::max_element(data.begin(), data.end(), [](auto& a, auto& b) {
                           return std::abs(a.y) < std::abs(b.y);
                         })->y;
  if (!(best.r > 1e-9 * std::abs(y_scale))) {
    background_only("no saturating component; linear background only");
  } else {
    const Bounds bounds{{0.0, 1e-12, 0.0, 0.0}, {kInf, kInf, kInf, kInf}};
    std::vector<double> p0 = {best.r, best.pe, std::max(best.a, 0.0), std::max(best.b, 0.0)};
    try {
      out.fit = fit_curve(model, data, p0, bounds, options);
      if (out.fit.params[0] * p_max / (out.fit.params[1] + p_max) <= 1e-9 * std::abs(y_scale)) {
        background_only("no saturating component; linear background only");
      }
    } catch (const FitError&) {
      background_only("no saturating component; linear background only");
    }
  }

  out.model.R_INF = out.fit.params[0] / eta_col;
  out.model.P_SAT = out.fit.params[1] / eta_ex;
  out.model.alpha_slope = out.fit.params[2];
  out.model.beta_dark = out.fit.params[3];
  out.sigma_R_INF = out.fit.sigmas[0] / eta_col;
  out.sigma_P_SAT = out.fit.sigmas[1] / eta_ex;
  if (out.fit.params[0] > 0.0 && p_max < 0.2 * out.fit.params[1]) {
    out.fit.converged = false;
    out.fit.diagnosis = "all powers in the linear regime (max power < 0.2 P_eff); saturation "
                        "parameters are not constrained";
  }
  return out;
}

// ---------------------------------------------------------------------------

PolarizationResult fit_polarization(std::span<const PolarizationPoint> points,
                                    const FitOptions& options) {
  if (points.size() < 6) throw InvalidInput("polarization fit needs at least 6 angles");
  std::vector<double> folded;
  std::vector<DataPoint> data;
  for (const auto& pt : points) {
    data.push_back({pt.theta_deg, pt.rate_cps, pt.sigma_cps});
    folded.push_back(std::fmod(std::fmod(pt.theta_deg, 180.0) + 180.0, 180.0));
  }
  std::sort(folded.begin(), folded.end());
  double max_gap = folded.front() + 180.0 - folded.back();
  for (std::size_t i = 1; i < folded.size(); ++i) max_gap = std::max(max_gap, folded[i] - folded[i - 1]);
  if (max_gap >= 90.0) {
    throw InvalidInput("polarization angles must cover the half-turn without gaps of 90 deg or more");
  }

  // y = c0 + a cos(2 theta) + b sin(2 theta), weighted.
  Eigen::MatrixXd a(static_cast<Eigen::Index>(data.size()), 3);
  Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double w = 1.0 / data[i].sigma;
    const double u = 2.0 * data[i].x * kDeg;
    a(row, 0) = w;
    a(row, 1) = w * std::cos(u);
    a(row, 2) = w * std::sin(u);
    y[row] = w * data[i].y;
  }
  const Eigen::Vector3d lin = a.colPivHouseholderQr().solve(y);
  const double half_amp = std::hypot(lin[1], lin[2]);

  PolarizationResult out;
  const Model& model = builtin_model(ModelId::kPolarization);
  if (!(half_amp > 1e-9 * std::max(std::abs(lin[0]), 1e-300))) {
    // Flat response: only the offset is identifiable.
    const Bounds pinned{{0.0, 0.0, -kInf}, {0.0, 0.0, kInf}};
    out.fit = fit_curve(model, data, std::vector<double>{0.0, 0.0, lin[0]}, pinned, options);
    out.fit.sigmas[1] = std::numeric_limits<double>::quiet_NaN();
    out.fit.diagnosis = "constant response: emitter orientation unidentifiable";
    out.polarization = {0.0, 0.0, out.fit.params[2], 0.0,
                        std::numeric_limits<double>::quiet_NaN(), false};
    return out;
  }
  const double amp0 = 2.0 * half_amp;
  const double phi0 = 0.5 * std::atan2(lin[2], -lin[1]) / kDeg;
  out.fit = fit_curve(model, data, std::vector<double>{amp0, phi0, lin[0] - half_amp}, {}, options);

  double amp = out.fit.params[0];
  double phi = out.fit.params[1];
  double offset = out.fit.params[2];
  if (amp < 0.0) {
    // A sin^2(u) = A + (-A) sin^2(u + 90 deg)
    offset += amp;
    amp = -amp;
    phi += 90.0;
  }
  phi = std::fmod(std::fmod(phi, 180.0) + 180.0, 180.0);
  if (phi >= 180.0) phi = 0.0;
  out.fit.params = {amp, phi, offset};
  const double max_v = amp + offset;
  const double min_v = offset;
  const double vis = (max_v + min_v) != 0.0 ? (max_v - min_v) / (max_v + min_v) : 0.0;
  out.polarization = {phi, amp, offset, std::clamp(vis, 0.0, 1.0), out.fit.sigmas[1], true};
  return out;
}

// ---------------------------------------------------------------------------

double LinewidthFit::fwhm(double temperature_k) const {
  return gamma0 + coeff * std::pow(temperature_k, exponent);
}

LinewidthFit fit_linewidth(std::span<const LinewidthPoint> points, int exponent,
                           const FitOptions& options) {
  if (exponent != 3 && exponent != 5) throw InvalidInput("linewidth exponent must be 3 or 5");
  if (points.size() < 3) throw InvalidInput("linewidth fit needs at least 3 temperatures");
  std::vector<DataPoint> data;
  for (const auto& pt : points) {
    if (!(pt.temperature_k > 0.0)) throw InvalidInput("temperatures must be > 0");
    if (!(pt.fwhm_nm > 0.0)) throw InvalidInput("linewidths must be > 0");
    data.push_back({pt.temperature_k, pt.fwhm_nm, pt.sigma_nm});
  }
  const Model& model = builtin_model(exponent == 3 ? ModelId::kLinewidthT3 : ModelId::kLinewidthT5);
  // Linear in the parameters: start from the weighted least-squares solution.
  Eigen::MatrixXd a(static_cast<Eigen::Index>(data.size()), 2);
  Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    a(row, 0) = 1.0 / data[i].sigma;
    a(row, 1) = std::pow(data[i].x, exponent) / data[i].sigma;
    y[row] = data[i].y / data[i].sigma;
  }
  const Eigen::Vector2d lin = a.colPivHouseholderQr().solve(y);
  const Bounds bounds{{0.0, -kInf}, {kInf, kInf}};
  LinewidthFit out;
  out.exponent = exponent;
  out.fit = fit_curve(model, data, std::vector<double>{std::max(lin[0], 0.0), lin[1]}, bounds, options);
  out.gamma0 = out.fit.params[0];
  out.coeff = out.fit.params[1];
  if (out.coeff < 0.0) {
    out.fit.converged = false;
    out.fit.diagnosis = "negative temperature coefficient: linewidth does not broaden with T";
  }
  return out;
}

}  // namespace spekit
