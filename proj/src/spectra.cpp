#include "spekit/spectra.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "spekit/errors.hpp"

namespace spekit {
namespace {

constexpr double kPi = std::numbers::pi;
const double kGaussSigmaPerFwhm = 1.0 / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
constexpr double kInf = std::numeric_limits<double>::infinity();

double lorentzian(double x, double c, double fwhm, double area) {
  const double g = 0.5 * fwhm;
  const double d = x - c;
  return area / kPi * g / (d * d + g * g);
}

double gaussian(double x, double c, double fwhm, double area) {
  const double s = fwhm * kGaussSigmaPerFwhm;
  const double d = x - c;
  return area / (s * std::sqrt(2.0 * kPi)) * std::exp(-0.5 * d * d / (s * s));
}

// d/d(center, fwhm, area)
void peak_gradient(PeakShape shape, double x, double c, double fwhm, double area, double* g) {
  const double d = x - c;
  if (shape == PeakShape::kLorentzian) {
    const double h = 0.5 * fwhm;
    const double q = d * d + h * h;
    g[0] = area / kPi * h * 2.0 * d / (q * q);
    g[1] = 0.5 * area / kPi * (d * d - h * h) / (q * q);
    g[2] = h / (kPi * q);
  } else {
    const double s = fwhm * kGaussSigmaPerFwhm;
    const double v = gaussian(x, c, fwhm, area);
    g[0] = v * d / (s * s);
    g[1] = v * (d * d / (s * s * s) - 1.0 / s) * kGaussSigmaPerFwhm;
    g[2] = area != 0.0 ? v / area : 1.0 / (s * std::sqrt(2.0 * kPi)) * std::exp(-0.5 * d * d / (s * s));
  }
}

bool excluded(double x, const std::vector<WavelengthWindow>& windows) {
  return std::any_of(windows.begin(), windows.end(),
                     [x](const WavelengthWindow& w) { return x >= w.lo_nm && x <= w.hi_nm; });
}

double circular_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), 180.0);
  return d > 90.0 ? 180.0 - d : d;
}

double wrap180(double a) {
  double r = std::fmod(a, 180.0);
  if (r < 0.0) r += 180.0;
  return r >= 180.0 ? 0.0 : r;
}

double circular_mean(const std::vector<double>& angles, const std::vector<int>& assign, int k) {
  double s = 0.0;
  double c = 0.0;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    if (assign[i] != k) continue;
    s += std::sin(2.0 * angles[i] * kPi / 180.0);
    c += std::cos(2.0 * angles[i] * kPi / 180.0);
  }
  return wrap180(0.5 * std::atan2(s, c) * 180.0 / kPi);
}

}  // namespace

void Spectrum::validate() const {
  if (samples.size() < 3) throw InvalidInput("spectrum needs at least 3 samples");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i].wavelength_nm) || !std::isfinite(samples[i].counts)) {
      throw InvalidInput("spectrum samples must be finite");
    }
    if (i > 0 && !(samples[i].wavelength_nm > samples[i - 1].wavelength_nm)) {
      throw InvalidInput("spectrum wavelengths must be strictly increasing");
    }
  }
}

double PeakModel::evaluate(double wavelength_nm) const {
  return shape == PeakShape::kLorentzian ? lorentzian(wavelength_nm, center, fwhm, area)
                                         : gaussian(wavelength_nm, center, fwhm, area);
}

double PeakModel::peak_height() const { return evaluate(center); }

double PeakFit::evaluate(double wavelength_nm) const {
  double v = baseline_offset + baseline_slope * (wavelength_nm - baseline_ref_nm);
  for (const auto& p : peaks) v += p.evaluate(wavelength_nm);
  return v;
}

PeakFit fit_peaks(const Spectrum& spectrum, const PeakFitOptions& options) {
  spectrum.validate();
  const std::size_t npk = options.n_peaks;
  if (npk == 0) throw InvalidInput("n_peaks must be >= 1");
  std::vector<PeakShape> shapes = options.shapes;
  if (shapes.empty()) shapes.assign(npk, PeakShape::kLorentzian);
  if (shapes.size() == 1) shapes.assign(npk, shapes.front());
  if (shapes.size() != npk) throw InvalidInput("shapes must have one entry per peak");
  if (!options.sigmas.empty() && options.sigmas.size() != spectrum.samples.size()) {
    throw InvalidInput("sigmas must have one entry per spectrum sample");
  }

  std::vector<DataPoint> data;
  for (std::size_t i = 0; i < spectrum.samples.size(); ++i) {
    const auto& s = spectrum.samples[i];
    if (excluded(s.wavelength_nm, options.exclusion_windows)) continue;
    const double sigma =
        options.sigmas.empty() ? std::sqrt(std::max(s.counts, 1.0)) : options.sigmas[i];
    data.push_back({s.wavelength_nm, s.counts, sigma});
  }
  if (data.size() < 3 * npk + 2) throw InvalidInput("too few samples left after exclusion");
  const double x_lo = data.front().x;
  const double x_hi = data.back().x;
  const double ref = 0.5 * (x_lo + x_hi);
  const double spacing = (x_hi - x_lo) / static_cast<double>(data.size() - 1);

  // Starting values.
  const std::size_t edge = std::max<std::size_t>(data.size() / 20, 2);
  auto median_of = [&](std::size_t b, std::size_t e) {
    std::vector<double> v;
    for (std::size_t i = b; i < e; ++i) v.push_back(data[i].y);
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
    return v[v.size() / 2];
  };
  const double y_left = median_of(0, edge);
  const double y_right = median_of(data.size() - edge, data.size());
  const double x_left = data[edge / 2].x;
  const double x_right = data[data.size() - 1 - edge / 2].x;
  double b1 = (y_right - y_left) / (x_right - x_left);
  double b0 = y_left + b1 * (ref - x_left);

  std::vector<PeakModel> init = options.initial;
  if (!init.empty()) {
    if (init.size() != npk) throw InvalidInput("initial peaks must match n_peaks");
    for (std::size_t k = 0; k < npk; ++k) init[k].shape = shapes[k];
  } else {
    std::vector<double> resid(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) resid[i] = data[i].y - (b0 + b1 * (data[i].x - ref));
    std::vector<bool> masked(data.size(), false);
    for (std::size_t k = 0; k < npk; ++k) {
      std::size_t best = data.size();
      for (std::size_t i = 0; i < data.size(); ++i) {
        if (masked[i]) continue;
        if (best == data.size() || resid[i] > resid[best]) best = i;
      }
      if (best == data.size() || !(resid[best] > 0.0)) {
        throw InvalidInput("could not locate " + std::to_string(npk) + " peaks; use fewer peaks");
      }
      const double h = resid[best];
      auto crossing = [&](int dir) {
        std::ptrdiff_t i = static_cast<std::ptrdiff_t>(best);
        while (true) {
          const std::ptrdiff_t j = i + dir;
          if (j < 0 || j >= static_cast<std::ptrdiff_t>(data.size())) return data[static_cast<std::size_t>(i)].x;
          if (resid[static_cast<std::size_t>(j)] < 0.5 * h) {
            // Linear interpolation to the half-height point.
            const double y0 = resid[static_cast<std::size_t>(i)];
            const double y1 = resid[static_cast<std::size_t>(j)];
            const double f = (y0 - 0.5 * h) / (y0 - y1);
            return data[static_cast<std::size_t>(i)].x +
                   f * (data[static_cast<std::size_t>(j)].x - data[static_cast<std::size_t>(i)].x);
          }
          i = j;
        }
      };
      const double fwhm = std::max(crossing(1) - crossing(-1), 2.0 * spacing);
      PeakModel pk;
      pk.shape = shapes[k];
      pk.center = data[best].x;
      pk.fwhm = fwhm;
      pk.area = pk.shape == PeakShape::kLorentzian
                    ? h * kPi * fwhm / 2.0
                    : h * fwhm * kGaussSigmaPerFwhm * std::sqrt(2.0 * kPi);
      for (std::size_t i = 0; i < data.size(); ++i) {
        resid[i] -= pk.evaluate(data[i].x);
        if (std::abs(data[i].x - pk.center) <= std::max(fwhm, 1.5 * spacing)) masked[i] = true;
      }
      init.push_back(pk);
    }
  }

  for (std::size_t a = 0; a < npk; ++a) {
    if (excluded(init[a].center, options.exclusion_windows)) {
      std::ostringstream os;
      os << "starting peak at " << init[a].center << " nm lies inside an exclusion window";
      throw InvalidInput(os.str());
    }
    for (std::size_t b = a + 1; b < npk; ++b) {
      const double w = std::max(init[a].fwhm, init[b].fwhm);
      if (std::abs(init[a].center - init[b].center) < 0.25 * w) {
        throw InvalidInput("peaks closer than fwhm/4 are unresolvable; use fewer peaks");
      }
    }
  }

  Model model;
  model.name = "peaks";
  model.parameters = {"baseline_offset", "baseline_slope"};
  for (std::size_t k = 0; k < npk; ++k) {
    const std::string s = std::to_string(k);
    model.parameters.push_back("center" + s);
    model.parameters.push_back("fwhm" + s);
    model.parameters.push_back("area" + s);
  }
  model.value = [shapes, ref](double x, std::span<const double> p) {
    double v = p[0] + p[1] * (x - ref);
    for (std::size_t k = 0; k < shapes.size(); ++k) {
      const double* q = &p[2 + 3 * k];
      v += shapes[k] == PeakShape::kLorentzian ? lorentzian(x, q[0], q[1], q[2])
                                               : gaussian(x, q[0], q[1], q[2]);
    }
    return v;
  };
  model.gradient = [shapes, ref](double x, std::span<const double> p, std::span<double> g) {
    g[0] = 1.0;
    g[1] = x - ref;
    for (std::size_t k = 0; k < shapes.size(); ++k) {
      peak_gradient(shapes[k], x, p[2 + 3 * k], p[3 + 3 * k], p[4 + 3 * k], &g[2 + 3 * k]);
    }
  };

  std::vector<double> p0 = {b0, b1};
  Bounds bounds{{-kInf, -kInf}, {kInf, kInf}};
  for (const auto& pk : init) {
    p0.insert(p0.end(), {pk.center, pk.fwhm, std::max(pk.area, 0.0)});
    bounds.lower.insert(bounds.lower.end(), {x_lo, 1e-9, 0.0});
    bounds.upper.insert(bounds.upper.end(), {x_hi, kInf, kInf});
  }
  for (std::size_t k = 0; k < p0.size(); ++k) p0[k] = std::clamp(p0[k], bounds.lower[k], bounds.upper[k]);

  PeakFit out;
  out.fit = fit_curve(model, data, p0, bounds, options.fit);
  out.baseline_offset = out.fit.params[0];
  out.baseline_slope = out.fit.params[1];
  out.baseline_ref_nm = ref;
  for (std::size_t k = 0; k < npk; ++k) {
    out.peaks.push_back({shapes[k], out.fit.params[2 + 3 * k], out.fit.params[3 + 3 * k],
                         out.fit.params[4 + 3 * k]});
  }
  std::sort(out.peaks.begin(), out.peaks.end(),
            [](const PeakModel& a, const PeakModel& b) { return a.center < b.center; });
  return out;
}

SpectralDecomposition debye_waller(const PeakModel& zpl, const std::vector<PeakModel>& psb) {
  if (psb.empty()) throw InvalidInput("Debye-Waller factor needs at least one sideband peak");
  SpectralDecomposition d;
  d.zpl = zpl;
  d.psb = psb;
  d.I_ZPL = std::max(zpl.area, 0.0);
  for (const auto& p : psb) d.I_PSB += std::max(p.area, 0.0);
  d.I_TOT = d.I_ZPL + d.I_PSB;
  if (!(d.I_TOT > 0.0)) throw InvalidInput("Debye-Waller factor undefined: zero total area");
  d.dwf = d.I_ZPL / d.I_TOT;
  return d;
}

SpectralDecomposition debye_waller(const PeakFit& fit) {
  if (fit.peaks.size() < 2) throw InvalidInput("Debye-Waller factor needs a ZPL and a sideband peak");
  const auto zpl = std::min_element(fit.peaks.begin(), fit.peaks.end(),
                                    [](const PeakModel& a, const PeakModel& b) { return a.fwhm < b.fwhm; });
  std::vector<PeakModel> psb;
  for (auto it = fit.peaks.begin(); it != fit.peaks.end(); ++it) {
    if (it != zpl) psb.push_back(*it);
  }
  return debye_waller(*zpl, psb);
}

PolarizationClusters classify_polarization(const std::vector<double>& phis_deg,
                                           double tolerance_deg) {
  if (phis_deg.size() < 2) throw InvalidInput("classification needs at least 2 angles");
  if (!(tolerance_deg > 0.0)) throw InvalidInput("tolerance must be > 0");
  std::vector<double> a;
  for (double p : phis_deg) {
    if (!std::isfinite(p)) throw InvalidInput("angles must be finite");
    a.push_back(wrap180(p));
  }
  const std::size_t n = a.size();

  PolarizationClusters out;
  double spread = 0.0;
  for (std::size_t i = 1; i < n; ++i) spread = std::max(spread, circular_distance(a[0], a[i]));
  if (spread < 1e-12) {
    out.centers = {a[0]};
    out.assignment.assign(n, 0);
    out.outlier.assign(n, false);
    out.degenerate = true;
    out.warning = "all angles identical: single polarization state";
    return out;
  }

  double best_inertia = kInf;
  std::vector<int> best_assign;
  std::array<double, 2> best_centers{};
  for (std::size_t seed = 0; seed < n; ++seed) {
    std::size_t far = seed;
    for (std::size_t i = 0; i < n; ++i) {
      if (circular_distance(a[seed], a[i]) > circular_distance(a[seed], a[far])) far = i;
    }
    std::array<double, 2> c = {a[seed], a[far]};
    std::vector<int> assign(n, -1);
    bool ok = true;
    for (int iter = 0; iter < 100; ++iter) {
      bool changed = false;
      for (std::size_t i = 0; i < n; ++i) {
        const int k = circular_distance(a[i], c[1]) < circular_distance(a[i], c[0]) ? 1 : 0;
        if (k != assign[i]) {
          assign[i] = k;
          changed = true;
        }
      }
      if (std::count(assign.begin(), assign.end(), 0) == 0 ||
          std::count(assign.begin(), assign.end(), 1) == 0) {
        ok = false;
        break;
      }
      c = {circular_mean(a, assign, 0), circular_mean(a, assign, 1)};
      if (!changed) break;
    }
    if (!ok) continue;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = circular_distance(a[i], c[static_cast<std::size_t>(assign[i])]);
      inertia += d * d;
    }
    if (inertia < best_inertia - 1e-12) {
      best_inertia = inertia;
      best_assign = assign;
      best_centers = c;
    }
  }

  if (best_centers[1] < best_centers[0]) {
    std::swap(best_centers[0], best_centers[1]);
    for (int& k : best_assign) k = 1 - k;
  }
  out.centers = {best_centers[0], best_centers[1]};
  out.assignment = best_assign;
  out.separation = circular_distance(best_centers[0], best_centers[1]);
  out.orthogonal = std::abs(out.separation - 90.0) <= tolerance_deg;
  bool any_outlier = false;
  for (std::size_t i = 0; i < n; ++i) {
    const bool far = circular_distance(a[i], best_centers[0]) > tolerance_deg &&
                     circular_distance(a[i], best_centers[1]) > tolerance_deg;
    out.outlier.push_back(far);
    any_outlier = any_outlier || far;
  }
  out.two_state = out.orthogonal && !any_outlier;
  if (!out.two_state) {
    std::ostringstream os;
    os << "two orthogonal states rejected (center separation " << out.separation << " deg";
    if (any_outlier) os << ", angles outside tolerance of both centers";
    os << "); possible three-state emitter";
    out.warning = os.str();
  }
  return out;
}

}  // namespace spekit
