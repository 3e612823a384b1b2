#pragma once

// Damped least-squares engine and the photophysics model library.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "spekit/correlate.hpp"
#include "spekit/kinetics.hpp"

namespace spekit {

struct DataPoint {
  double x = 0.0;
  double y = 0.0;
  double sigma = 1.0;
};

/// A scalar model y = f(x; p). `gradient`, when present, fills df/dp.
struct Model {
  std::string name;
  std::vector<std::string> parameters;
  std::function<double(double, std::span<const double>)> value;
  std::function<void(double, std::span<const double>, std::span<double>)> gradient;
};

/// Box constraints. Empty vectors mean unbounded; lower == upper fixes a
/// parameter (it is then excluded from the covariance, sigma 0).
struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;
};

struct FitOptions {
  double gradient_tolerance = 1e-10;  ///< max_j |J_j . r| / (|J_j| |r|)
  double step_tolerance = 1e-12;      ///< relative parameter step
  int max_iterations = 500;
  /// Treat sigmas as absolute; otherwise scale the covariance by chi2/dof.
  bool absolute_sigma = false;
};

struct FitResult {
  std::string model;
  std::vector<std::string> names;
  std::vector<double> params;
  std::vector<double> sigmas;
  Eigen::MatrixXd covariance;
  double residual_norm = 0.0;  ///< sqrt(sum of squared weighted residuals)
  double chi_square = 0.0;
  std::size_t dof = 0;
  double gradient_norm = 0.0;  ///< scaled (cosine) gradient at the solution
  bool converged = false;
  int iterations = 0;
  std::string diagnosis;  ///< empty on clean convergence

  /// Parameter value by name; throws InvalidInput for unknown names.
  double value(const std::string& name) const;
  double sigma(const std::string& name) const;
  std::size_t index(const std::string& name) const;
};

/// Levenberg-Marquardt with Marquardt diagonal scaling and projected box
/// constraints. Deterministic: identical inputs give bit-identical results.
/// Throws FitError (naming the parameters) when the Jacobian is singular at
/// the solution and InvalidInput for malformed data or init.
FitResult fit_curve(const Model& model, std::span<const DataPoint> data,
                    std::span<const double> init, const Bounds& bounds = {},
                    const FitOptions& options = {});

enum class ModelId {
  kLine,           ///< intercept + slope x
  kG2,             ///< 1 - (1+alpha) e^{-|x|/tau1} + alpha e^{-|x|/tau2}
  kExpDecay,       ///< amplitude e^{-x/tau} + baseline
  kSaturation,     ///< R_eff x/(P_eff + x) + alpha_slope x + beta_dark
  kPolarization,   ///< amplitude sin^2((x + phi) deg) + offset
  kLinewidthT3,    ///< gamma0 + cubic_coeff x^3
  kLinewidthT5,    ///< gamma0 + quintic_coeff x^5
};

const Model& builtin_model(ModelId id);

FitResult fit_curve(ModelId id, std::span<const DataPoint> data, std::span<const double> init,
                    const Bounds& bounds = {}, const FitOptions& options = {});

/// Noise-free model values at the given abscissae.
std::vector<double> evaluate_model(const Model& model, std::span<const double> params,
                                   std::span<const double> x);

// ---------------------------------------------------------------------------
// g2(tau)

struct G2Fit {
  FitResult fit;
  G2Params params;
  double g2_zero = 0.0;  ///< measured value of the bin containing tau = 0
  double g2_zero_sigma = 0.0;
  std::vector<DataPoint> data;  ///< folded |tau| (ns) points that were fitted
};

/// Fits the three-level g2 form to a normalized histogram. Tau-centred
/// histograms are folded onto |tau| first. Throws FitError with "no
/// antibunching signature" when no bin drops below 0.8.
G2Fit fit_g2(const Histogram& hist, std::optional<G2Params> init = std::nullopt,
             const FitOptions& options = {});

// ---------------------------------------------------------------------------
// Pulsed lifetime

struct DecayModel {
  double tau = 0.0;        ///< ns
  double amplitude = 0.0;  ///< counts per bin at the first fitted bin
  double baseline = 0.0;   ///< counts per bin
  double t_ref_ns = 0.0;   ///< time origin of the exponential
};

struct LifetimeFit {
  FitResult fit;
  DecayModel model;
};

/// Single-exponential fit from the peak bin onward; the baseline starts from
/// the bins just before the next pulse. Non-decaying data come back with
/// converged = false and a diagnosis.
LifetimeFit fit_lifetime(const Histogram& hist, const FitOptions& options = {});

// ---------------------------------------------------------------------------
// Saturation

struct SaturationModel {
  double R_INF = 0.0;        ///< cps
  double P_SAT = 0.0;        ///< mW
  double eta_EX = 1.0;
  double eta_COL = 1.0;
  double alpha_slope = 0.0;  ///< cps/mW
  double beta_dark = 0.0;    ///< cps

  double R_eff() const { return eta_COL * R_INF; }
  double P_eff() const { return eta_EX * P_SAT; }
  /// Detected rate (cps) at optical power p (mW).
  double rate(double p_mw) const;
};

struct SaturationPoint {
  double power_mw = 0.0;
  double rate_cps = 0.0;
  double sigma_cps = 1.0;
};

struct SaturationFit {
  FitResult fit;  ///< parameters R_eff, P_eff, alpha_slope, beta_dark
  SaturationModel model;
  double sigma_R_INF = 0.0;
  double sigma_P_SAT = 0.0;
};

/// The efficiencies only rescale R_INF and P_SAT, so they are held at the
/// given constants and the fit reports the effective products.
SaturationFit fit_saturation(std::span<const SaturationPoint> points, double eta_ex = 1.0,
                             double eta_col = 1.0, const FitOptions& options = {});

// ---------------------------------------------------------------------------
// Excitation polarization

struct PolarizationFit {
  double phi = 0.0;        ///< degrees, [0, 180)
  double amplitude = 0.0;  ///< cps
  double offset = 0.0;     ///< cps
  double visibility = 0.0;
  double sigma_phi = 0.0;
  bool identifiable = true;
};

struct PolarizationPoint {
  double theta_deg = 0.0;
  double rate_cps = 0.0;
  double sigma_cps = 1.0;
};

struct PolarizationResult {
  FitResult fit;
  PolarizationFit polarization;
};

PolarizationResult fit_polarization(std::span<const PolarizationPoint> points,
                                    const FitOptions& options = {});

// ---------------------------------------------------------------------------
// Zero-phonon linewidth versus temperature

struct LinewidthPoint {
  double temperature_k = 0.0;
  double fwhm_nm = 0.0;
  double sigma_nm = 1.0;
};

struct LinewidthFit {
  FitResult fit;
  int exponent = 3;
  double gamma0 = 0.0;  ///< nm
  double coeff = 0.0;   ///< nm / K^exponent

  double fwhm(double temperature_k) const;
};

/// fwhm(T) = gamma0 + coeff T^exponent with gamma0 >= 0 (exponent 3 or 5).
/// A negative coefficient is reported as converged = false.
LinewidthFit fit_linewidth(std::span<const LinewidthPoint> points, int exponent = 3,
                           const FitOptions& options = {});

}  // namespace spekit
