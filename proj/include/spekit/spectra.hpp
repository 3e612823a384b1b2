#pragma once

// PL spectrum decomposition: zero-phonon line, phonon sideband, Debye-Waller
// factor, and clustering of emitter polarization angles.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spekit/fitters.hpp"

namespace spekit {

struct SpectrumSample {
  double wavelength_nm = 0.0;
  double counts = 0.0;
};

struct Spectrum {
  std::vector<SpectrumSample> samples;  ///< strictly increasing wavelength
  std::optional<double> temperature_k;

  void validate() const;
};

enum class PeakShape { kLorentzian, kGaussian };

struct PeakModel {
  PeakShape shape = PeakShape::kLorentzian;
  double center = 0.0;  ///< nm
  double fwhm = 0.0;    ///< nm
  double area = 0.0;    ///< counts nm

  double evaluate(double wavelength_nm) const;
  double peak_height() const;
};

struct WavelengthWindow {
  double lo_nm = 0.0;
  double hi_nm = 0.0;
};

/// Second-order Raman bands of the host (room-temperature background).
inline const std::vector<WavelengthWindow> kDefaultRamanExclusion = {{578.0, 592.0}};

struct PeakFitOptions {
  std::size_t n_peaks = 1;
  /// One shape per peak, or a single shape for all; Lorentzian by default.
  std::vector<PeakShape> shapes;
  std::vector<WavelengthWindow> exclusion_windows = kDefaultRamanExclusion;
  /// Optional explicit starting peaks (overrides the automatic search).
  std::vector<PeakModel> initial;
  /// Per-sample sigmas; Poisson sqrt(max(counts, 1)) when empty.
  std::vector<double> sigmas;
  FitOptions fit;
};

struct PeakFit {
  std::vector<PeakModel> peaks;  ///< sorted by center
  double baseline_offset = 0.0;  ///< counts at baseline_ref_nm
  double baseline_slope = 0.0;   ///< counts / nm
  double baseline_ref_nm = 0.0;
  FitResult fit;

  double evaluate(double wavelength_nm) const;
};

/// Simultaneous multi-peak fit with a linear baseline, after removing the
/// exclusion windows. Throws InvalidInput when starting peaks sit closer than
/// fwhm/4 or fall inside an exclusion window.
PeakFit fit_peaks(const Spectrum& spectrum, const PeakFitOptions& options);

struct SpectralDecomposition {
  PeakModel zpl;
  std::vector<PeakModel> psb;
  double I_ZPL = 0.0;
  double I_PSB = 0.0;
  double I_TOT = 0.0;
  double dwf = 0.0;
};

/// dwf = I_ZPL / (I_ZPL + sum of PSB areas), areas from the analytic peak
/// integrals.
SpectralDecomposition debye_waller(const PeakModel& zpl, const std::vector<PeakModel>& psb);

/// Uses the narrowest fitted peak as the ZPL and the rest as sideband.
SpectralDecomposition debye_waller(const PeakFit& fit);

struct PolarizationClusters {
  std::vector<double> centers;        ///< degrees in [0, 180); 1 or 2 entries
  std::vector<int> assignment;        ///< cluster index per input angle
  std::vector<bool> outlier;          ///< farther than tolerance from every center
  double separation = 0.0;            ///< circular distance between centers (deg)
  bool degenerate = false;            ///< all angles identical: single cluster
  bool orthogonal = false;            ///< |separation - 90| <= tolerance
  bool two_state = false;             ///< orthogonal and no outliers
  std::string warning;
};

/// Two-means clustering on the half-circle (period 180 deg).
PolarizationClusters classify_polarization(const std::vector<double>& phis_deg,
                                           double tolerance_deg);

}  // namespace spekit
