#include "spekit/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <utility>

#include "json_io.hpp"
#include "spekit/errors.hpp"
#include "spekit/io.hpp"
#include "spekit/kinetics.hpp"
#include "spekit/spectra.hpp"

namespace spekit {
namespace fs = std::filesystem;
using json_io::json;
using json_io::number;

namespace {

constexpr std::array<std::pair<Command, std::string_view>, 8> kCommands{{
    {Command::kSimulate, "simulate"},
    {Command::kG2, "g2"},
    {Command::kLifetime, "lifetime"},
    {Command::kSaturation, "saturation"},
    {Command::kPolarization, "polarization"},
    {Command::kSpectrum, "spectrum"},
    {Command::kLinewidth, "linewidth"},
    {Command::kReproduceFig2, "reproduce-fig2"},
}};

// Seed families for the pipeline stages.
constexpr std::uint64_t kSeedSim = 0x51;
constexpr std::uint64_t kSeedDetector = 0x52;
constexpr std::uint64_t kSeedSplit = 0x53;
constexpr std::uint64_t kSeedPulsed = 0x54;
constexpr std::uint64_t kSeedNoise = 0x55;

template <typename E>
[[noreturn]] void rethrow_prefixed(const char* stage, const E& e) {
  throw E(std::string(stage) + ": " + e.what());
}

// Runs f, re-raising library errors with the stage name prepended.
template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const InvalidInput& e) {
    rethrow_prefixed(name, e);
  } catch (const ModelError& e) {
    rethrow_prefixed(name, e);
  } catch (const FitError& e) {
    rethrow_prefixed(name, e);
  } catch (const FormatError& e) {
    rethrow_prefixed(name, e);
  } catch (const IoError& e) {
    rethrow_prefixed(name, e);
  } catch (const ConfigError& e) {
    rethrow_prefixed(name, e);
  }
}

class Writer {
 public:
  explicit Writer(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory '" + dir_.string() + "': " + ec.message());
  }

  fs::path path(const std::string& name) {
    files_.push_back(dir_ / name);
    return files_.back();
  }

  void json_file(const std::string& name, const json& j) {
    auto p = path(name);
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed on '" + p.string() + "'");
  }

  std::vector<fs::path> files() const { return files_; }

 private:
  fs::path dir_;
  std::vector<fs::path> files_;
};

json rates_json(const ThreeLevelRates& r) {
  return json{{"gamma_ge_per_ns", r.gamma_ge},
              {"gamma_eg_per_ns", r.gamma_eg},
              {"gamma_em_per_ns", r.gamma_em},
              {"gamma_mg_per_ns", r.gamma_mg}};
}

ThreeLevelRates cw_rates(const RunConfig& cfg, double power_mw) {
  return rates_at_power(cfg.rates, power_mw, cfg.pump.model);
}

double single_power(const RunConfig& cfg) {
  return cfg.pump.power_mw ? *cfg.pump.power_mw : 0.0;
}

DetectorModel detector_at(const RunConfig& cfg, double power_mw) {
  DetectorModel d = cfg.detector.model;
  d.background_rate += cfg.detector.background_per_mw * power_mw;
  return d;
}

// Dense model curve over [-reach, reach] for plotting.
void write_g2_curve(Writer& w, const std::string& name, const G2Params& p, double reach_ns) {
  constexpr int n = 2001;
  std::vector<double> tau(n), g(n);
  for (int i = 0; i < n; ++i) {
    tau[i] = -reach_ns + 2.0 * reach_ns * i / (n - 1);
    g[i] = p.evaluate(tau[i]);
  }
  write_columns_csv(w.path(name), {"tau_ns", "g2"}, {tau, g});
}

json g2_fit_json(const G2Fit& f) {
  return json{{"fit", json_io::fit_result(f.fit)},
              {"g2_params", json_io::g2_params(f.params)},
              {"g2_zero", number(f.g2_zero)},
              {"g2_zero_sigma", number(f.g2_zero_sigma)},
              {"single_photon", f.g2_zero < 0.5}};
}

Histogram correlate_hbt(const RunConfig& cfg, const std::vector<std::uint64_t>& ch0,
                        const std::vector<std::uint64_t>& ch1, std::optional<double> duration_ns) {
  return stage("correlate", [&] {
    CorrelationConfig cc = cfg.correlation;
    cc.threads = cfg.threads;
    if (duration_ns) cc.duration_ps = *duration_ns * 1e3;
    return g2_histogram(ch0, ch1, cc);
  });
}

double pulsed_photon_rate(const ThreeLevelRates& r, const PulsedConfig& p) {
  // Per pulse: excitation probability times branching to the radiative
  // channel, diluted by the time spent shelved.
  double k = r.gamma_eg + r.gamma_em;
  double p_exc = 1.0 - std::exp(-r.gamma_ge * p.pulse.pulse_width_ns);
  double per_pulse = p_exc * r.gamma_eg / k;
  double shelve = p_exc * r.gamma_em / k;
  double dark = r.gamma_mg > 0.0 ? shelve / r.gamma_mg / p.pulse.period_ns : 0.0;
  return per_pulse / p.pulse.period_ns / (1.0 + dark);
}

double duration_for(const SimulationSettings& s, double photon_rate) {
  if (!s.photons) return s.duration_ns;
  if (!(photon_rate > 0.0)) throw InvalidInput("emission rate is zero; set simulation.duration_ns");
  return *s.photons / photon_rate;
}

std::pair<std::vector<std::uint64_t>, std::vector<std::uint64_t>> hbt_channels(const TimeTags& tags) {
  auto ch = tags.channels();
  if (!ch.count(0) || !ch.count(1)) {
    throw InvalidInput("time tags need events on channels 0 and 1 for a g2 measurement");
  }
  return {std::move(ch[0]), std::move(ch[1])};
}

// ---------------------------------------------------------------------------

json run_simulate(const RunConfig& cfg, Writer& w) {
  double power = single_power(cfg);
  ThreeLevelRates rates = cfg.pump.power_mw ? cw_rates(cfg, power) : cfg.rates;
  double duration = stage("simulate", [&] { return duration_for(cfg.simulation, emission_rate(rates)); });
  SimConfig sc;
  sc.duration_ns = duration;
  sc.seed = derive_seed(cfg.simulation.seed, kSeedSim);
  sc.segments = cfg.simulation.segments;
  sc.threads = cfg.threads;
  auto sim = stage("simulate", [&] { return simulate_emitter(rates, sc); });
  auto detected = stage("detector", [&] {
    return apply_detector(sim.photons, detector_at(cfg, power),
                          derive_seed(cfg.simulation.seed, kSeedDetector), duration);
  });
  auto [a, b] = stage("split", [&] {
    return split_hbt(detected, derive_seed(cfg.simulation.seed, kSeedSplit));
  });
  auto merged = merge_streams(a, b);
  stage("write", [&] { write_timetags(w.path("tags.ptag"), merged, 1); });

  auto pop = steady_state(rates);
  double total = sim.dwell_ns[0] + sim.dwell_ns[1] + sim.dwell_ns[2];
  return json{{"command", "simulate"},
              {"power_mw", power},
              {"rates", rates_json(rates)},
              {"duration_ns", duration},
              {"emitted_photons", sim.photons.size()},
              {"detected_ch0", a.size()},
              {"detected_ch1", b.size()},
              {"excitations", sim.excitations},
              {"shelving_events", sim.shelving_events},
              {"emission_rate_per_ns", sim.photons.size() / duration},
              {"emission_rate_expected_per_ns", emission_rate(rates)},
              {"dwell_fraction", {sim.dwell_ns[0] / total, sim.dwell_ns[1] / total, sim.dwell_ns[2] / total}},
              {"steady_state", {pop.p_g, pop.p_e, pop.p_m}},
              {"tags_file", "tags.ptag"}};
}

json run_g2(const RunConfig& cfg, Writer& w) {
  std::vector<std::uint64_t> ch0, ch1;
  std::optional<double> duration;
  json source;
  if (cfg.input) {
    auto tags = stage("read", [&] { return read_timetags(*cfg.input); });
    std::tie(ch0, ch1) = stage("read", [&] { return hbt_channels(tags); });
    source = {{"input", cfg.input->filename().string()}};
  } else {
    double power = single_power(cfg);
    ThreeLevelRates rates = cfg.pump.power_mw ? cw_rates(cfg, power) : cfg.rates;
    auto m = simulate_hbt(cfg, rates, power, 0);
    ch0 = std::move(m.ch0);
    ch1 = std::move(m.ch1);
    duration = m.duration_ns;
    source = {{"simulated", true},
              {"power_mw", power},
              {"rates", rates_json(rates)},
              {"duration_ns", m.duration_ns},
              {"emitted_photons", m.emitted}};
    try {
      source["kinetics_prediction"] = json_io::g2_params(g2_params_from_rates(rates));
    } catch (const ModelError&) {
      source["kinetics_prediction"] = nullptr;
    }
  }
  Histogram h = correlate_hbt(cfg, ch0, ch1, duration);
  stage("write", [&] { write_histogram_csv(w.path("g2_histogram.csv"), h); });

  json report{{"command", "g2"},
              {"source", source},
              {"events_ch0", ch0.size()},
              {"events_ch1", ch1.size()},
              {"bins", h.size()},
              {"bin_width_ps", cfg.correlation.bin_width_ps},
              {"coincidences", h.total()}};
  // A flat histogram is a valid outcome: report it instead of failing.
  double mean = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) mean += h.normalized(i);
  report["mean_g2"] = number(mean / static_cast<double>(std::max<std::size_t>(h.size(), 1)));
  try {
    G2Fit f = fit_g2(h, std::nullopt, cfg.fit);
    report["result"] = g2_fit_json(f);
    report["antibunched"] = true;
    write_g2_curve(w, "g2_fit_curve.csv", f.params, h.bin_edges_ps.back() * 1e-3);
  } catch (const FitError& e) {
    report["result"] = nullptr;
    report["antibunched"] = false;
    report["fit_error"] = e.what();
  }
  return report;
}

json run_lifetime(const RunConfig& cfg, Writer& w) {
  const auto& pl = cfg.simulation.pulsed;
  std::vector<std::uint64_t> ts;
  json source;
  if (cfg.input) {
    auto tags = stage("read", [&] { return read_timetags(*cfg.input); });
    ts.reserve(tags.records.size());
    for (const auto& r : tags.records) ts.push_back(r.timestamp_ps);
    std::sort(ts.begin(), ts.end());
    source = {{"input", cfg.input->filename().string()}};
  } else {
    ThreeLevelRates rates = cw_rates(cfg, pl.power_mw);
    double duration =
        stage("simulate", [&] { return duration_for(cfg.simulation, pulsed_photon_rate(rates, pl)); });
    SimConfig sc;
    sc.duration_ns = duration;
    sc.seed = derive_seed(cfg.simulation.seed, kSeedPulsed);
    sc.pulsed = pl.pulse;
    sc.segments = cfg.simulation.segments;
    sc.threads = cfg.threads;
    auto sim = stage("simulate", [&] { return simulate_emitter(rates, sc); });
    auto det = stage("detector", [&] {
      return apply_detector(sim.photons, detector_at(cfg, pl.power_mw),
                            derive_seed(cfg.simulation.seed, kSeedDetector, 1), duration);
    });
    ts = channel_timestamps(det, 0);
    source = {{"simulated", true},
              {"pulse_power_mw", pl.power_mw},
              {"rates", rates_json(rates)},
              {"duration_ns", duration},
              {"emitted_photons", sim.photons.size()},
              {"expected_lifetime_ns", 1.0 / (rates.gamma_eg + rates.gamma_em)}};
  }
  CorrelationConfig cc = cfg.correlation;
  Histogram h = stage("correlate", [&] { return decay_histogram(ts, pl.pulse.period_ns, cc); });
  stage("write", [&] { write_histogram_csv(w.path("decay_histogram.csv"), h); });
  LifetimeFit lf = stage("fit", [&] { return fit_lifetime(h, cfg.fit); });

  std::vector<double> t, y;
  double period = pl.pulse.period_ns;
  for (int i = 0; i <= 1000; ++i) {
    double tn = period * i / 1000.0;
    if (tn < lf.model.t_ref_ns) continue;
    t.push_back(tn);
    y.push_back(lf.model.amplitude * std::exp(-(tn - lf.model.t_ref_ns) / lf.model.tau) +
                lf.model.baseline);
  }
  stage("write", [&] { write_columns_csv(w.path("lifetime_fit_curve.csv"), {"t_ns", "counts"}, {t, y}); });
  return json{{"command", "lifetime"},
              {"source", source},
              {"period_ns", period},
              {"events", ts.size()},
              {"fit", json_io::fit_result(lf.fit)},
              {"lifetime_ns", number(lf.model.tau)},
              {"sigma_lifetime_ns", number(lf.fit.sigmas.empty() ? NAN : lf.fit.sigma("tau"))},
              {"baseline_counts", number(lf.model.baseline)}};
}

json run_saturation(const RunConfig& cfg, Writer& w) {
  std::vector<SaturationPoint> pts;
  json source;
  if (cfg.input) {
    pts = stage("read", [&] { return read_saturation_csv(*cfg.input); });
    source = {{"input", cfg.input->filename().string()}};
  } else {
    // Detected rate of the three-level emitter with shot noise for the
    // configured integration time.
    std::mt19937_64 rng(derive_seed(cfg.simulation.seed, kSeedNoise));
    const auto& r = cfg.rates;
    double eff = cfg.detector.model.efficiency * cfg.saturation.eta_col;
    double T = cfg.saturation.integration_s;
    for (double p : cfg.saturation.powers_mw) {
      ThreeLevelRates at = rates_at_power(r, cfg.saturation.eta_ex * p, cfg.pump.model);
      double cps = eff * emission_rate(at) * 1e9 +
                   (cfg.detector.model.dark_rate + cfg.detector.model.background_rate +
                    cfg.detector.background_per_mw * p) * 1e9;
      double counts = cps * T;
      std::normal_distribution<double> noise(0.0, std::sqrt(std::max(counts, 1.0)));
      double measured = std::max(counts + noise(rng), 0.0);
      pts.push_back({p, measured / T, std::sqrt(std::max(measured, 1.0)) / T});
    }
    double k = r.gamma_eg + r.gamma_em;
    double denom = r.gamma_em + r.gamma_mg;
    source = {{"simulated", true},
              {"rates", rates_json(r)},
              {"R_INF_cps_expected", r.gamma_eg * r.gamma_mg / denom * 1e9 * cfg.detector.model.efficiency},
              {"P_SAT_mw_expected", r.gamma_mg * k / (denom * cfg.pump.model.cross_section)}};
    std::vector<double> P, R, S;
    for (const auto& p : pts) {
      P.push_back(p.power_mw);
      R.push_back(p.rate_cps);
      S.push_back(p.sigma_cps);
    }
    stage("write", [&] {
      write_columns_csv(w.path("saturation_points.csv"), {"power_mw", "rate_cps", "sigma_cps"}, {P, R, S});
    });
  }
  SaturationFit sf = stage("fit", [&] {
    return fit_saturation(pts, cfg.saturation.eta_ex, cfg.saturation.eta_col, cfg.fit);
  });
  double pmax = 0.0;
  for (const auto& p : pts) pmax = std::max(pmax, p.power_mw);
  std::vector<double> P, R;
  for (int i = 0; i <= 500; ++i) {
    P.push_back(pmax * 1.2 * i / 500.0);
    R.push_back(sf.model.rate(P.back()));
  }
  stage("write", [&] { write_columns_csv(w.path("saturation_fit_curve.csv"), {"power_mw", "rate_cps"}, {P, R}); });
  const auto& m = sf.model;
  return json{{"command", "saturation"},
              {"source", source},
              {"points", pts.size()},
              {"fit", json_io::fit_result(sf.fit)},
              {"R_INF_cps", number(m.R_INF)},
              {"P_SAT_mw", number(m.P_SAT)},
              {"sigma_R_INF_cps", number(sf.sigma_R_INF)},
              {"sigma_P_SAT_mw", number(sf.sigma_P_SAT)},
              {"R_eff_cps", number(m.R_eff())},
              {"P_eff_mw", number(m.P_eff())},
              {"eta_ex", m.eta_EX},
              {"eta_col", m.eta_COL},
              {"alpha_slope_cps_per_mw", number(m.alpha_slope)},
              {"beta_dark_cps", number(m.beta_dark)},
              {"rate_at_P_SAT_cps", number(m.rate(m.P_SAT))}};
}

fs::path require_input(const RunConfig& cfg, const char* cmd) {
  if (!cfg.input) throw ConfigError(std::string(cmd) + " needs an input file (--input or config 'input')");
  return *cfg.input;
}

json run_polarization(const RunConfig& cfg, Writer& w) {
  auto in = require_input(cfg, "polarization");
  auto pts = stage("read", [&] { return read_polarization_csv(in); });
  auto pr = stage("fit", [&] { return fit_polarization(pts, cfg.fit); });
  const auto& p = pr.polarization;
  std::vector<double> th, y;
  for (int i = 0; i <= 720; ++i) {
    th.push_back(0.5 * i);
    y.push_back(evaluate_model(builtin_model(ModelId::kPolarization), pr.fit.params,
                               std::vector<double>{th.back()})[0]);
  }
  stage("write", [&] {
    write_columns_csv(w.path("polarization_fit_curve.csv"), {"theta_deg", "rate_cps"}, {th, y});
  });
  return json{{"command", "polarization"},
              {"input", in.filename().string()},
              {"points", pts.size()},
              {"fit", json_io::fit_result(pr.fit)},
              {"phi_deg", number(p.phi)},
              {"sigma_phi_deg", number(p.sigma_phi)},
              {"amplitude_cps", number(p.amplitude)},
              {"offset_cps", number(p.offset)},
              {"visibility", number(p.visibility)},
              {"identifiable", p.identifiable}};
}

json peak_json(const PeakModel& p) {
  return json{{"shape", p.shape == PeakShape::kGaussian ? "gaussian" : "lorentzian"},
              {"center_nm", number(p.center)},
              {"fwhm_nm", number(p.fwhm)},
              {"area_counts_nm", number(p.area)}};
}

json run_spectrum(const RunConfig& cfg, Writer& w) {
  auto in = require_input(cfg, "spectrum");
  auto spec = stage("read", [&] { return read_spectrum_csv(in); });
  PeakFitOptions opt;
  opt.n_peaks = cfg.spectrum.n_peaks;
  opt.shapes = cfg.spectrum.shapes;
  opt.exclusion_windows = cfg.spectrum.exclusion_windows;
  opt.fit = cfg.fit;
  PeakFit pf = stage("fit", [&] { return fit_peaks(spec, opt); });
  auto dw = stage("fit", [&] { return debye_waller(pf); });
  std::vector<double> wl, model;
  for (const auto& s : spec.samples) {
    wl.push_back(s.wavelength_nm);
    model.push_back(pf.evaluate(s.wavelength_nm));
  }
  stage("write", [&] {
    write_columns_csv(w.path("spectrum_fit_curve.csv"), {"wavelength_nm", "counts"}, {wl, model});
  });
  json peaks = json::array();
  for (const auto& p : pf.peaks) peaks.push_back(peak_json(p));
  json psb = json::array();
  for (const auto& p : dw.psb) psb.push_back(peak_json(p));
  json windows = json::array();
  for (const auto& x : opt.exclusion_windows) windows.push_back({x.lo_nm, x.hi_nm});
  json report{{"command", "spectrum"},
              {"input", in.filename().string()},
              {"samples", spec.samples.size()},
              {"exclusion_windows_nm", windows},
              {"fit", json_io::fit_result(pf.fit)},
              {"peaks", peaks},
              {"baseline_offset_counts", number(pf.baseline_offset)},
              {"baseline_slope_counts_per_nm", number(pf.baseline_slope)},
              {"baseline_ref_nm", number(pf.baseline_ref_nm)},
              {"zpl", peak_json(dw.zpl)},
              {"psb", psb},
              {"I_ZPL", number(dw.I_ZPL)},
              {"I_PSB", number(dw.I_PSB)},
              {"I_TOT", number(dw.I_TOT)},
              {"debye_waller_factor", number(dw.dwf)}};
  report["temperature_K"] = spec.temperature_k ? json(*spec.temperature_k) : json(nullptr);
  return report;
}

json run_linewidth(const RunConfig& cfg, Writer& w) {
  auto in = require_input(cfg, "linewidth");
  auto pts = stage("read", [&] { return read_linewidth_csv(in); });
  auto t3 = stage("fit", [&] { return fit_linewidth(pts, 3, cfg.fit); });
  auto t5 = stage("fit", [&] { return fit_linewidth(pts, 5, cfg.fit); });
  double tmax = 0.0;
  for (const auto& p : pts) tmax = std::max(tmax, p.temperature_k);
  std::vector<double> T, y3, y5;
  for (int i = 0; i <= 500; ++i) {
    T.push_back(tmax * 1.05 * i / 500.0);
    y3.push_back(t3.fwhm(T.back()));
    y5.push_back(t5.fwhm(T.back()));
  }
  stage("write", [&] {
    write_columns_csv(w.path("linewidth_fit_curve.csv"), {"temperature_K", "fwhm_t3_nm", "fwhm_t5_nm"},
                      {T, y3, y5});
  });
  auto one = [](const LinewidthFit& f) {
    return json{{"exponent", f.exponent},
                {"fit", json_io::fit_result(f.fit)},
                {"gamma0_nm", number(f.gamma0)},
                {"coeff_nm_per_K_pow", number(f.coeff)},
                {"residual_norm", number(f.fit.residual_norm)}};
  };
  const LinewidthFit& chosen = cfg.linewidth_exponent == 5 ? t5 : t3;
  return json{{"command", "linewidth"},
              {"input", in.filename().string()},
              {"points", pts.size()},
              {"configured_exponent", cfg.linewidth_exponent},
              {"result", one(chosen)},
              {"t3", one(t3)},
              {"t5", one(t5)},
              {"better_model", t3.fit.residual_norm <= t5.fit.residual_norm ? "T3" : "T5"}};
}

json run_fig2(const RunConfig& cfg, Writer& w) {
  Fig2Result res = reproduce_fig2(cfg);
  json points = json::array();
  std::vector<double> P, it1, st1, it2, st2, al, sal, g0, sg0, kt1, kt2, kal;
  for (std::size_t i = 0; i < res.points.size(); ++i) {
    const auto& pt = res.points[i];
    char tag[32];
    std::snprintf(tag, sizeof tag, "%02zu", i);
    stage("write", [&] {
      write_histogram_csv(w.path(std::string("fig2_g2_") + tag + ".csv"), pt.histogram);
      write_g2_curve(w, std::string("fig2_fit_") + tag + ".csv", pt.fit.params,
                     pt.histogram.bin_edges_ps.back() * 1e-3);
    });
    const auto& g = pt.fit.params;
    P.push_back(pt.power_mw);
    it1.push_back(1.0 / g.tau1);
    st1.push_back(g.sigma_tau1 / (g.tau1 * g.tau1));
    it2.push_back(1.0 / g.tau2);
    st2.push_back(g.sigma_tau2 / (g.tau2 * g.tau2));
    al.push_back(g.alpha_bunching);
    sal.push_back(g.sigma_alpha);
    g0.push_back(pt.fit.g2_zero);
    sg0.push_back(pt.fit.g2_zero_sigma);
    kt1.push_back(1.0 / pt.kinetics.tau1);
    kt2.push_back(1.0 / pt.kinetics.tau2);
    kal.push_back(pt.kinetics.alpha_bunching);
    json p = g2_fit_json(pt.fit);
    p["power_mw"] = pt.power_mw;
    p["emitted_photons"] = pt.emitted;
    p["histogram_file"] = std::string("fig2_g2_") + tag + ".csv";
    p["kinetics_prediction"] = json_io::g2_params(pt.kinetics);
    points.push_back(std::move(p));
  }
  stage("write", [&] {
    write_columns_csv(w.path("fig2_series.csv"),
                      {"power_mw", "inv_tau1_per_ns", "sigma_inv_tau1_per_ns", "inv_tau2_per_ns",
                       "sigma_inv_tau2_per_ns", "alpha", "sigma_alpha", "g2_zero", "sigma_g2_zero",
                       "kinetics_inv_tau1_per_ns", "kinetics_inv_tau2_per_ns", "kinetics_alpha"},
                      {P, it1, st1, it2, st2, al, sal, g0, sg0, kt1, kt2, kal});
  });
  const auto& r = cfg.rates;
  return json{{"command", "reproduce-fig2"},
              {"rates", rates_json(r)},
              {"cross_section_per_ns_mw", cfg.pump.model.cross_section},
              {"points", points},
              {"inv_tau1_extrapolation", json_io::extrapolation(res.inv_tau1)},
              {"inv_tau2_extrapolation", json_io::extrapolation(res.inv_tau2)},
              {"tau1_zero_power_ns", number(1.0 / res.inv_tau1.intercept)},
              {"tau2_zero_power_ns", number(1.0 / res.inv_tau2.intercept)},
              {"expected_inv_tau1_per_ns", r.gamma_eg + r.gamma_em},
              {"expected_inv_tau2_per_ns", r.gamma_mg},
              {"g2_zero_below_half_up_to_1mw", res.antibunched_up_to_1mw}};
}

}  // namespace

std::optional<Command> parse_command(std::string_view name) {
  for (const auto& [c, n] : kCommands) {
    if (n == name) return c;
  }
  return std::nullopt;
}

std::string_view command_name(Command cmd) {
  for (const auto& [c, n] : kCommands) {
    if (c == cmd) return n;
  }
  return "?";
}

std::vector<std::string_view> command_names() {
  std::vector<std::string_view> out;
  for (const auto& kv : kCommands) out.push_back(kv.second);
  return out;
}

double emission_rate(const ThreeLevelRates& rates) {
  return rates.gamma_eg * steady_state(rates).p_e;
}

HbtMeasurement simulate_hbt(const RunConfig& cfg, const ThreeLevelRates& rates, double power_mw,
                            std::uint64_t index) {
  HbtMeasurement m;
  m.duration_ns =
      stage("simulate", [&] { return duration_for(cfg.simulation, emission_rate(rates)); });
  SimConfig sc;
  sc.duration_ns = m.duration_ns;
  sc.seed = derive_seed(cfg.simulation.seed, kSeedSim, index);
  sc.segments = cfg.simulation.segments;
  sc.threads = cfg.threads;
  PhotonStream emitted = stage("simulate", [&] { return simulate_photon_stream(rates, sc); });
  m.emitted = emitted.size();
  PhotonStream detected = stage("detector", [&] {
    return apply_detector(emitted, detector_at(cfg, power_mw),
                          derive_seed(cfg.simulation.seed, kSeedDetector, index), m.duration_ns);
  });
  PhotonStream().swap(emitted);
  auto [a, b] = stage("split", [&] {
    return split_hbt(detected, derive_seed(cfg.simulation.seed, kSeedSplit, index));
  });
  m.ch0 = channel_timestamps(a, 0);
  m.ch1 = channel_timestamps(b, 1);
  return m;
}

Fig2Result reproduce_fig2(const RunConfig& cfg) {
  if (cfg.pump.powers_mw.size() < 2) {
    throw ConfigError("reproduce-fig2 needs at least two pump powers");
  }
  Fig2Result out;
  RateSeries s1, s2;
  for (std::size_t i = 0; i < cfg.pump.powers_mw.size(); ++i) {
    double p = cfg.pump.powers_mw[i];
    ThreeLevelRates rates = cw_rates(cfg, p);
    HbtMeasurement m = simulate_hbt(cfg, rates, p, i);
    Fig2Point pt;
    pt.power_mw = p;
    pt.emitted = m.emitted;
    pt.histogram = correlate_hbt(cfg, m.ch0, m.ch1, m.duration_ns);
    pt.kinetics = stage("kinetics", [&] { return g2_params_from_rates(rates); });
    pt.fit = stage("fit", [&] { return fit_g2(pt.histogram, std::nullopt, cfg.fit); });
    const auto& g = pt.fit.params;
    if (!std::isfinite(g.tau2)) {
      throw FitError("fit: no bunching resolved at " + format_number(p) + " mW");
    }
    s1.push_back({p, 1.0 / g.tau1, g.sigma_tau1 / (g.tau1 * g.tau1)});
    s2.push_back({p, 1.0 / g.tau2, g.sigma_tau2 / (g.tau2 * g.tau2)});
    out.points.push_back(std::move(pt));
  }
  out.inv_tau1 = stage("extrapolate", [&] { return extrapolate_zero_power(s1); });
  out.inv_tau2 = stage("extrapolate", [&] { return extrapolate_zero_power(s2); });
  bool any = false, ok = true;
  for (const auto& pt : out.points) {
    if (pt.power_mw <= 1.0) {
      any = true;
      ok = ok && pt.fit.g2_zero < 0.5;
    }
  }
  out.antibunched_up_to_1mw = any && ok;
  return out;
}

PipelineOutput run_pipeline(Command cmd, const RunConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  Writer w(out_dir);
  json report;
  switch (cmd) {
    case Command::kSimulate: report = run_simulate(cfg, w); break;
    case Command::kG2: report = run_g2(cfg, w); break;
    case Command::kLifetime: report = run_lifetime(cfg, w); break;
    case Command::kSaturation: report = run_saturation(cfg, w); break;
    case Command::kPolarization: report = run_polarization(cfg, w); break;
    case Command::kSpectrum: report = run_spectrum(cfg, w); break;
    case Command::kLinewidth: report = run_linewidth(cfg, w); break;
    case Command::kReproduceFig2: report = run_fig2(cfg, w); break;
  }
  report["seed"] = cfg.simulation.seed;
  std::string name = std::string(command_name(cmd)) + ".json";
  for (auto& c : name) c = c == '-' ? '_' : c;
  stage("write", [&] { w.json_file(name, report); });
  return {w.files(), report.dump(2)};
}

}  // namespace spekit
