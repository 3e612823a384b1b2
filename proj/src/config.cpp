#include "spekit/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json_io.hpp"
#include "spekit/errors.hpp"

namespace spekit {

using json_io::json;

RunConfig RunConfig::defaults() {
  RunConfig c;
  const double k1 = 1.0 / 3.33;  // gamma_eg + gamma_em
  c.rates.gamma_eg = k1 * 30.0 / 31.0;
  c.rates.gamma_em = k1 / 31.0;
  c.rates.gamma_mg = 1.0 / 675.0;
  c.rates.gamma_ge = pump_rate(*c.pump.power_mw, c.pump.model);
  c.correlation.bin_width_ps = 256;
  c.correlation.window_ps = 7'000'000;  // ~10 tau2 at zero power
  c.simulation.photons = 5e6;
  return c;
}

void RunConfig::validate() const {
  try {
    rates.validate();
    detector.model.validate();
    correlation.validate();
    if (!(pump.model.cross_section > 0.0) || !std::isfinite(pump.model.cross_section)) {
      throw InvalidInput("pump.cross_section must be finite and > 0");
    }
    if (pump.power_mw && !(*pump.power_mw >= 0.0)) throw InvalidInput("pump.power_mw must be >= 0");
    for (double p : pump.powers_mw) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidInput("pump.powers_mw entries must be >= 0");
    }
    if (!(detector.background_per_mw >= 0.0)) {
      throw InvalidInput("detector.background_per_mw must be >= 0");
    }
    if (!(simulation.duration_ns > 0.0)) throw InvalidInput("simulation.duration_ns must be > 0");
    if (simulation.photons && !(*simulation.photons > 0.0)) {
      throw InvalidInput("simulation.photons must be > 0");
    }
    if (simulation.segments == 0) throw InvalidInput("simulation.segments must be >= 1");
    const auto& pl = simulation.pulsed;
    if (!(pl.pulse.period_ns > 0.0) || !(pl.pulse.pulse_width_ns > 0.0) ||
        pl.pulse.pulse_width_ns >= pl.pulse.period_ns) {
      throw InvalidInput("simulation.pulsed needs 0 < pulse_width_ns < period_ns");
    }
    if (!(pl.power_mw > 0.0)) throw InvalidInput("simulation.pulsed.power_mw must be > 0");
    if (!(fit.gradient_tolerance > 0.0) || !(fit.step_tolerance > 0.0) || fit.max_iterations <= 0) {
      throw InvalidInput("fit tolerances must be positive");
    }
    if (!(saturation.eta_ex > 0.0) || !(saturation.eta_col > 0.0)) {
      throw InvalidInput("saturation efficiencies must be > 0");
    }
    if (!(saturation.integration_s > 0.0)) throw InvalidInput("saturation.integration_s must be > 0");
    if (spectrum.n_peaks == 0) throw InvalidInput("spectrum.n_peaks must be >= 1");
    for (const auto& w : spectrum.exclusion_windows) {
      if (!(w.hi_nm > w.lo_nm)) throw InvalidInput("exclusion windows need lo_nm < hi_nm");
    }
    if (linewidth_exponent != 3 && linewidth_exponent != 5) {
      throw InvalidInput("linewidth.exponent must be 3 or 5");
    }
    if (threads == 0) throw InvalidInput("threads must be >= 1");
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (const auto& [k, v] : obj.items()) {
    bool known = false;
    for (const char* allowed : keys) known = known || k == allowed;
    if (!known) throw ConfigError("config: unknown key '" + where + "." + k + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: '" + where + "." + key + "' has the wrong type");
  }
}

template <typename T>
void read_opt(const json& obj, const char* key, std::optional<T>& out, const std::string& where) {
  if (!obj.contains(key)) return;
  if (obj.at(key).is_null()) {
    out.reset();
    return;
  }
  T v{};
  read(obj, key, v, where);
  out = v;
}

PeakShape parse_shape(const std::string& s) {
  if (s == "lorentzian") return PeakShape::kLorentzian;
  if (s == "gaussian") return PeakShape::kGaussian;
  throw ConfigError("config: unknown peak shape '" + s + "' (lorentzian|gaussian)");
}

const char* shape_name(PeakShape s) {
  return s == PeakShape::kGaussian ? "gaussian" : "lorentzian";
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  RunConfig c = RunConfig::defaults();
  check_keys(root, "", {"rates", "pump", "detector", "simulation", "correlation", "fit",
                        "saturation", "spectrum", "linewidth", "threads", "input"});

  bool ge_given = false;
  if (root.contains("rates")) {
    const auto& r = root["rates"];
    check_keys(r, "rates", {"gamma_ge", "gamma_eg", "gamma_em", "gamma_mg"});
    ge_given = r.contains("gamma_ge");
    read(r, "gamma_ge", c.rates.gamma_ge, "rates");
    read(r, "gamma_eg", c.rates.gamma_eg, "rates");
    read(r, "gamma_em", c.rates.gamma_em, "rates");
    read(r, "gamma_mg", c.rates.gamma_mg, "rates");
  }
  if (root.contains("pump")) {
    const auto& p = root["pump"];
    check_keys(p, "pump", {"cross_section", "power_mw", "powers_mw"});
    read(p, "cross_section", c.pump.model.cross_section, "pump");
    read_opt(p, "power_mw", c.pump.power_mw, "pump");
    read(p, "powers_mw", c.pump.powers_mw, "pump");
  }
  // An explicit gamma_ge without a power means "use this rate".
  if (ge_given && !(root.contains("pump") && root["pump"].contains("power_mw"))) {
    c.pump.power_mw.reset();
  }
  if (c.pump.power_mw && c.pump.model.cross_section > 0.0 && *c.pump.power_mw >= 0.0) {
    c.rates.gamma_ge = pump_rate(*c.pump.power_mw, c.pump.model);
  }

  if (root.contains("detector")) {
    const auto& d = root["detector"];
    check_keys(d, "detector", {"efficiency", "dead_time_ps", "dark_rate_per_ns", "jitter_sigma_ps",
                               "background_per_ns", "background_per_ns_mw"});
    read(d, "efficiency", c.detector.model.efficiency, "detector");
    read(d, "dead_time_ps", c.detector.model.dead_time_ps, "detector");
    read(d, "dark_rate_per_ns", c.detector.model.dark_rate, "detector");
    read(d, "jitter_sigma_ps", c.detector.model.jitter_sigma_ps, "detector");
    read(d, "background_per_ns", c.detector.model.background_rate, "detector");
    read(d, "background_per_ns_mw", c.detector.background_per_mw, "detector");
  }
  if (root.contains("simulation")) {
    const auto& s = root["simulation"];
    check_keys(s, "simulation", {"duration_ns", "photons", "seed", "segments", "pulsed"});
    read(s, "duration_ns", c.simulation.duration_ns, "simulation");
    read_opt(s, "photons", c.simulation.photons, "simulation");
    // An explicit duration without a photon target takes precedence.
    if (s.contains("duration_ns") && !s.contains("photons")) c.simulation.photons.reset();
    read(s, "seed", c.simulation.seed, "simulation");
    read(s, "segments", c.simulation.segments, "simulation");
    if (s.contains("pulsed")) {
      const auto& pl = s["pulsed"];
      check_keys(pl, "simulation.pulsed", {"period_ns", "pulse_width_ns", "power_mw"});
      read(pl, "period_ns", c.simulation.pulsed.pulse.period_ns, "simulation.pulsed");
      read(pl, "pulse_width_ns", c.simulation.pulsed.pulse.pulse_width_ns, "simulation.pulsed");
      read(pl, "power_mw", c.simulation.pulsed.power_mw, "simulation.pulsed");
    }
  }
  if (root.contains("correlation")) {
    const auto& k = root["correlation"];
    check_keys(k, "correlation", {"bin_width_ps", "window_ps", "mode"});
    read(k, "bin_width_ps", c.correlation.bin_width_ps, "correlation");
    read(k, "window_ps", c.correlation.window_ps, "correlation");
    if (k.contains("mode")) {
      std::string m;
      read(k, "mode", m, "correlation");
      if (m == "full") {
        c.correlation.mode = CorrelationMode::kFull;
      } else if (m == "start_stop") {
        c.correlation.mode = CorrelationMode::kStartStop;
      } else {
        throw ConfigError("config: correlation.mode must be 'full' or 'start_stop'");
      }
    }
  }
  if (root.contains("fit")) {
    const auto& f = root["fit"];
    check_keys(f, "fit", {"gradient_tolerance", "step_tolerance", "max_iterations", "absolute_sigma"});
    read(f, "gradient_tolerance", c.fit.gradient_tolerance, "fit");
    read(f, "step_tolerance", c.fit.step_tolerance, "fit");
    read(f, "max_iterations", c.fit.max_iterations, "fit");
    read(f, "absolute_sigma", c.fit.absolute_sigma, "fit");
  }
  if (root.contains("saturation")) {
    const auto& s = root["saturation"];
    check_keys(s, "saturation", {"eta_ex", "eta_col", "powers_mw", "integration_s"});
    read(s, "eta_ex", c.saturation.eta_ex, "saturation");
    read(s, "eta_col", c.saturation.eta_col, "saturation");
    read(s, "powers_mw", c.saturation.powers_mw, "saturation");
    read(s, "integration_s", c.saturation.integration_s, "saturation");
  }
  if (root.contains("spectrum")) {
    const auto& s = root["spectrum"];
    check_keys(s, "spectrum", {"n_peaks", "shapes", "exclusion_windows_nm"});
    read(s, "n_peaks", c.spectrum.n_peaks, "spectrum");
    if (s.contains("shapes")) {
      std::vector<std::string> names;
      read(s, "shapes", names, "spectrum");
      c.spectrum.shapes.clear();
      for (const auto& n : names) c.spectrum.shapes.push_back(parse_shape(n));
    }
    if (s.contains("exclusion_windows_nm")) {
      std::vector<std::array<double, 2>> ws;
      read(s, "exclusion_windows_nm", ws, "spectrum");
      c.spectrum.exclusion_windows.clear();
      for (const auto& w : ws) c.spectrum.exclusion_windows.push_back({w[0], w[1]});
    }
  }
  if (root.contains("linewidth")) {
    const auto& l = root["linewidth"];
    check_keys(l, "linewidth", {"exponent"});
    read(l, "exponent", c.linewidth_exponent, "linewidth");
  }
  read(root, "threads", c.threads, "");
  if (root.contains("input")) {
    std::string in;
    read(root, "input", in, "");
    c.input = in;
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string config_to_json(const RunConfig& c) {
  json shapes = json::array();
  for (auto s : c.spectrum.shapes) shapes.push_back(shape_name(s));
  json windows = json::array();
  for (const auto& w : c.spectrum.exclusion_windows) windows.push_back({w.lo_nm, w.hi_nm});
  json sim{{"duration_ns", c.simulation.duration_ns},
           {"seed", c.simulation.seed},
           {"segments", c.simulation.segments},
           {"pulsed",
            {{"period_ns", c.simulation.pulsed.pulse.period_ns},
             {"pulse_width_ns", c.simulation.pulsed.pulse.pulse_width_ns},
             {"power_mw", c.simulation.pulsed.power_mw}}}};
  sim["photons"] = c.simulation.photons ? json(*c.simulation.photons) : json(nullptr);
  json pump{{"cross_section", c.pump.model.cross_section}, {"powers_mw", c.pump.powers_mw}};
  pump["power_mw"] = c.pump.power_mw ? json(*c.pump.power_mw) : json(nullptr);
  json root{
      {"rates",
       {{"gamma_ge", c.rates.gamma_ge},
        {"gamma_eg", c.rates.gamma_eg},
        {"gamma_em", c.rates.gamma_em},
        {"gamma_mg", c.rates.gamma_mg}}},
      {"pump", pump},
      {"detector",
       {{"efficiency", c.detector.model.efficiency},
        {"dead_time_ps", c.detector.model.dead_time_ps},
        {"dark_rate_per_ns", c.detector.model.dark_rate},
        {"jitter_sigma_ps", c.detector.model.jitter_sigma_ps},
        {"background_per_ns", c.detector.model.background_rate},
        {"background_per_ns_mw", c.detector.background_per_mw}}},
      {"simulation", sim},
      {"correlation",
       {{"bin_width_ps", c.correlation.bin_width_ps},
        {"window_ps", c.correlation.window_ps},
        {"mode", c.correlation.mode == CorrelationMode::kFull ? "full" : "start_stop"}}},
      {"fit",
       {{"gradient_tolerance", c.fit.gradient_tolerance},
        {"step_tolerance", c.fit.step_tolerance},
        {"max_iterations", c.fit.max_iterations},
        {"absolute_sigma", c.fit.absolute_sigma}}},
      {"saturation",
       {{"eta_ex", c.saturation.eta_ex},
        {"eta_col", c.saturation.eta_col},
        {"powers_mw", c.saturation.powers_mw},
        {"integration_s", c.saturation.integration_s}}},
      {"spectrum",
       {{"n_peaks", c.spectrum.n_peaks}, {"shapes", shapes}, {"exclusion_windows_nm", windows}}},
      {"linewidth", {{"exponent", c.linewidth_exponent}}},
      {"threads", c.threads}};
  if (c.input) root["input"] = c.input->string();
  return root.dump(2);
}

}  // namespace spekit
