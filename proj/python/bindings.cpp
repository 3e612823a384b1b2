#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "spekit/config.hpp"
#include "spekit/correlate.hpp"
#include "spekit/errors.hpp"
#include "spekit/fitters.hpp"
#include "spekit/kinetics.hpp"
#include "spekit/pipeline.hpp"
#include "spekit/report.hpp"
#include "spekit/simulate.hpp"
#include "spekit/spectra.hpp"

namespace py = pybind11;
using namespace spekit;

namespace {

using U64Array = py::array_t<std::uint64_t, py::array::c_style | py::array::forcecast>;

std::vector<std::uint64_t> to_vector(const U64Array& a) {
  return {a.data(), a.data() + a.size()};
}

template <class T>
py::array_t<T> to_array(const std::vector<T>& v) {
  py::array_t<T> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::dict histogram_dict(const Histogram& h) {
  std::vector<double> norm(h.size()), sigma(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    norm[i] = h.normalized(i);
    sigma[i] = h.sigma(i);
  }
  py::dict d;
  d["edges_ps"] = to_array(h.bin_edges_ps);
  d["counts"] = to_array(h.counts);
  d["normalized"] = to_array(norm);
  d["sigma"] = to_array(sigma);
  return d;
}

Histogram histogram_from(const U64Array& ch0, const U64Array& ch1, std::int64_t bin_width_ps,
                         std::int64_t window_ps, std::optional<double> duration_ps, bool start_stop,
                         unsigned threads) {
  CorrelationConfig cfg;
  cfg.bin_width_ps = bin_width_ps;
  cfg.window_ps = window_ps;
  cfg.duration_ps = duration_ps;
  cfg.mode = start_stop ? CorrelationMode::kStartStop : CorrelationMode::kFull;
  cfg.threads = threads;
  const auto a = to_vector(ch0), b = to_vector(ch1);
  py::gil_scoped_release release;
  return g2_histogram(a, b, cfg);
}

}  // namespace

PYBIND11_MODULE(_spekit, m) {
  m.doc() = "Single-photon emitter analysis: kinetics, simulation, correlation and fitting";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
  py::register_exception<ModelError>(m, "ModelError", base.ptr());
  py::register_exception<FitError>(m, "FitError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  py::class_<ThreeLevelRates>(m, "ThreeLevelRates")
      .def(py::init([](double ge, double eg, double em, double mg) { return ThreeLevelRates{ge, eg, em, mg}; }),
           py::arg("gamma_ge"), py::arg("gamma_eg"), py::arg("gamma_em"), py::arg("gamma_mg"))
      .def_readwrite("gamma_ge", &ThreeLevelRates::gamma_ge)
      .def_readwrite("gamma_eg", &ThreeLevelRates::gamma_eg)
      .def_readwrite("gamma_em", &ThreeLevelRates::gamma_em)
      .def_readwrite("gamma_mg", &ThreeLevelRates::gamma_mg)
      .def("__repr__", [](const ThreeLevelRates& k) {
        return "ThreeLevelRates(" + std::to_string(k.gamma_ge) + ", " + std::to_string(k.gamma_eg) + ", " +
               std::to_string(k.gamma_em) + ", " + std::to_string(k.gamma_mg) + ")";
      });

  py::class_<G2Params>(m, "G2Params")
      .def(py::init([](double t1, double t2, double a) { return G2Params{t1, t2, a}; }), py::arg("tau1"),
           py::arg("tau2"), py::arg("alpha"))
      .def_readonly("tau1", &G2Params::tau1)
      .def_readonly("tau2", &G2Params::tau2)
      .def_readonly("alpha", &G2Params::alpha_bunching)
      .def_readonly("sigma_tau1", &G2Params::sigma_tau1)
      .def_readonly("sigma_tau2", &G2Params::sigma_tau2)
      .def_readonly("sigma_alpha", &G2Params::sigma_alpha)
      .def("__call__", py::vectorize(&G2Params::evaluate));

  m.def("steady_state", [](const ThreeLevelRates& k) {
    auto p = steady_state(k);
    return py::make_tuple(p.p_g, p.p_e, p.p_m);
  });
  m.def("relaxation_rates", &relaxation_rates);
  m.def("g2_exact", [](const ThreeLevelRates& k, py::array_t<double> tau) {
    return py::vectorize([&k](double t) { return g2_exact(k, t); })(tau);
  });
  m.def("g2_params_from_rates", &g2_params_from_rates);
  m.def("rates_at_power", [](const ThreeLevelRates& k, double power_mw, double cross_section) {
    return rates_at_power(k, power_mw, PumpModel{cross_section});
  });
  m.def("quantum_efficiency", &quantum_efficiency);

  m.def(
      "simulate",
      [](const ThreeLevelRates& k, double duration_ns, std::uint64_t seed, unsigned segments, unsigned threads) {
        SimConfig cfg{duration_ns, seed};
        cfg.segments = segments;
        cfg.threads = threads;
        PhotonStream s;
        {
          py::gil_scoped_release release;
          s = simulate_photon_stream(k, cfg);
        }
        std::vector<std::uint64_t> t(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) t[i] = s[i].timestamp_ps;
        return to_array(t);
      },
      py::arg("rates"), py::arg("duration_ns"), py::arg("seed") = 1, py::arg("segments") = 1,
      py::arg("threads") = 1, "Photon emission times (ps) of one emitter.");

  m.def(
      "split_hbt",
      [](const U64Array& times, std::uint64_t seed) {
        PhotonStream s;
        for (auto t : to_vector(times)) s.push_back({t, 0});
        auto [a, b] = split_hbt(s, seed);
        return py::make_tuple(to_array(channel_timestamps(a, 0)), to_array(channel_timestamps(b, 1)));
      },
      py::arg("times"), py::arg("seed") = 1);

  m.def(
      "g2_histogram",
      [](const U64Array& ch0, const U64Array& ch1, std::int64_t bin_width_ps, std::int64_t window_ps,
         std::optional<double> duration_ps, bool start_stop, unsigned threads) {
        return histogram_dict(histogram_from(ch0, ch1, bin_width_ps, window_ps, duration_ps, start_stop, threads));
      },
      py::arg("ch0"), py::arg("ch1"), py::arg("bin_width_ps") = 256, py::arg("window_ps") = 100000,
      py::arg("duration_ps") = py::none(), py::arg("start_stop") = false, py::arg("threads") = 1);

  m.def(
      "fit_g2",
      [](const U64Array& ch0, const U64Array& ch1, std::int64_t bin_width_ps, std::int64_t window_ps,
         std::optional<double> duration_ps) {
        auto h = histogram_from(ch0, ch1, bin_width_ps, window_ps, duration_ps, false, 1);
        auto f = fit_g2(h);
        return py::make_tuple(f.params, f.g2_zero, fit_result_json(f.fit));
      },
      py::arg("ch0"), py::arg("ch1"), py::arg("bin_width_ps") = 256, py::arg("window_ps") = 100000,
      py::arg("duration_ps") = py::none(),
      "Fits the three-level g2 form; returns (G2Params, g2(0), fit report JSON).");

  m.def(
      "fit_saturation",
      [](const std::vector<double>& p, const std::vector<double>& r, std::optional<std::vector<double>> s) {
        if (p.size() != r.size()) throw InvalidInput("power and rate lengths differ");
        std::vector<SaturationPoint> pts;
        for (std::size_t i = 0; i < p.size(); ++i) pts.push_back({p[i], r[i], s ? s->at(i) : 1.0});
        auto f = fit_saturation(pts);
        py::dict d;
        d["R_INF"] = f.model.R_INF;
        d["P_SAT"] = f.model.P_SAT;
        d["alpha_slope"] = f.model.alpha_slope;
        d["beta_dark"] = f.model.beta_dark;
        d["converged"] = f.fit.converged;
        d["diagnosis"] = f.fit.diagnosis;
        return d;
      },
      py::arg("power_mw"), py::arg("rate_cps"), py::arg("sigma_cps") = py::none());

  m.def(
      "fit_polarization",
      [](const std::vector<double>& theta, const std::vector<double>& r) {
        if (theta.size() != r.size()) throw InvalidInput("angle and rate lengths differ");
        std::vector<PolarizationPoint> pts;
        for (std::size_t i = 0; i < theta.size(); ++i) pts.push_back({theta[i], r[i], 1.0});
        auto f = fit_polarization(pts).polarization;
        py::dict d;
        d["phi"] = f.phi;
        d["visibility"] = f.visibility;
        d["identifiable"] = f.identifiable;
        return d;
      },
      py::arg("theta_deg"), py::arg("rate_cps"));

  m.def(
      "classify_polarization",
      [](const std::vector<double>& phis, double tol) {
        auto c = classify_polarization(phis, tol);
        py::dict d;
        d["centers"] = c.centers;
        d["assignment"] = c.assignment;
        d["two_state"] = c.two_state;
        d["orthogonal"] = c.orthogonal;
        d["warning"] = c.warning;
        return d;
      },
      py::arg("phis_deg"), py::arg("tolerance_deg") = 5.0);

  m.def("commands", [] {
    std::vector<std::string> out;
    for (auto n : command_names()) out.emplace_back(n);
    return out;
  });
  m.def(
      "run",
      [](const std::string& command, const std::string& config_json, const std::filesystem::path& out_dir) {
        auto cmd = parse_command(command);
        if (!cmd) throw InvalidInput("unknown command '" + command + "'");
        RunConfig cfg = parse_config(config_json);
        PipelineOutput out;
        {
          py::gil_scoped_release release;
          out = run_pipeline(*cmd, cfg, out_dir);
        }
        return out.report_json;
      },
      py::arg("command"), py::arg("config_json") = "{}", py::arg("out_dir") = "spekit_out",
      "Runs a pipeline command and returns its JSON report.");
}
