// spekit command-line front end.
//
// Exit codes (stable):
//   0 success        2 usage          3 config        4 I/O
//   5 file format    6 invalid input  7 model         8 fit
//   10 internal error

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "spekit/config.hpp"
#include "spekit/errors.hpp"
#include "spekit/pipeline.hpp"

namespace {

enum Exit : int {
  kOk = 0,
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kFormat = 5,
  kInvalid = 6,
  kModel = 7,
  kFit = 8,
  kInternal = 10,
};

std::optional<unsigned> env_threads() {
  const char* s = std::getenv("SPEKIT_THREADS");
  if (!s || !*s) return std::nullopt;
  try {
    long v = std::stol(s);
    if (v >= 1) return static_cast<unsigned>(v);
  } catch (const std::exception&) {
  }
  std::cerr << "spekit: ignoring invalid SPEKIT_THREADS='" << s << "'\n";
  return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spekit: single-photon emitter characterization pipeline"};
  app.footer("Commands: simulate, g2, lifetime, saturation, polarization, spectrum, linewidth, "
             "reproduce-fig2\nEnvironment: SPEKIT_THREADS sets the default thread count.");

  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "spekit_out";
  std::optional<unsigned> threads;
  std::string input;
  std::optional<std::int64_t> bin_width_ps;
  std::optional<std::int64_t> window_ps;
  std::optional<double> power_mw;
  bool dump_config = false;

  std::vector<std::string> names;
  for (auto n : spekit::command_names()) names.emplace_back(n);
  app.add_option("command", command, "Pipeline command")->check(CLI::IsMember(names));
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "RNG seed (overrides config)");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--input", input, "Input file (time tags, spectrum or point CSV)");
  app.add_option("--bin-width-ps", bin_width_ps, "Correlation / decay bin width")->check(CLI::PositiveNumber);
  app.add_option("--window-ps", window_ps, "Correlation window (max |tau|)")->check(CLI::PositiveNumber);
  app.add_option("--power-mw", power_mw, "Pump power for single-power commands")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("--dump-config", dump_config, "Print the effective configuration and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  if (command.empty() && !dump_config) {
    std::cerr << "spekit: a command is required\n" << app.help();
    return kUsage;
  }

  try {
    spekit::RunConfig cfg =
        config_path.empty() ? spekit::RunConfig::defaults() : spekit::load_config(config_path);
    if (auto t = env_threads()) cfg.threads = *t;
    if (threads) cfg.threads = *threads;
    if (seed) cfg.simulation.seed = *seed;
    if (!input.empty()) cfg.input = input;
    if (bin_width_ps) cfg.correlation.bin_width_ps = *bin_width_ps;
    if (window_ps) cfg.correlation.window_ps = *window_ps;
    if (power_mw) {
      cfg.pump.power_mw = *power_mw;
      cfg.rates.gamma_ge = spekit::pump_rate(*power_mw, cfg.pump.model);
    }
    cfg.validate();

    if (dump_config) {
      std::cout << spekit::config_to_json(cfg) << '\n';
      return kOk;
    }
    auto cmd = *spekit::parse_command(command);
    auto out = spekit::run_pipeline(cmd, cfg, out_dir);
    for (const auto& f : out.files) std::cout << f.string() << '\n';
    return kOk;
  } catch (const spekit::ConfigError& e) {
    std::cerr << "spekit: config error: " << e.what() << '\n';
    return kConfig;
  } catch (const spekit::IoError& e) {
    std::cerr << "spekit: I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const spekit::FormatError& e) {
    std::cerr << "spekit: format error: " << e.what() << '\n';
    return kFormat;
  } catch (const spekit::InvalidInput& e) {
    std::cerr << "spekit: invalid input: " << e.what() << '\n';
    return kInvalid;
  } catch (const spekit::ModelError& e) {
    std::cerr << "spekit: model error: " << e.what() << '\n';
    return kModel;
  } catch (const spekit::FitError& e) {
    std::cerr << "spekit: fit error: " << e.what() << '\n';
    return kFit;
  } catch (const std::exception& e) {
    std::cerr << "spekit: internal error: " << e.what() << '\n';
    return kInternal;
  }
}
