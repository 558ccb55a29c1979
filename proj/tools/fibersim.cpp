#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fibersim/experiment.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::vector<std::string> sets;
};

int dispatch(fibersim::ExperimentKind kind, const Options& opts) {
  using namespace fibersim;
  std::string text;
  std::string source = "<defaults>";
  if (!opts.config.empty()) {
    std::ifstream in(opts.config, std::ios::binary);
    if (!in) {
      std::cerr << "config error: cannot read " << opts.config << '\n';
      return exit_config;
    }
    text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    source = opts.config;
  }
  RunConfig config;
  try {
    config = parse_config(text, source, kind, opts.sets);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  }
  if (!opts.out.empty()) config.output_dir = opts.out;
  return run(config, std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pulse propagation and Sagnac switching experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("fibersim ") + fibersim::kVersion);

  Options opts;
  std::optional<fibersim::ExperimentKind> chosen;
  const std::pair<fibersim::ExperimentKind, const char*> commands[] = {
      {fibersim::ExperimentKind::propagate, "Propagate one pump pulse and write its envelopes"},
      {fibersim::ExperimentKind::sweep, "Switching probability against pump energy"},
      {fibersim::ExperimentKind::span, "Energy span above a switching threshold"},
      {fibersim::ExperimentKind::span_grid, "Spans over fiber lengths, pulse widths and Raman fractions"},
      {fibersim::ExperimentKind::map, "Temporal and spectral evolution maps"},
      {fibersim::ExperimentKind::compare, "Output pump with and without Raman scattering"},
  };
  for (const auto& [kind, help] : commands) {
    auto* sub = app.add_subcommand(std::string(fibersim::to_string(kind)), help);
    sub->add_option("--config", opts.config, "JSON run configuration");
    sub->add_option("--out", opts.out, "Output directory (overrides output_dir)");
    sub->add_option("--set", opts.sets, "Override a config field, e.g. --set pump.energy_nJ=2.5")
        ->take_all()
        ->allow_extra_args(false);
    sub->callback([&chosen, kind = kind] { chosen = kind; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : fibersim::exit_config;
  }
  return dispatch(*chosen, opts);
}
