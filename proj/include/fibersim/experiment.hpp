#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fibersim/fiber_model.hpp"
#include "fibersim/io.hpp"
#include "fibersim/propagator.hpp"
#include "fibersim/sagnac.hpp"

namespace fibersim {

inline constexpr const char* kVersion = "0.1.0";

enum class ExperimentKind { propagate, sweep, span, span_grid, map, compare };

std::string_view to_string(ExperimentKind kind);
std::optional<ExperimentKind> parse_experiment_kind(std::string_view name);

/// Invalid configuration. `where` is "file:line" or "--set key".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string where, std::string field, const std::string& message);
  const std::string& where() const { return where_; }
  const std::string& field() const { return field_; }

 private:
  std::string where_;
  std::string field_;
};

/// Fully resolved run description. Field names follow the config schema
/// documented in docs/config.md.
struct RunConfig {
  ExperimentKind kind = ExperimentKind::propagate;
  std::filesystem::path output_dir = "out";
  std::size_t workers = 0;

  FiberSpec fiber;
  GridSettings grid;
  PropagationOptions solver;

  double pump_fwhm_ps = 5.0;
  double pump_energy_nJ = 2.5;
  std::vector<double> energies_nJ;
  SignalSpec signal;

  std::vector<double> lengths_m;        // sweep, span, span-grid
  std::vector<double> raman_fractions;  // sweep, span, span-grid
  std::vector<double> pump_fwhms_ps;    // span-grid
  double theta = 0.95;
  double resolution_nJ = 0.01;

  double map_floor_dB = -40.0;
  std::size_t map_stride = 1;
  bool export_snapshots = false;
};

/// Defaults for a kind before any config is applied.
RunConfig default_config(ExperimentKind kind);

/// Parse a JSON config. `kind` comes from the CLI subcommand and must agree
/// with an "experiment" entry if the file has one. `overrides` are
/// "dotted.key=value" strings applied on top of the file; values are JSON,
/// or plain strings when they do not parse as JSON.
RunConfig parse_config(std::string_view text, std::string_view source_name, std::optional<ExperimentKind> kind,
                       const std::vector<std::string>& overrides = {});

nlohmann::ordered_json to_json(const RunConfig& config);

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_solver = 3, exit_io = 4 };

/// Runs the experiment, writes its artifacts and the manifest, and maps
/// failures onto exit codes. Progress and diagnostics go to `log`.
int run(const RunConfig& config, std::ostream& log);

/// Overlay of normalized pump power for a Raman and a Kerr-only run of the
/// same input. Columns: t_ps (relative to the input pump centre),
/// P_raman_norm, P_kerr_norm, P_input_norm; the input peak is 1.
std::string compare_overlay_csv(const Envelope& input, const Envelope& raman, const Envelope& kerr,
                                double pump_center_ps);

}  // namespace fibersim
