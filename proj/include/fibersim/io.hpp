#pragma once

#include <cstddef>
#include <filesystem>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fibersim/propagator.hpp"
#include "fibersim/pulse_grid.hpp"
#include "fibersim/sagnac.hpp"

namespace fibersim {

/// Failure to create or write an artifact.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decimal with 9 significant digits, the format of every CSV number.
std::string format_number(double x);
std::string csv_row(std::span<const double> values);

std::string sha256_hex(std::string_view bytes);

// ---- artifact formats -------------------------------------------------------

/// t_ps,re_sqrtW,im_sqrtW
std::string envelope_csv(const Envelope& env);

/// energy_nJ,T,R,phase_rad
std::string switch_curve_csv(const SwitchCurve& curve);

/// One row per span with the cell metadata columns first.
std::string span_summary_csv(std::span<const SpanCell> cells);

/// z_m,dz_m,local_error,energy_nJ for every accepted step.
std::string step_history_csv(const PropagationRecord& record);

/// Matrix with one row per snapshot. The first column holds z in m; the
/// header carries the axis values of the remaining columns. Every `stride`-th
/// axis sample is kept.
std::string evolution_map_csv(const EvolutionMap& map, std::size_t stride = 1);
nlohmann::ordered_json evolution_map_sidecar(const EvolutionMap& map, std::size_t stride,
                                             const std::string& csv_name);

// ---- artifact directory -----------------------------------------------------

struct Artifact {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::size_t bytes = 0;
  bool partial = false;
};

/// Writes files under one directory and remembers their checksums. Safe to
/// call from several threads; each file is written under a lock.
class ArtifactSink {
 public:
  explicit ArtifactSink(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  void write(const std::string& relative_path, std::string_view content, bool partial = false);
  std::vector<Artifact> artifacts() const;

  /// manifest.json listing every artifact; written last.
  void write_manifest(const nlohmann::ordered_json& header);

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  std::vector<Artifact> artifacts_;
};

}  // namespace fibersim
