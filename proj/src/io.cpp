#include "fibersim/io.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace fibersim {

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

std::string csv_row(std::span<const double> values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_number(values[i]);
  }
  out += '\n';
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw IoError("SHA-256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string envelope_csv(const Envelope& env) {
  std::ostringstream os;
  write_envelope_csv(os, env);
  return os.str();
}

std::string switch_curve_csv(const SwitchCurve& curve) {
  std::string out = "energy_nJ,T,R,phase_rad\n";
  for (const auto& p : curve.points) {
    const double row[] = {p.pump_energy_nJ, p.T, p.R, p.phase_at_signal_center};
    out += csv_row(row);
  }
  return out;
}

namespace {

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + '"';
}

}  // namespace

std::string span_summary_csv(std::span<const SpanCell> cells) {
  std::string out =
      "length_m,fwhm_ps,f_R,theta,found,E_lo_nJ,E_hi_nJ,width_nJ,open_low,open_high,refinement_runs,error\n";
  for (const auto& c : cells) {
    const auto& s = c.span;
    const double row[] = {c.length_m,
                          c.pump_fwhm_ps,
                          c.raman_fraction,
                          s.theta,
                          s.found ? 1.0 : 0.0,
                          s.E_lo,
                          s.E_hi,
                          s.width(),
                          s.open_low ? 1.0 : 0.0,
                          s.open_high ? 1.0 : 0.0,
                          static_cast<double>(s.refinement_runs)};
    std::string line = csv_row(row);
    line.pop_back();
    out += line + ',' + (c.error ? quoted(*c.error) : std::string()) + '\n';
  }
  return out;
}

std::string step_history_csv(const PropagationRecord& record) {
  std::string out = "z_m,dz_m,local_error,energy_nJ\n";
  for (const auto& s : record.steps) {
    const double row[] = {s.z_m, s.dz_m, s.local_error, s.energy_nJ};
    out += csv_row(row);
  }
  return out;
}

std::string evolution_map_csv(const EvolutionMap& map, std::size_t stride) {
  if (stride == 0) throw DomainError("map stride must be positive");
  const std::string axis = map.domain == MapDomain::time ? "t_ps=" : "lambda_nm=";
  std::string out = "z_m";
  for (std::size_t j = 0; j < map.axis.size(); j += stride) out += ',' + axis + format_number(map.axis[j]);
  out += '\n';
  std::vector<double> row;
  for (std::size_t i = 0; i < map.dB.size(); ++i) {
    row.assign(1, map.z_m[i]);
    for (std::size_t j = 0; j < map.axis.size(); j += stride) row.push_back(map.dB[i][j]);
    out += csv_row(row);
  }
  return out;
}

nlohmann::ordered_json evolution_map_sidecar(const EvolutionMap& map, std::size_t stride, const std::string& csv_name) {
  const bool time = map.domain == MapDomain::time;
  const std::size_t cols = (map.axis.size() + stride - 1) / stride;
  nlohmann::ordered_json j;
  j["csv"] = csv_name;
  j["domain"] = time ? "time" : "wavelength";
  j["rows"] = {{"quantity", "z"}, {"unit", "m"}, {"count", map.z_m.size()}};
  j["columns"] = {{"quantity", time ? "t" : "lambda"},
                  {"unit", time ? "ps" : "nm"},
                  {"count", cols},
                  {"first", map.axis.empty() ? 0.0 : map.axis.front()},
                  {"last", map.axis.empty() ? 0.0 : map.axis[(cols - 1) * stride]},
                  {"stride", stride}};
  j["values"] = {{"quantity", time ? "|A(t)|^2" : "|A(lambda)|^2"},
                 {"unit", "dB relative to the global maximum"},
                 {"clip_dB", map.floor_dB}};
  return j;
}

ArtifactSink::ArtifactSink(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
}

void ArtifactSink::write(const std::string& relative_path, std::string_view content, bool partial) {
  std::lock_guard lock(mutex_);
  const auto path = dir_ / relative_path;
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os.write(content.data(), static_cast<std::streamsize>(content.size()));
  os.close();
  if (!os) throw IoError("failed to write " + path.string());
  for (auto& a : artifacts_) {
    if (a.path == relative_path) {
      a = {relative_path, sha256_hex(content), content.size(), partial};
      return;
    }
  }
  artifacts_.push_back({relative_path, sha256_hex(content), content.size(), partial});
}

std::vector<Artifact> ArtifactSink::artifacts() const {
  std::lock_guard lock(mutex_);
  return artifacts_;
}

void ArtifactSink::write_manifest(const nlohmann::ordered_json& header) {
  nlohmann::ordered_json m = header;
  auto files = nlohmann::ordered_json::array();
  for (const auto& a : artifacts()) {
    nlohmann::ordered_json f;
    f["path"] = a.path;
    f["sha256"] = a.sha256;
    f["bytes"] = a.bytes;
    f["partial"] = a.partial;
    files.push_back(std::move(f));
  }
  m["files"] = std::move(files);
  const std::string text = m.dump(2) + '\n';
  const auto path = dir_ / "manifest.json";
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os << text;
  os.close();
  if (!os) throw IoError("failed to write " + path.string());
}

}  // namespace fibersim
