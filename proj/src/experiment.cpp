#include "fibersim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "fibersim/constants.hpp"

namespace fibersim {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

const std::pair<ExperimentKind, std::string_view> kKinds[] = {
    {ExperimentKind::propagate, "propagate"}, {ExperimentKind::sweep, "sweep"},
    {ExperimentKind::span, "span"},           {ExperimentKind::span_grid, "span-grid"},
    {ExperimentKind::map, "map"},             {ExperimentKind::compare, "compare"},
};

}  // namespace

std::string_view to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kKinds)
    if (k == kind) return name;
  return "unknown";
}

std::optional<ExperimentKind> parse_experiment_kind(std::string_view name) {
  for (const auto& [k, n] : kKinds)
    if (n == name) return k;
  return std::nullopt;
}

ConfigError::ConfigError(std::string where, std::string field, const std::string& message)
    : std::runtime_error(where + ": " + (field.empty() ? "" : field + ": ") + message),
      where_(std::move(where)),
      field_(std::move(field)) {}

RunConfig default_config(ExperimentKind kind) {
  RunConfig c;
  c.kind = kind;
  switch (kind) {
    case ExperimentKind::sweep:
    case ExperimentKind::span:
    case ExperimentKind::span_grid:
      c.solver = SwitchSetup::default_switch_options();
      c.raman_fractions = {0.0, 0.18};
      break;
    default:
      break;
  }
  if (kind == ExperimentKind::span_grid) {
    c.lengths_m = {100, 200, 300, 400, 500};
    c.pump_fwhms_ps = {4, 5, 6};
  }
  return c;
}

// ---- parsing ----------------------------------------------------------------

namespace {

/// Maps dotted field paths to source locations.
class Locator {
 public:
  Locator(std::string_view text, std::string_view source) : text_(text), source_(source) {}

  void mark_override(const std::string& path) { overrides_.insert(path); }

  std::string where(const std::string& path) const {
    // An override of the field or any parent wins.
    for (std::string p = path;;) {
      if (overrides_.count(p)) return "--set " + p;
      const auto dot = p.rfind('.');
      if (dot == std::string::npos) break;
      p.resize(dot);
    }
    std::size_t pos = 0;
    std::size_t start = 0;
    bool found = !path.empty();
    while (found && start <= path.size()) {
      const auto dot = path.find('.', start);
      const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      const auto hit = text_.find('"' + key + '"', pos);
      if (hit == std::string_view::npos) {
        found = false;
        break;
      }
      pos = hit + key.size() + 2;
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    if (!found) return std::string(source_);
    return std::string(source_) + ":" + std::to_string(line_of(pos));
  }

  std::size_t line_of(std::size_t byte) const {
    return 1 + static_cast<std::size_t>(std::count(text_.begin(), text_.begin() + std::min(byte, text_.size()), '\n'));
  }

  [[noreturn]] void fail(const std::string& path, const std::string& message) const {
    throw ConfigError(where(path), path, message);
  }

 private:
  std::string_view text_;
  std::string_view source_;
  std::set<std::string> overrides_;
};

/// Reads the known keys of one JSON object; anything left over is rejected.
class Section {
 public:
  Section(const json* obj, std::string path, const Locator& loc) : obj_(obj), path_(std::move(path)), loc_(loc) {
    if (obj_ && !obj_->is_object()) loc_.fail(path_, "expected an object");
  }

  std::string key_path(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const char* key) {
    if (!obj_) return nullptr;
    const auto it = obj_->find(key);
    if (it == obj_->end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  void number(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) loc_.fail(key_path(key), "expected a number");
      out = v->get<double>();
      if (!std::isfinite(out)) loc_.fail(key_path(key), "expected a finite number");
    }
  }

  void optional_number(const char* key, std::optional<double>& out) {
    if (const json* v = find(key)) {
      if (v->is_null()) {
        out.reset();
        return;
      }
      double x = 0.0;
      number(key, x);
      out = x;
    }
  }

  void count(const char* key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || v->get<long long>() < 0)
        loc_.fail(key_path(key), "expected a non-negative integer");
      out = v->get<std::size_t>();
    }
  }

  void integer(const char* key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) loc_.fail(key_path(key), "expected an integer");
      out = v->get<int>();
    }
  }

  void flag(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) loc_.fail(key_path(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void text(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) loc_.fail(key_path(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void numbers(const char* key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) loc_.fail(key_path(key), "expected an array of numbers");
      out.clear();
      for (const auto& x : *v) {
        if (!x.is_number()) loc_.fail(key_path(key), "expected an array of numbers");
        out.push_back(x.get<double>());
      }
    }
  }

  template <class Enum>
  void choice(const char* key, Enum& out, std::initializer_list<std::pair<Enum, const char*>> options) {
    std::string s;
    text(key, s);
    if (s.empty()) return;
    for (const auto& [value, name] : options)
      if (s == name) {
        out = value;
        return;
      }
    std::string allowed;
    for (const auto& o : options) allowed += (allowed.empty() ? "" : ", ") + std::string(o.second);
    loc_.fail(key_path(key), "unknown value '" + s + "' (expected one of: " + allowed + ")");
  }

  Section child(const char* key) { return Section(find(key), key_path(key), loc_); }

  /// Rejects keys that were never read.
  void finish() const {
    if (!obj_) return;
    for (const auto& item : obj_->items())
      if (!seen_.count(item.key())) loc_.fail(key_path(item.key().c_str()), "unknown key");
  }

  bool present() const { return obj_ != nullptr; }
  const std::string& path() const { return path_; }

 private:
  const json* obj_;
  std::string path_;
  const Locator& loc_;
  std::set<std::string> seen_;
};

void apply_override(json& root, const std::string& spec, Locator& loc) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set " + spec, "", "expected key=value");
  const std::string key = spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &root;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("--set " + key, key, "empty key component");
    if (!node->is_object()) throw ConfigError("--set " + key, key, "parent is not an object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    if (!node->contains(part) || (*node)[part].is_null()) (*node)[part] = json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
  loc.mark_override(key);
}

void read_fiber(Section s, FiberSpec& f) {
  s.number("core_radius_um", f.core_radius_um);
  s.number("cladding_index", f.cladding_index);
  s.number("index_step", f.index_step);
  s.number("n2", f.n2);
  s.number("loss_A_dB_km", f.loss_A_dB_km);
  s.number("loss_B_um", f.loss_B_um);
  s.number("loss_C_dB_um4_km", f.loss_C_dB_um4_km);
  s.number("disp_S0", f.disp_S0);
  s.number("disp_lambda0_nm", f.disp_lambda0_nm);
  s.number("raman_fraction", f.raman_fraction);
  s.number("tau1_fs", f.tau1_fs);
  s.number("tau2_fs", f.tau2_fs);
  s.number("length_m", f.length_m);
  s.number("reference_wavelength_nm", f.reference_wavelength_nm);
  s.finish();
}

}  // namespace

RunConfig parse_config(std::string_view text, std::string_view source_name, std::optional<ExperimentKind> kind,
                       const std::vector<std::string>& overrides) {
  Locator loc(text, source_name);
  json root = json::object();
  if (!text.empty()) {
    try {
      root = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string(source_name) + ":" + std::to_string(loc.line_of(e.byte ? e.byte - 1 : 0)), "",
                        std::string("syntax error: ") + e.what());
    }
  }
  if (!root.is_object()) throw ConfigError(std::string(source_name), "", "top level must be an object");
  for (const auto& spec : overrides) apply_override(root, spec, loc);

  Section top(&root, "", loc);
  std::string kind_name;
  top.text("experiment", kind_name);
  std::optional<ExperimentKind> file_kind;
  if (!kind_name.empty()) {
    file_kind = parse_experiment_kind(kind_name);
    if (!file_kind) loc.fail("experiment", "unknown experiment '" + kind_name + "'");
  }
  if (kind && file_kind && *kind != *file_kind)
    loc.fail("experiment", "config describes '" + kind_name + "' but the command is '" +
                               std::string(to_string(*kind)) + "'");
  if (!kind && !file_kind) loc.fail("experiment", "no experiment kind given");

  RunConfig c = default_config(kind ? *kind : *file_kind);

  std::string out_dir;
  top.text("output_dir", out_dir);
  if (!out_dir.empty()) c.output_dir = out_dir;
  top.count("workers", c.workers);

  read_fiber(top.child("fiber"), c.fiber);

  {
    Section g = top.child("grid");
    g.count("n", c.grid.n);
    g.number("window_ps", c.grid.window_ps);
    g.optional_number("pump_center_ps", c.grid.pump_center_ps);
    g.number("absorber_width_ps", c.grid.absorber_width_ps);
    g.finish();
  }

  {
    Section p = top.child("pump");
    p.number("fwhm_ps", c.pump_fwhm_ps);
    p.number("energy_nJ", c.pump_energy_nJ);
    const bool has_list = p.present() && p.find("energies_nJ") != nullptr;
    p.numbers("energies_nJ", c.energies_nJ);
    Section range = p.child("energy_range_nJ");
    if (range.present()) {
      if (has_list) loc.fail("pump.energy_range_nJ", "give either energies_nJ or energy_range_nJ, not both");
      double start = 0.0, stop = -1.0, step = 0.0;
      range.number("start", start);
      range.number("stop", stop);
      range.number("step", step);
      range.finish();
      if (!(step > 0.0)) loc.fail("pump.energy_range_nJ.step", "must be positive");
      c.energies_nJ.clear();
      if (stop >= start) {
        const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
        for (std::size_t i = 0; i < count; ++i)
          c.energies_nJ.push_back(std::round((start + static_cast<double>(i) * step) * 1e12) / 1e12);
      }
    }
    p.finish();
  }

  {
    Section s = top.child("signal");
    s.number("wavelength_nm", c.signal.wavelength_nm);
    s.number("fwhm_ps", c.signal.fwhm_ps);
    s.optional_number("delay_ps", c.signal.delay_ps);
    s.flag("walk_off", c.signal.walk_off_enabled);
    s.flag("maximize_over_delay", c.signal.maximize_over_delay);
    s.finish();
  }

  {
    Section s = top.child("solver");
    PropagationOptions& o = c.solver;
    s.choice("scheme", o.scheme, {{Scheme::rk4ip, "rk4ip"}, {Scheme::split_step, "split_step"}});
    s.choice("step_control", o.step_control, {{StepControl::adaptive, "adaptive"}, {StepControl::fixed, "fixed"}});
    s.choice("estimator", o.estimator,
             {{ErrorEstimator::step_doubling, "step_doubling"}, {ErrorEstimator::embedded, "embedded"}});
    s.number("tolerance", o.local_error_target);
    s.number("fixed_dz_m", o.fixed_dz_m);
    s.number("initial_dz_m", o.initial_dz_m);
    s.number("max_dz_m", o.max_dz_m);
    s.flag("shock", o.include_shock);
    s.flag("raman", o.include_raman);
    s.flag("loss", o.include_loss);
    s.flag("wavelength_dependent_loss", o.wavelength_dependent_loss);
    s.flag("frequency_dependent_area", o.frequency_dependent_area);
    s.integer("max_dispersion_order", o.max_dispersion_order);
    s.count("snapshot_count", o.snapshot_count);
    s.optional_number("gamma_per_W_km", o.gamma_override);
    s.number("absorber_strength_per_m", o.absorber_strength_per_m);
    s.count("max_steps", o.max_steps);
    if (const json* d = s.find("dispersion"); d && !d->is_null()) {
      Section ds(d, s.key_path("dispersion"), loc);
      DispersionCoeffs betas;
      betas.lambda_ref_nm = c.fiber.reference_wavelength_nm;
      betas.max_order = o.max_dispersion_order;
      ds.number("beta2_ps2_per_km", betas.beta2);
      ds.number("beta3_ps3_per_km", betas.beta3);
      ds.number("beta4_ps4_per_km", betas.beta4);
      ds.finish();
      o.dispersion_override = betas;
    } else {
      o.dispersion_override.reset();
    }
    s.finish();
  }

  {
    Section s = top.child("study");
    s.numbers("lengths_m", c.lengths_m);
    s.numbers("raman_fractions", c.raman_fractions);
    s.numbers("pump_fwhms_ps", c.pump_fwhms_ps);
    s.number("theta", c.theta);
    s.number("resolution_nJ", c.resolution_nJ);
    s.finish();
  }

  {
    Section s = top.child("map");
    s.number("floor_dB", c.map_floor_dB);
    s.count("stride", c.map_stride);
    s.flag("export_snapshots", c.export_snapshots);
    s.finish();
  }
  top.finish();

  // ---- semantic checks ----
  const bool study = c.kind == ExperimentKind::sweep || c.kind == ExperimentKind::span ||
                     c.kind == ExperimentKind::span_grid;
  if (study && c.lengths_m.empty() && c.kind != ExperimentKind::span_grid) c.lengths_m = {c.fiber.length_m};

  auto guard = [&](const char* path, auto&& check) {
    try {
      check();
    } catch (const DomainError& e) {
      loc.fail(path, e.what());
    } catch (const MultimodeError& e) {
      loc.fail(path, e.what());
    }
  };
  guard("fiber", [&] { c.fiber.validate(); });
  guard("solver", [&] { c.solver.validate(); });
  guard("signal", [&] { c.signal.validate(); });
  if (!(c.pump_fwhm_ps > 0.0)) loc.fail("pump.fwhm_ps", "must be positive");
  if (!(c.pump_energy_nJ >= 0.0)) loc.fail("pump.energy_nJ", "must be non-negative");

  if (study) {
    if (c.energies_nJ.empty()) loc.fail("pump.energies_nJ", "energy list is empty");
    for (std::size_t i = 0; i < c.energies_nJ.size(); ++i) {
      if (!(c.energies_nJ[i] >= 0.0)) loc.fail("pump.energies_nJ", "energies must be non-negative");
      if (i > 0 && !(c.energies_nJ[i] > c.energies_nJ[i - 1]))
        loc.fail("pump.energies_nJ", "energies must be strictly increasing");
    }
    if (c.lengths_m.empty()) loc.fail("study.lengths_m", "length list is empty");
    for (double L : c.lengths_m)
      if (!(L > 0.0)) loc.fail("study.lengths_m", "lengths must be positive");
    if (c.raman_fractions.empty()) loc.fail("study.raman_fractions", "list is empty");
    for (double f : c.raman_fractions)
      if (!(f >= 0.0 && f < 1.0)) loc.fail("study.raman_fractions", "fractions must lie in [0, 1)");
    if (c.kind == ExperimentKind::span_grid) {
      if (c.pump_fwhms_ps.empty()) loc.fail("study.pump_fwhms_ps", "list is empty");
      for (double w : c.pump_fwhms_ps)
        if (!(w > 0.0)) loc.fail("study.pump_fwhms_ps", "widths must be positive");
    }
    if (!(c.theta > 0.0 && c.theta < 1.0)) loc.fail("study.theta", "must lie in (0, 1)");
    if (!(c.resolution_nJ >= 0.0)) loc.fail("study.resolution_nJ", "must be non-negative");
  }
  if (c.kind == ExperimentKind::map) {
    if (c.solver.snapshot_count < 2) loc.fail("solver.snapshot_count", "a map needs at least two snapshots");
    if (c.map_stride == 0) loc.fail("map.stride", "must be positive");
    if (!(c.map_floor_dB < 0.0)) loc.fail("map.floor_dB", "must be negative");
  }

  // Grid and pulse preconditions for every propagation the run will make.
  std::vector<double> widths = c.kind == ExperimentKind::span_grid ? c.pump_fwhms_ps : std::vector{c.pump_fwhm_ps};
  const double longest = study ? *std::max_element(c.lengths_m.begin(), c.lengths_m.end()) : c.fiber.length_m;
  guard("grid", [&] {
    const double walk = c.signal.walk_off(c.fiber, c.fiber.reference_wavelength_nm);
    for (double w : widths) {
      const auto g = c.grid.resolve(longest, walk, w, true);
      const auto grid = make_grid(g.n, g.window_ps, c.fiber.reference_wavelength_nm);
      (void)gaussian_pulse(w, 1.0, grid, g.pump_center_ps);
      if (2.0 * g.absorber_width_ps >= g.window_ps) throw DomainError("absorbing layers cover the whole window");
    }
  });
  return c;
}

ojson to_json(const RunConfig& c) {
  ojson j;
  j["experiment"] = std::string(to_string(c.kind));
  j["output_dir"] = c.output_dir.string();
  j["workers"] = c.workers;
  const FiberSpec& f = c.fiber;
  j["fiber"] = {{"core_radius_um", f.core_radius_um},
                {"cladding_index", f.cladding_index},
                {"index_step", f.index_step},
                {"n2", f.n2},
                {"loss_A_dB_km", f.loss_A_dB_km},
                {"loss_B_um", f.loss_B_um},
                {"loss_C_dB_um4_km", f.loss_C_dB_um4_km},
                {"disp_S0", f.disp_S0},
                {"disp_lambda0_nm", f.disp_lambda0_nm},
                {"raman_fraction", f.raman_fraction},
                {"tau1_fs", f.tau1_fs},
                {"tau2_fs", f.tau2_fs},
                {"length_m", f.length_m},
                {"reference_wavelength_nm", f.reference_wavelength_nm}};
  ojson grid;
  grid["n"] = c.grid.n;
  grid["window_ps"] = c.grid.window_ps;
  grid["pump_center_ps"] = c.grid.pump_center_ps ? ojson(*c.grid.pump_center_ps) : ojson(nullptr);
  grid["absorber_width_ps"] = c.grid.absorber_width_ps;
  j["grid"] = grid;
  j["pump"] = {{"fwhm_ps", c.pump_fwhm_ps}, {"energy_nJ", c.pump_energy_nJ}, {"energies_nJ", c.energies_nJ}};
  ojson signal;
  signal["wavelength_nm"] = c.signal.wavelength_nm;
  signal["fwhm_ps"] = c.signal.fwhm_ps;
  signal["delay_ps"] = c.signal.delay_ps ? ojson(*c.signal.delay_ps) : ojson(nullptr);
  signal["walk_off"] = c.signal.walk_off_enabled;
  signal["maximize_over_delay"] = c.signal.maximize_over_delay;
  j["signal"] = signal;

  const PropagationOptions& o = c.solver;
  ojson s;
  s["scheme"] = o.scheme == Scheme::rk4ip ? "rk4ip" : "split_step";
  s["step_control"] = o.step_control == StepControl::adaptive ? "adaptive" : "fixed";
  s["estimator"] = o.estimator == ErrorEstimator::embedded ? "embedded" : "step_doubling";
  s["tolerance"] = o.local_error_target;
  s["fixed_dz_m"] = o.fixed_dz_m;
  s["initial_dz_m"] = o.initial_dz_m;
  s["max_dz_m"] = o.max_dz_m;
  s["shock"] = o.include_shock;
  s["raman"] = o.include_raman;
  s["loss"] = o.include_loss;
  s["wavelength_dependent_loss"] = o.wavelength_dependent_loss;
  s["frequency_dependent_area"] = o.frequency_dependent_area;
  s["max_dispersion_order"] = o.max_dispersion_order;
  s["snapshot_count"] = o.snapshot_count;
  s["gamma_per_W_km"] = o.gamma_override ? ojson(*o.gamma_override) : ojson(nullptr);
  s["absorber_strength_per_m"] = o.absorber_strength_per_m;
  s["max_steps"] = o.max_steps;
  if (o.dispersion_override) {
    s["dispersion"] = {{"beta2_ps2_per_km", o.dispersion_override->beta2},
                       {"beta3_ps3_per_km", o.dispersion_override->beta3},
                       {"beta4_ps4_per_km", o.dispersion_override->beta4}};
  } else {
    s["dispersion"] = nullptr;
  }
  j["solver"] = s;
  j["study"] = {{"lengths_m", c.lengths_m},
                {"raman_fractions", c.raman_fractions},
                {"pump_fwhms_ps", c.pump_fwhms_ps},
                {"theta", c.theta},
                {"resolution_nJ", c.resolution_nJ}};
  j["map"] = {{"floor_dB", c.map_floor_dB}, {"stride", c.map_stride}, {"export_snapshots", c.export_snapshots}};
  return j;
}

// ---- running ----------------------------------------------------------------

std::string compare_overlay_csv(const Envelope& input, const Envelope& raman, const Envelope& kerr,
                                double pump_center_ps) {
  if (!input.grid || !raman.grid || !kerr.grid) throw DomainError("overlay: envelope without grid");
  const Grid& g = *input.grid;
  for (const Envelope* e : {&raman, &kerr})
    if (e->grid->size() != g.size() || e->grid->window_ps() != g.window_ps())
      throw DomainError("overlay: runs use different grids");
  const double peak = peak_power_W(input);
  if (!(peak > 0.0)) throw DomainError("overlay: input pulse is zero");
  std::string out = "t_ps,P_raman_norm,P_kerr_norm,P_input_norm\n";
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double row[] = {g.time(k) / units::ps - pump_center_ps, std::norm(raman.field[k]) / peak,
                          std::norm(kerr.field[k]) / peak, std::norm(input.field[k]) / peak};
    out += csv_row(row);
  }
  return out;
}

namespace {

std::string label(double x) { return format_number(x); }

std::string curve_name(double length_m, double fr, std::optional<double> fwhm = std::nullopt) {
  std::string name = "switch_L" + label(length_m) + "m";
  if (fwhm) name += "_w" + label(*fwhm) + "ps";
  return name + "_fR" + label(fr) + ".csv";
}

std::size_t worker_count(const RunConfig& c) {
  if (std::getenv("FIBERSIM_WORKERS")) return default_worker_count();
  return c.workers ? c.workers : default_worker_count();
}

SwitchSetup switch_setup(const RunConfig& c) {
  SwitchSetup s;
  s.fiber = c.fiber;
  s.pump_fwhm_ps = c.pump_fwhm_ps;
  s.signal = c.signal;
  s.grid = c.grid;
  s.options = c.solver;
  s.workers = worker_count(c);
  return s;
}

struct SingleRun {
  Envelope input;
  PropagationResult result;
  double pump_center_ps = 0.0;
};

/// One pump propagation over the configured fiber on the switching grid.
/// `grid_for_raman` sizes the window for Raman-delayed content.
SingleRun single_run(const RunConfig& c, double raman_fraction, bool grid_for_raman) {
  FiberSpec fiber = c.fiber;
  fiber.raman_fraction = raman_fraction;
  PropagationOptions opts = c.solver;
  opts.include_raman = c.solver.include_raman && raman_fraction > 0.0;
  const double walk = c.signal.walk_off(fiber, fiber.reference_wavelength_nm);
  const auto g = c.grid.resolve(fiber.length_m, walk, c.pump_fwhm_ps, grid_for_raman);
  opts.absorber_width_ps = g.absorber_width_ps;
  const auto grid = make_grid(g.n, g.window_ps, fiber.reference_wavelength_nm);
  SingleRun r;
  r.pump_center_ps = g.pump_center_ps;
  r.input = gaussian_pulse(c.pump_fwhm_ps, c.pump_energy_nJ, grid, g.pump_center_ps);
  r.result = propagate(r.input, fiber, opts);
  return r;
}

ojson measures_json(const Envelope& env) {
  const auto m = measures(env);
  return {{"z_m", env.z},
          {"energy_nJ", m.energy_nJ},
          {"peak_power_W", m.peak_power_W},
          {"fwhm_ps", m.fwhm_ps},
          {"mean_frequency_offset_THz", m.mean_frequency_offset_THz}};
}

ojson record_json(const PropagationRecord& rec) {
  return {{"accepted_steps", rec.steps.size()},
          {"rejected_steps", rec.rejected_steps},
          {"max_band_edge_fraction", rec.max_band_edge_fraction},
          {"max_time_edge_fraction", rec.max_time_edge_fraction},
          {"absorbed_energy_nJ", rec.absorbed_energy_nJ},
          {"warnings", rec.warnings}};
}

void write_json(ArtifactSink& sink, const std::string& name, const ojson& j) { sink.write(name, j.dump(2) + '\n'); }

void run_propagate(const RunConfig& c, ArtifactSink& sink, std::vector<std::string>& warnings, std::ostream& log) {
  const double fr = c.solver.include_raman ? c.fiber.raman_fraction : 0.0;
  log << "propagating " << c.pump_energy_nJ << " nJ over " << c.fiber.length_m << " m\n";
  const SingleRun r = single_run(c, fr, fr > 0.0);
  warnings.insert(warnings.end(), r.result.record.warnings.begin(), r.result.record.warnings.end());
  sink.write("input.csv", envelope_csv(r.input));
  sink.write("output.csv", envelope_csv(r.result.output));
  sink.write("steps.csv", step_history_csv(r.result.record));
  write_json(sink, "summary.json",
             {{"pump_center_ps", r.pump_center_ps},
              {"input", measures_json(r.input)},
              {"output", measures_json(r.result.output)},
              {"record", record_json(r.result.record)}});
}

void run_map(const RunConfig& c, ArtifactSink& sink, std::vector<std::string>& warnings, std::ostream& log) {
  const double fr = c.solver.include_raman ? c.fiber.raman_fraction : 0.0;
  log << "propagating " << c.pump_energy_nJ << " nJ over " << c.fiber.length_m << " m with "
      << c.solver.snapshot_count << " snapshots\n";
  const SingleRun r = single_run(c, fr, fr > 0.0);
  const auto& rec = r.result.record;
  warnings.insert(warnings.end(), rec.warnings.begin(), rec.warnings.end());
  for (const auto domain : {MapDomain::time, MapDomain::wavelength}) {
    const std::string stem = domain == MapDomain::time ? "map_time" : "map_wavelength";
    const EvolutionMap map = evolution_map(rec, domain, c.map_floor_dB);
    sink.write(stem + ".csv", evolution_map_csv(map, c.map_stride));
    write_json(sink, stem + ".json", evolution_map_sidecar(map, c.map_stride, stem + ".csv"));
  }
  sink.write("steps.csv", step_history_csv(rec));
  sink.write("input.csv", envelope_csv(r.input));
  sink.write("output.csv", envelope_csv(r.result.output));
  if (c.export_snapshots) {
    for (std::size_t i = 0; i < rec.snapshots.size(); ++i) {
      char name[48];
      std::snprintf(name, sizeof name, "snapshots/snapshot_%04zu.csv", i);
      sink.write(name, envelope_csv(rec.snapshots[i]));
    }
  }
  ojson snaps = ojson::array();
  for (const auto& s : rec.snapshots) snaps.push_back(measures_json(s));
  write_json(sink, "summary.json",
             {{"pump_center_ps", r.pump_center_ps}, {"record", record_json(rec)}, {"snapshots", snaps}});
}

void run_compare(const RunConfig& c, ArtifactSink& sink, std::vector<std::string>& warnings, std::ostream& log) {
  log << "propagating " << c.pump_energy_nJ << " nJ with f_R = " << c.fiber.raman_fraction << " and f_R = 0\n";
  const SingleRun raman = single_run(c, c.fiber.raman_fraction, true);
  const SingleRun kerr = single_run(c, 0.0, true);
  for (const auto* r : {&raman, &kerr})
    warnings.insert(warnings.end(), r->result.record.warnings.begin(), r->result.record.warnings.end());
  sink.write("overlay.csv",
             compare_overlay_csv(raman.input, raman.result.output, kerr.result.output, raman.pump_center_ps));
  sink.write("output_raman.csv", envelope_csv(raman.result.output));
  sink.write("output_kerr.csv", envelope_csv(kerr.result.output));
  write_json(sink, "summary.json",
             {{"pump_center_ps", raman.pump_center_ps},
              {"input", measures_json(raman.input)},
              {"raman", {{"output", measures_json(raman.result.output)}, {"record", record_json(raman.result.record)}}},
              {"kerr", {{"output", measures_json(kerr.result.output)}, {"record", record_json(kerr.result.record)}}}});
}

void run_study(const RunConfig& c, ArtifactSink& sink, bool& partial, std::ostream& log) {
  const SwitchSetup base = switch_setup(c);
  if (c.kind == ExperimentKind::sweep) {
    for (double fr : c.raman_fractions) {
      SwitchSetup s = base;
      s.fiber.raman_fraction = fr;
      s.options.include_raman = c.solver.include_raman && fr > 0.0;
      log << "sweep f_R = " << fr << ": " << c.energies_nJ.size() << " energies\n";
      const auto curves = energy_sweep_lengths(s, c.lengths_m, c.energies_nJ);
      for (const auto& curve : curves) sink.write(curve_name(curve.length_m, fr), switch_curve_csv(curve));
    }
    return;
  }

  SpanGridRequest req;
  req.lengths_m = c.lengths_m;
  req.raman_fractions = c.raman_fractions;
  req.pump_fwhms_ps = c.kind == ExperimentKind::span_grid ? c.pump_fwhms_ps : std::vector{c.pump_fwhm_ps};
  req.energies_nJ = c.energies_nJ;
  req.theta = c.theta;
  req.resolution_nJ = c.resolution_nJ;
  SwitchSetup s = base;
  s.options.include_raman = c.solver.include_raman;
  log << "span study: " << req.lengths_m.size() << " lengths x " << req.pump_fwhms_ps.size() << " widths x "
      << req.raman_fractions.size() << " Raman fractions, " << req.energies_nJ.size() << " energies\n";
  const auto cells = span_vs_length(s, req);
  for (const auto& cell : cells) {
    if (cell.error) {
      partial = true;
      log << "cell L = " << cell.length_m << " m, " << cell.pump_fwhm_ps << " ps, f_R = " << cell.raman_fraction
          << " failed: " << *cell.error << '\n';
      continue;
    }
    const auto fwhm = c.kind == ExperimentKind::span_grid ? std::optional(cell.pump_fwhm_ps) : std::nullopt;
    sink.write(curve_name(cell.length_m, cell.raman_fraction, fwhm), switch_curve_csv(cell.curve));
  }
  sink.write("spans.csv", span_summary_csv(cells), partial);
}

}  // namespace

int run(const RunConfig& config, std::ostream& log) {
  std::optional<ArtifactSink> sink;
  try {
    sink.emplace(config.output_dir);
  } catch (const IoError& e) {
    log << "error: " << e.what() << '\n';
    return exit_io;
  }

  int code = exit_ok;
  std::string error;
  bool partial = false;
  std::vector<std::string> warnings;
  try {
    switch (config.kind) {
      case ExperimentKind::propagate:
        run_propagate(config, *sink, warnings, log);
        break;
      case ExperimentKind::map:
        run_map(config, *sink, warnings, log);
        break;
      case ExperimentKind::compare:
        run_compare(config, *sink, warnings, log);
        break;
      case ExperimentKind::sweep:
      case ExperimentKind::span:
      case ExperimentKind::span_grid:
        run_study(config, *sink, partial, log);
        break;
    }
    if (partial) {
      code = exit_solver;
      error = "some span cells failed; see spans.csv";
    }
  } catch (const IoError& e) {
    code = exit_io;
    error = e.what();
  } catch (const SolverError& e) {
    code = exit_solver;
    error = e.what();
  } catch (const DomainError& e) {
    code = exit_config;
    error = e.what();
  } catch (const MultimodeError& e) {
    code = exit_config;
    error = e.what();
  } catch (const std::exception& e) {
    code = exit_solver;
    error = e.what();
  }
  for (const auto& w : warnings) log << "warning: " << w << '\n';
  if (!error.empty()) log << "error: " << error << '\n';

  ojson header;
  header["tool"] = "fibersim";
  header["version"] = kVersion;
  header["experiment"] = std::string(to_string(config.kind));
  header["status"] = code == exit_ok ? "complete" : (partial ? "partial" : "failed");
  header["error"] = error.empty() ? ojson(nullptr) : ojson(error);
  header["warnings"] = warnings;
  header["config"] = to_json(config);
  try {
    sink->write_manifest(header);
  } catch (const IoError& e) {
    log << "error: " << e.what() << '\n';
    return exit_io;
  }
  return code;
}

}  // namespace fibersim
