#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "fibersim/experiment.hpp"

namespace py = pybind11;
using namespace fibersim;

namespace {

py::array_t<std::complex<double>> to_array(const CVector& v) {
  py::array_t<std::complex<double>> a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

py::array_t<double> time_axis(const Grid& g) {
  py::array_t<double> a(static_cast<py::ssize_t>(g.size()));
  for (std::size_t k = 0; k < g.size(); ++k) a.mutable_data()[k] = g.time(k) * 1e12;
  return a;
}

py::dict measures_dict(const Envelope& e) {
  const PulseMeasures m = measures(e);
  py::dict d;
  d["z_m"] = e.z;
  d["energy_nJ"] = m.energy_nJ;
  d["peak_power_W"] = m.peak_power_W;
  d["fwhm_ps"] = m.fwhm_ps;
  d["mean_frequency_offset_THz"] = m.mean_frequency_offset_THz;
  return d;
}

ExperimentKind kind_of(const std::string& name) {
  const auto k = parse_experiment_kind(name);
  if (!k) throw py::value_error("unknown experiment '" + name + "'");
  return *k;
}

}  // namespace

PYBIND11_MODULE(_fibersim, m) {
  m.doc() = "Pump propagation and Sagnac-loop switching";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<FiberSpec>(m, "FiberSpec")
      .def(py::init<>())
      .def_readwrite("core_radius_um", &FiberSpec::core_radius_um)
      .def_readwrite("cladding_index", &FiberSpec::cladding_index)
      .def_readwrite("index_step", &FiberSpec::index_step)
      .def_readwrite("n2", &FiberSpec::n2)
      .def_readwrite("disp_S0", &FiberSpec::disp_S0)
      .def_readwrite("disp_lambda0_nm", &FiberSpec::disp_lambda0_nm)
      .def_readwrite("raman_fraction", &FiberSpec::raman_fraction)
      .def_readwrite("tau1_fs", &FiberSpec::tau1_fs)
      .def_readwrite("tau2_fs", &FiberSpec::tau2_fs)
      .def_readwrite("length_m", &FiberSpec::length_m)
      .def_readwrite("reference_wavelength_nm", &FiberSpec::reference_wavelength_nm);

  m.def("dispersion_D", [](double nm, const FiberSpec& f) { return dispersion_D(nm, f); }, py::arg("lambda_nm"),
        py::arg("fiber") = FiberSpec{}, "D in ps/(nm km)");
  m.def(
      "taylor_betas",
      [](double nm, int order, const FiberSpec& f) {
        const auto b = taylor_betas(nm, order, f);
        py::dict d;
        d["beta2_ps2_per_km"] = b.beta2;
        d["beta3_ps3_per_km"] = b.beta3;
        d["beta4_ps4_per_km"] = b.beta4;
        return d;
      },
      py::arg("lambda_nm"), py::arg("max_order") = 4, py::arg("fiber") = FiberSpec{});
  m.def("v_number", [](double nm, const FiberSpec& f) { return v_number(nm, f); }, py::arg("lambda_nm"),
        py::arg("fiber") = FiberSpec{});
  m.def(
      "effective_area_um2",
      [](double nm, const FiberSpec& f) { return lp01_effective_area(nm, f, ModeCheck::lp01_only); },
      py::arg("lambda_nm"), py::arg("fiber") = FiberSpec{});
  m.def(
      "kerr_coefficient",
      [](double nm, const FiberSpec& f) { return kerr_coefficient(nm, f, ModeCheck::lp01_only); },
      py::arg("lambda_nm"), py::arg("fiber") = FiberSpec{}, "gamma in 1/(W km)");
  m.def("xpm_coefficient", &xpm_coefficient, py::arg("fiber"), py::arg("pump_nm"), py::arg("signal_nm"));

  m.def(
      "propagate",
      [](double fwhm_ps, double energy_nJ, const FiberSpec& fiber, std::size_t n, double window_ps,
         bool raman, std::size_t snapshots) {
        const auto grid = make_grid(n, window_ps, fiber.reference_wavelength_nm);
        const Envelope in = gaussian_pulse(fwhm_ps, energy_nJ, grid);
        PropagationOptions o;
        o.include_raman = raman;
        o.snapshot_count = snapshots;
        PropagationResult r;
        {
          py::gil_scoped_release release;
          r = propagate(in, fiber, o);
        }
        py::dict d;
        d["t_ps"] = time_axis(*grid);
        d["input"] = to_array(in.field);
        d["output"] = to_array(r.output.field);
        d["input_measures"] = measures_dict(in);
        d["output_measures"] = measures_dict(r.output);
        d["accepted_steps"] = r.record.steps.size();
        d["warnings"] = r.record.warnings;
        return d;
      },
      py::arg("fwhm_ps"), py::arg("energy_nJ"), py::arg("fiber") = FiberSpec{}, py::arg("n") = 8192,
      py::arg("window_ps") = 128.0, py::arg("raman") = true, py::arg("snapshots") = 2,
      "Propagate a centred Gaussian pump; fields in sqrt(W).");

  m.def(
      "switch_curve",
      [](std::vector<double> energies_nJ, double length_m, double fwhm_ps, double raman_fraction, std::size_t workers) {
        SwitchSetup s;
        s.pump_fwhm_ps = fwhm_ps;
        s.fiber.raman_fraction = raman_fraction;
        s.options.include_raman = raman_fraction > 0.0;
        s.workers = workers;
        SwitchCurve c;
        {
          py::gil_scoped_release release;
          c = energy_sweep(s, length_m, energies_nJ);
        }
        std::vector<std::tuple<double, double, double, double>> rows;
        for (const auto& p : c.points) rows.emplace_back(p.pump_energy_nJ, p.T, p.R, p.phase_at_signal_center);
        return rows;
      },
      py::arg("energies_nJ"), py::arg("length_m") = 100.0, py::arg("fwhm_ps") = 5.0, py::arg("raman_fraction") = 0.18,
      py::arg("workers") = 0, "Rows of (energy_nJ, T, R, phase_rad).");

  m.def(
      "energy_span",
      [](std::vector<double> energies_nJ, std::vector<double> T, double theta) {
        if (energies_nJ.size() != T.size()) throw py::value_error("energies and T differ in length");
        SwitchCurve c;
        for (std::size_t i = 0; i < T.size(); ++i) c.points.push_back({energies_nJ[i], T[i], 1.0 - T[i], 0.0});
        const SpanResult r = span_for_threshold(c, theta);
        py::dict d;
        d["found"] = r.found;
        d["E_lo_nJ"] = r.E_lo;
        d["E_hi_nJ"] = r.E_hi;
        d["width_nJ"] = r.width();
        d["open_low"] = r.open_low;
        d["open_high"] = r.open_high;
        return d;
      },
      py::arg("energies_nJ"), py::arg("T"), py::arg("theta") = 0.95,
      "Span of the first run with T >= theta, interpolated between samples.");

  m.def(
      "resolve_config",
      [](const std::string& text, const std::string& kind, std::vector<std::string> overrides) {
        const RunConfig c = parse_config(text, "<string>", kind.empty() ? std::nullopt : std::optional(kind_of(kind)),
                                         overrides);
        return to_json(c).dump();
      },
      py::arg("text"), py::arg("kind") = "", py::arg("overrides") = std::vector<std::string>{},
      "Validated config with every default filled in, as JSON text.");
  m.def(
      "run",
      [](const std::string& text, const std::string& kind, const std::string& output_dir) {
        RunConfig c = parse_config(text, "<string>", kind.empty() ? std::nullopt : std::optional(kind_of(kind)));
        if (!output_dir.empty()) c.output_dir = output_dir;
        std::ostringstream log;
        int code;
        {
          py::gil_scoped_release release;
          code = run(c, log);
        }
        return std::make_pair(code, log.str());
      },
      py::arg("text"), py::arg("kind") = "", py::arg("output_dir") = "",
      "Run an experiment; returns (exit_code, log).");

  m.attr("__version__") = kVersion;
}
