#include "fibersim/sagnac.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "fibersim/constants.hpp"

namespace fibersim {

void SignalSpec::validate() const {
  if (!(fwhm_ps > 0.0)) throw DomainError("signal FWHM must be positive");
  if (!(wavelength_nm > 0.0)) throw DomainError("signal wavelength must be positive");
}

double SignalSpec::walk_off(const FiberSpec& fiber, double pump_nm) const {
  return walk_off_enabled ? group_delay_difference(wavelength_nm, pump_nm, fiber) : 0.0;
}

double SignalSpec::resolved_delay_ps(const FiberSpec& fiber, double pump_nm, double length_m) const {
  if (delay_ps) return *delay_ps;
  return -0.5 * walk_off(fiber, pump_nm) * length_m / units::ps;
}

double xpm_coefficient(const FiberSpec& fiber, double pump_nm, double signal_nm) {
  const double area = lp01_overlap_area(pump_nm, signal_nm, fiber, ModeCheck::lp01_only) * units::um * units::um;
  return 2.0 * kPi * fiber.n2 / (signal_nm * units::nm * area) * units::km;
}

XpmAccumulator::XpmAccumulator(GridPtr grid, double delay_ps, double walk_off_s_per_m, double gamma_per_W_km,
                               double length_m, double pump_center_ps)
    : grid_(std::move(grid)),
      delay_ps_(delay_ps),
      pump_center_ps_(pump_center_ps),
      walk_off_(walk_off_s_per_m),
      gamma_(gamma_per_W_km / units::km),
      length_(length_m),
      last_(grid_->size()),
      current_(grid_->size()),
      phi_(grid_->size(), 0.0) {
  if (!(length_m > 0.0)) throw DomainError("XPM length must be positive");
}

void XpmAccumulator::sample(double z_m, std::span<const cplx> field, std::vector<double>& out) const {
  const std::size_t n = grid_->size();
  if (field.size() != n) throw DomainError("XPM accumulator: field does not match the grid");
  const double dt = grid_->dt();
  // Pump-frame sample position of signal sample k is k + shift.
  const double shift = ((pump_center_ps_ + delay_ps_) * units::ps + walk_off_ * z_m) / dt;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = static_cast<double>(k) + shift;
    if (x < 0.0 || x > static_cast<double>(n - 1)) {
      out[k] = 0.0;
      continue;
    }
    const auto i = static_cast<std::size_t>(x);
    const double f = x - static_cast<double>(i);
    const double p0 = std::norm(field[i]);
    const double p1 = i + 1 < n ? std::norm(field[i + 1]) : 0.0;
    out[k] = (1.0 - f) * p0 + f * p1;
  }
}

void XpmAccumulator::observe(double z_m, std::span<const cplx> field) {
  if (done_) return;
  if (!started_) {
    if (z_m != 0.0) throw DomainError("XPM accumulation must start at z = 0");
    sample(0.0, field, last_);
    started_ = true;
    last_z_ = 0.0;
    return;
  }
  if (!(z_m > last_z_)) throw DomainError("XPM accumulator: z must increase");
  sample(z_m, field, current_);
  double dz = z_m - last_z_;
  if (z_m >= length_) {
    const double frac = (length_ - last_z_) / dz;
    for (std::size_t k = 0; k < current_.size(); ++k) current_[k] = last_[k] + frac * (current_[k] - last_[k]);
    dz = length_ - last_z_;
    done_ = true;
  }
  // 2 gamma * trapezoid
  const double w = gamma_ * dz;
  for (std::size_t k = 0; k < phi_.size(); ++k) phi_[k] += w * (last_[k] + current_[k]);
  std::swap(last_, current_);
  last_z_ = done_ ? length_ : z_m;
}

PhaseProfile XpmAccumulator::phase() const {
  if (!done_) throw DomainError("XPM accumulator has not reached the fiber end");
  PhaseProfile p;
  p.delay_ps = delay_ps_;
  p.dt_ps = grid_->dt_ps();
  p.phi = phi_;
  return p;
}

PhaseProfile xpm_phase(const PropagationRecord& record, const SignalSpec& signal, const FiberSpec& fiber,
                       double gamma_per_W_km, double pump_center_ps) {
  signal.validate();
  if (record.snapshots.size() < 2) throw DomainError("XPM phase needs at least two snapshots");
  const GridPtr& grid = record.snapshots.front().grid;
  for (const auto& s : record.snapshots)
    if (s.grid != grid && !(s.grid->size() == grid->size() && s.grid->window_ps() == grid->window_ps()))
      throw DomainError("XPM phase: snapshots use mismatched grids");
  const double z0 = record.snapshots.front().z;
  const double length = record.snapshots.back().z - z0;
  const double pump_nm = grid->carrier_wavelength_nm();
  XpmAccumulator acc(grid, signal.resolved_delay_ps(fiber, pump_nm, length), signal.walk_off(fiber, pump_nm),
                     gamma_per_W_km, length, pump_center_ps);
  for (const auto& s : record.snapshots) acc.observe(s.z - z0, s.field);
  return acc.phase();
}

SwitchProbabilities switch_probabilities(const PhaseProfile& phase, const SignalSpec& signal) {
  signal.validate();
  const std::size_t n = phase.phi.size();
  if (n == 0) throw DomainError("empty phase profile");
  const double t0 = signal.fwhm_ps / (2.0 * std::sqrt(std::log(2.0)));
  // Weights beyond 6 t0 are below 1e-15.
  const auto half = static_cast<std::ptrdiff_t>(std::ceil(6.0 * t0 / phase.dt_ps));
  std::vector<double> w(static_cast<std::size_t>(2 * half + 1));
  for (std::ptrdiff_t j = -half; j <= half; ++j) {
    const double x = static_cast<double>(j) * phase.dt_ps / t0;
    w[static_cast<std::size_t>(j + half)] = std::exp(-x * x);
  }
  std::vector<double> s2(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double sn = std::sin(0.5 * phase.phi[k]);
    s2[k] = sn * sn;
  }
  auto transmission = [&](std::ptrdiff_t c) {
    double weight = 0.0, t = 0.0;
    for (std::ptrdiff_t j = -half; j <= half; ++j) {
      const std::ptrdiff_t k = c + j;
      if (k < 0 || k >= static_cast<std::ptrdiff_t>(n)) continue;
      const double wj = w[static_cast<std::size_t>(j + half)];
      weight += wj;
      t += wj * s2[static_cast<std::size_t>(k)];
    }
    return weight > 0.0 ? std::clamp(t / weight, 0.0, 1.0) : 0.0;
  };

  auto centre = static_cast<std::ptrdiff_t>(n / 2);
  double T = transmission(centre);
  if (signal.maximize_over_delay) {
    for (std::ptrdiff_t c = half; c + half < static_cast<std::ptrdiff_t>(n); ++c) {
      const double tc = transmission(c);
      if (tc > T) T = tc, centre = c;
    }
  }
  return {T, 1.0 - T, phase.time_ps(static_cast<std::size_t>(centre))};
}

GridSettings::Resolved GridSettings::resolve(double length_m, double walk_off_s_per_m, double pump_fwhm_ps,
                                             bool raman) const {
  if (absorber_width_ps < 0.0) throw DomainError("absorber width must be non-negative");
  Resolved r{n, window_ps, 0.0, absorber_width_ps};
  const double lead = absorber_width_ps + 3.5 * pump_fwhm_ps;
  const bool trailing = raman && walk_off_s_per_m != 0.0;
  if (r.window_ps == 0.0) {
    const double sweep = trailing ? 0.5 * std::abs(walk_off_s_per_m) * length_m / units::ps : 0.0;
    r.window_ps = 128.0;
    while (r.window_ps < lead + sweep) r.window_ps *= 2.0;
  }
  if (r.n == 0) r.n = static_cast<std::size_t>(std::llround(r.window_ps * 64.0));
  if (r.n == 0 || (r.n & (r.n - 1)) != 0) throw DomainError("automatic grid size is not a power of two");
  r.pump_center_ps = pump_center_ps ? *pump_center_ps : (trailing ? -0.5 * r.window_ps + lead : 0.0);
  return r;
}

PropagationOptions SwitchSetup::default_switch_options() {
  PropagationOptions o;
  o.scheme = Scheme::rk4ip;
  o.step_control = StepControl::adaptive;
  o.estimator = ErrorEstimator::embedded;
  o.local_error_target = 1e-5;
  o.snapshot_count = 2;
  o.max_dz_m = 0.2;
  return o;
}

std::vector<SwitchPoint> evaluate_switch(const SwitchSetup& setup, double energy_nJ,
                                         std::span<const double> lengths_m) {
  if (lengths_m.empty()) throw DomainError("evaluate_switch: no lengths");
  setup.signal.validate();
  const double longest = *std::max_element(lengths_m.begin(), lengths_m.end());
  const double pump_nm = setup.fiber.reference_wavelength_nm;
  const double walk = setup.signal.walk_off(setup.fiber, pump_nm);
  const bool raman = setup.options.include_raman && setup.fiber.raman_fraction > 0.0;
  const auto g = setup.grid.resolve(longest, walk, setup.pump_fwhm_ps, raman);
  const GridPtr grid = make_grid(g.n, g.window_ps, pump_nm);
  const double gamma_xpm = xpm_coefficient(setup.fiber, pump_nm, setup.signal.wavelength_nm);

  std::vector<SwitchPoint> points(lengths_m.size());
  if (energy_nJ == 0.0) {
    for (auto& p : points) p = {0.0, 0.0, 1.0, 0.0};
    return points;
  }

  std::vector<XpmAccumulator> accs;
  accs.reserve(lengths_m.size());
  for (double L : lengths_m)
    accs.emplace_back(grid, setup.signal.resolved_delay_ps(setup.fiber, pump_nm, L), walk, gamma_xpm, L,
                      g.pump_center_ps);

  FiberSpec fiber = setup.fiber;
  fiber.length_m = longest;
  PropagationOptions opts = setup.options;
  opts.absorber_width_ps = g.absorber_width_ps;
  const Envelope pump = gaussian_pulse(setup.pump_fwhm_ps, energy_nJ, grid, g.pump_center_ps);
  propagate(pump, fiber, opts, [&](double z, std::span<const cplx> field) {
    for (auto& a : accs) a.observe(z, field);
  });

  for (std::size_t i = 0; i < accs.size(); ++i) {
    const PhaseProfile phase = accs[i].phase();
    const auto tr = switch_probabilities(phase, setup.signal);
    const auto k = static_cast<std::ptrdiff_t>(phase.phi.size() / 2) +
                   static_cast<std::ptrdiff_t>(std::llround((tr.delay_ps - phase.delay_ps) / phase.dt_ps));
    points[i] = {energy_nJ, tr.T, tr.R, phase.phi[static_cast<std::size_t>(k)]};
  }
  return points;
}

namespace {

void require_increasing(std::span<const double> energies) {
  if (energies.empty()) throw DomainError("energy list is empty");
  for (std::size_t i = 0; i < energies.size(); ++i) {
    if (!(energies[i] >= 0.0)) throw DomainError("pump energies must be non-negative");
    if (i > 0 && !(energies[i] > energies[i - 1])) throw DomainError("pump energies must be strictly increasing");
  }
}

}  // namespace

std::vector<SwitchCurve> energy_sweep_lengths(const SwitchSetup& setup, std::span<const double> lengths_m,
                                              std::span<const double> energies_nJ) {
  require_increasing(energies_nJ);
  std::vector<std::vector<SwitchPoint>> rows(energies_nJ.size());
  const std::size_t workers = setup.workers ? setup.workers : default_worker_count();
  parallel_for(energies_nJ.size(), workers, [&](std::size_t i) {
    try {
      rows[i] = evaluate_switch(setup, energies_nJ[i], lengths_m);
    } catch (const SolverError& e) {
      std::ostringstream os;
      os << "pump energy " << energies_nJ[i] << " nJ: " << e.what();
      throw SolverError(os.str(), e.z(), e.dz());
    }
  });

  std::vector<SwitchCurve> curves(lengths_m.size());
  for (std::size_t l = 0; l < lengths_m.size(); ++l) {
    curves[l].length_m = lengths_m[l];
    curves[l].pump_fwhm_ps = setup.pump_fwhm_ps;
    curves[l].raman_fraction = setup.options.include_raman ? setup.fiber.raman_fraction : 0.0;
    for (const auto& row : rows) curves[l].points.push_back(row[l]);
  }
  return curves;
}

SwitchCurve energy_sweep(const SwitchSetup& setup, double length_m, std::span<const double> energies_nJ) {
  const double lengths[] = {length_m};
  return energy_sweep_lengths(setup, lengths, energies_nJ).front();
}

SpanResult span_for_threshold(const SwitchCurve& curve, double theta, const TransmissionFn& evaluate,
                              double resolution_nJ) {
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("threshold must lie in (0, 1)");
  const auto& pts = curve.points;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (!(pts[i].pump_energy_nJ > pts[i - 1].pump_energy_nJ))
      throw DomainError("switch curve energies must be strictly increasing");

  SpanResult r;
  r.theta = theta;
  std::size_t first = 0;
  while (first < pts.size() && pts[first].T < theta) ++first;
  if (first == pts.size()) return r;
  std::size_t last = first;
  while (last + 1 < pts.size() && pts[last + 1].T >= theta) ++last;
  r.found = true;

  // below: T < theta, above: T >= theta.
  auto crossing = [&](std::size_t below, std::size_t above) {
    double e_below = pts[below].pump_energy_nJ, e_above = pts[above].pump_energy_nJ;
    if (!evaluate || !(resolution_nJ > 0.0)) {
      const double f = (theta - pts[below].T) / (pts[above].T - pts[below].T);
      return e_below + f * (e_above - e_below);
    }
    while (std::abs(e_above - e_below) > resolution_nJ) {
      const double mid = 0.5 * (e_below + e_above);
      ++r.refinement_runs;
      (evaluate(mid) >= theta ? e_above : e_below) = mid;
    }
    return 0.5 * (e_below + e_above);
  };

  if (first == 0) {
    r.open_low = true;
    r.E_lo = pts.front().pump_energy_nJ;
  } else {
    r.E_lo = crossing(first - 1, first);
  }
  if (last + 1 == pts.size()) {
    r.open_high = true;
    r.E_hi = pts.back().pump_energy_nJ;
  } else {
    r.E_hi = crossing(last + 1, last);
  }
  return r;
}

std::vector<SpanCell> span_vs_length(const SwitchSetup& base, const SpanGridRequest& request) {
  if (request.lengths_m.empty() || request.pump_fwhms_ps.empty() || request.raman_fractions.empty())
    throw DomainError("span grid: empty axis");
  require_increasing(request.energies_nJ);

  std::vector<SpanCell> cells;
  for (double fwhm : request.pump_fwhms_ps) {
    for (double fr : request.raman_fractions) {
      SwitchSetup setup = base;
      setup.pump_fwhm_ps = fwhm;
      setup.fiber.raman_fraction = fr;
      setup.options.include_raman = fr > 0.0;

      std::vector<SwitchCurve> curves;
      std::optional<std::string> sweep_error;
      try {
        curves = energy_sweep_lengths(setup, request.lengths_m, request.energies_nJ);
      } catch (const std::exception& e) {
        sweep_error = e.what();
      }

      const std::size_t offset = cells.size();
      for (double L : request.lengths_m) cells.push_back({L, fwhm, fr, {}, {}, sweep_error});
      if (sweep_error) continue;

      const std::size_t workers = setup.workers ? setup.workers : default_worker_count();
      parallel_for(request.lengths_m.size(), workers, [&](std::size_t l) {
        SpanCell& cell = cells[offset + l];
        try {
          const double lengths[] = {request.lengths_m[l]};
          SwitchSetup single = setup;
          single.workers = 1;
          const TransmissionFn evaluate = [&](double e) { return evaluate_switch(single, e, lengths).front().T; };
          cell.curve = curves[l];
          cell.span = span_for_threshold(curves[l], request.theta, evaluate, request.resolution_nJ);
        } catch (const std::exception& e) {
          cell.error = e.what();
        }
      });
    }
  }
  return cells;
}

std::size_t default_worker_count() {
  if (const char* env = std::getenv("FIBERSIM_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& body) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace fibersim
