#include "fibersim/propagator.hpp"

#include <algorithm>
#include <array>
#if defined(__SSE__)
#include <xmmintrin.h>
#endif
#include <cmath>
#include <limits>
#include <sstream>

#include "fibersim/constants.hpp"

namespace fibersim {

void PropagationOptions::validate() const {
  if (step_control == StepControl::adaptive &&
      !(local_error_target > 1e-12 && local_error_target < 1e-2))
    throw DomainError("local_error_target must lie in (1e-12, 1e-2)");
  if (step_control == StepControl::fixed && !(fixed_dz_m > 0.0)) throw DomainError("fixed_dz_m must be positive");
  if (snapshot_count < 2) throw DomainError("snapshot_count must be at least 2");
  if (max_dispersion_order < 2 || max_dispersion_order > 4)
    throw DomainError("max_dispersion_order must be in 2..4");
  if (estimator == ErrorEstimator::embedded && scheme != Scheme::rk4ip)
    throw DomainError("the embedded error estimator is only available for the rk4ip scheme");
  if (initial_dz_m < 0.0 || max_dz_m < 0.0) throw DomainError("step bounds must be non-negative");
  if (absorber_width_ps < 0.0 || absorber_strength_per_m < 0.0)
    throw DomainError("absorber parameters must be non-negative");
}

double band_edge_fraction(std::span<const double> ps) {
  const std::size_t n = ps.size();
  const std::size_t edge = std::max<std::size_t>(n / 32, 1);  // per side
  double total = 0.0, outer = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    total += ps[j];
    const std::size_t from_nyquist = j < n / 2 ? n / 2 - j : j - n / 2;
    if (from_nyquist < edge) outer += ps[j];
  }
  return total > 0.0 ? outer / total : 0.0;
}

namespace {

double time_edge_fraction(std::span<const cplx> field) {
  const std::size_t n = field.size();
  const std::size_t edge = std::max<std::size_t>(n / 32, 1);
  double total = 0.0, outer = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double p = std::norm(field[k]);
    total += p;
    if (k < edge || k >= n - edge) outer += p;
  }
  return total > 0.0 ? outer / total : 0.0;
}

double l2(std::span<const cplx> v) {
  double s = 0.0;
  for (const auto& x : v) s += std::norm(x);
  return std::sqrt(s);
}

// Right-hand side of the GNLS in the frequency domain: a linear operator
// L(w) and the nonlinear map N(A) = i gamma(w) F[A (R * |A|^2)].
class GnlsOperators {
 public:
  GnlsOperators(const Grid& grid, const FiberSpec& fiber, const PropagationOptions& opts,
                std::vector<std::string>& warnings)
      : n_(grid.size()), fft_(n_), linear_(n_), gain_(n_), time_(n_), work_(n_) {
    const double w0 = grid.omega0();
    const double wmax = 0.5 * static_cast<double>(n_) * grid.domega();

    const DispersionCoeffs betas = opts.dispersion_override
                                       ? *opts.dispersion_override
                                       : taylor_betas(grid.carrier_wavelength_nm(), opts.max_dispersion_order, fiber);
    const double b2 = betas.si(2);
    const double b3 = opts.max_dispersion_order >= 3 ? betas.si(3) : 0.0;
    const double b4 = opts.max_dispersion_order >= 4 ? betas.si(4) : 0.0;
    const double flat_alpha = dB_per_km_to_per_m(loss_dB_per_km(grid.carrier_wavelength_nm() * 1e-3, fiber));
    for (std::size_t j = 0; j < n_; ++j) {
      const double w = grid.omegas()[j];
      double alpha = 0.0;
      if (opts.include_loss) {
        alpha = opts.wavelength_dependent_loss
                    ? dB_per_km_to_per_m(loss_dB_per_km(angular_to_wavelength(w0 + w) / units::um, fiber))
                    : flat_alpha;
      }
      const double phase = b2 * w * w / 2.0 + b3 * w * w * w / 6.0 + b4 * w * w * w * w / 24.0;
      linear_[j] = cplx(-0.5 * alpha, phase);
    }

    // The shock factor is held constant beyond 90 % of the Nyquist frequency.
    const double wclamp = 0.9 * wmax;
    auto clamp = [&](double w) { return std::clamp(w, -wclamp, wclamp); };
    if (opts.gamma_override || !opts.include_shock || !opts.frequency_dependent_area) {
      const double gamma0 =
          (opts.gamma_override ? *opts.gamma_override : kerr_coefficient(grid.carrier_wavelength_nm(), fiber)) /
          units::km;
      for (std::size_t j = 0; j < n_; ++j) {
        const double shock = opts.include_shock ? 1.0 + clamp(grid.omegas()[j]) / w0 : 1.0;
        gain_[j] = cplx(0.0, gamma0 * shock);
      }
    } else {
      // n2 (w0 + w) / (c A_eff(w)); A_eff tabulated on a coarse frequency mesh.
      constexpr int kNodes = 65;
      std::vector<double> node_w(kNodes), node_area(kNodes);
      for (int i = 0; i < kNodes; ++i) {
        node_w[i] = -wclamp + 2.0 * wclamp * i / (kNodes - 1);
        const double lambda_nm = angular_to_wavelength(w0 + node_w[i]) / units::nm;
        node_area[i] = lp01_effective_area(lambda_nm, fiber, ModeCheck::lp01_only) * units::um * units::um;
      }
      for (std::size_t j = 0; j < n_; ++j) {
        const double w = clamp(grid.omegas()[j]);
        const double pos = (w + wclamp) / (2.0 * wclamp) * (kNodes - 1);
        const int i = std::min(static_cast<int>(pos), kNodes - 2);
        const double f = pos - i;
        const double area = (1.0 - f) * node_area[i] + f * node_area[i + 1];
        gain_[j] = cplx(0.0, fiber.n2 * (w0 + w) / (kSpeedOfLight * area));
      }
    }

    if (opts.include_raman && fiber.raman_fraction > 0.0) {
      RamanKernel kernel = raman_kernel(grid.dt_ps() * 1e3, n_, fiber.raman_fraction, fiber.tau1_fs, fiber.tau2_fs);
      if (kernel.size() != n_) throw DomainError("Raman kernel size does not match the grid");
      if (kernel.warning) warnings.push_back(*kernel.warning);
      raman_conj_.resize(n_ / 2 + 1);
      for (std::size_t j = 0; j <= n_ / 2; ++j) raman_conj_[j] = std::conj(kernel.response[j]);
      raman_ = true;
      real_fft_.emplace(n_);
    }
  }

  std::size_t size() const { return n_; }
  const FftPair& fft() const { return fft_; }

  // exp(h L) elementwise. Tables are kept for the most recent step sizes;
  // adaptive steps are drawn from a geometric ladder so they recur.
  const CVector& propagator(double h) {
    for (auto& c : cache_)
      if (c.h == h) return c.values;
    CacheEntry& slot = cache_[next_slot_];
    next_slot_ = (next_slot_ + 1) % kCacheSize;
    slot.h = h;
    slot.values.resize(n_);
    for (std::size_t j = 0; j < n_; ++j) slot.values[j] = std::exp(h * linear_[j]);
    return slot.values;
  }

  // out = N(in); in and out are spectra and may alias.
  void nonlinear(std::span<const cplx> in, std::span<cplx> out) {
    fft_.to_time(in, time_);
    if (raman_) {
      // R * |A|^2 through a real transform. FFTW's forward sign is the
      // conjugate of ours, hence conj(R(w)).
      auto intensity = real_fft_->real();
      for (std::size_t k = 0; k < n_; ++k) intensity[k] = std::norm(time_[k]);
      real_fft_->forward();
      auto half = real_fft_->half();
      for (std::size_t j = 0; j < half.size(); ++j) half[j] *= raman_conj_[j];
      real_fft_->backward();
      const double scale = 1.0 / static_cast<double>(n_);
      for (std::size_t k = 0; k < n_; ++k) work_[k] = time_[k] * (intensity[k] * scale);
    } else {
      for (std::size_t k = 0; k < n_; ++k) work_[k] = time_[k] * std::norm(time_[k]);
    }
    fft_.to_spectrum(work_, out);
    for (std::size_t j = 0; j < n_; ++j) out[j] *= gain_[j];
  }

 private:
  struct CacheEntry {
    double h = std::numeric_limits<double>::quiet_NaN();
    CVector values;
  };

  std::size_t n_;
  FftPair fft_;
  std::vector<cplx> linear_;
  std::vector<cplx> gain_;
  bool raman_ = false;
  std::vector<cplx> raman_conj_;
  std::optional<RealFft> real_fft_;
  CVector time_, work_;
  static constexpr std::size_t kCacheSize = 12;
  std::array<CacheEntry, kCacheSize> cache_;
  std::size_t next_slot_ = 0;
};

class Integrator {
 public:
  Integrator(GnlsOperators& ops, Scheme scheme)
      : ops_(ops), scheme_(scheme), n_(ops.size()), a_i_(n_), k1_(n_), k2_(n_), k3_(n_), k4_(n_), tmp_(n_),
        n_at_a_(n_) {}

  // Marks N(A) at the current state as unknown.
  void invalidate() { n_at_a_valid_ = false; }

  // Single step of size h from `a` into `out` (must not alias `a`).
  void step(std::span<const cplx> a, double h, std::span<cplx> out) {
    if (scheme_ == Scheme::rk4ip) {
      rk4ip(a, h, out, nullptr);
    } else {
      split_step(a, h, out);
    }
  }

  // RK4IP step with the embedded third-order error estimate; `n_out` receives
  // N(out) so the next step can start from it.
  double step_embedded(std::span<const cplx> a, double h, std::span<cplx> out, std::span<cplx> n_out) {
    rk4ip(a, h, out, &n_out);
    double diff = 0.0;
    for (std::size_t j = 0; j < n_; ++j) diff += std::norm(k4_[j] - h * n_out[j]);
    return std::sqrt(diff) / 10.0 / std::max(l2(out), std::numeric_limits<double>::min());
  }

  void adopt_n_at_a(std::span<const cplx> n_at_a) {
    std::copy(n_at_a.begin(), n_at_a.end(), n_at_a_.begin());
    n_at_a_valid_ = true;
  }

 private:
  const CVector& n_at(std::span<const cplx> a) {
    if (!n_at_a_valid_) {
      ops_.nonlinear(a, n_at_a_);
      n_at_a_valid_ = true;
    }
    return n_at_a_;
  }

  void rk4ip(std::span<const cplx> a, double h, std::span<cplx> out, std::span<cplx>* n_out) {
    const CVector& e = ops_.propagator(0.5 * h);
    const CVector& na = n_at(a);
    for (std::size_t j = 0; j < n_; ++j) {
      a_i_[j] = e[j] * a[j];
      k1_[j] = h * e[j] * na[j];
      tmp_[j] = a_i_[j] + 0.5 * k1_[j];
    }
    ops_.nonlinear(tmp_, k2_);
    for (std::size_t j = 0; j < n_; ++j) {
      k2_[j] *= h;
      tmp_[j] = a_i_[j] + 0.5 * k2_[j];
    }
    ops_.nonlinear(tmp_, k3_);
    for (std::size_t j = 0; j < n_; ++j) {
      k3_[j] *= h;
      tmp_[j] = e[j] * (a_i_[j] + k3_[j]);
    }
    ops_.nonlinear(tmp_, k4_);
    for (std::size_t j = 0; j < n_; ++j) {
      k4_[j] *= h;
      out[j] = e[j] * (a_i_[j] + k1_[j] / 6.0 + k2_[j] / 3.0 + k3_[j] / 3.0) + k4_[j] / 6.0;
    }
    if (n_out) ops_.nonlinear(out, *n_out);
  }

  // Strang splitting: half linear step, RK4 on the nonlinear flow, half linear step.
  void split_step(std::span<const cplx> a, double h, std::span<cplx> out) {
    const CVector& e = ops_.propagator(0.5 * h);
    for (std::size_t j = 0; j < n_; ++j) a_i_[j] = e[j] * a[j];
    ops_.nonlinear(a_i_, k1_);
    for (std::size_t j = 0; j < n_; ++j) tmp_[j] = a_i_[j] + 0.5 * h * k1_[j];
    ops_.nonlinear(tmp_, k2_);
    for (std::size_t j = 0; j < n_; ++j) tmp_[j] = a_i_[j] + 0.5 * h * k2_[j];
    ops_.nonlinear(tmp_, k3_);
    for (std::size_t j = 0; j < n_; ++j) tmp_[j] = a_i_[j] + h * k3_[j];
    ops_.nonlinear(tmp_, k4_);
    for (std::size_t j = 0; j < n_; ++j)
      out[j] = e[j] * (a_i_[j] + h / 6.0 * (k1_[j] + 2.0 * k2_[j] + 2.0 * k3_[j] + k4_[j]));
  }

  GnlsOperators& ops_;
  Scheme scheme_;
  std::size_t n_;
  CVector a_i_, k1_, k2_, k3_, k4_, tmp_, n_at_a_;
  bool n_at_a_valid_ = false;
};

// Field tails decay into the subnormal range, where x86 arithmetic is two
// orders of magnitude slower. Flush them to zero for the duration of a run.
class FlushDenormals {
 public:
#if defined(__SSE__)
  FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040); }
  ~FlushDenormals() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#endif
};

double spectral_energy_nJ(std::span<const cplx> spec, double dt) {
  double s = 0.0;
  for (const auto& x : spec) s += std::norm(x);
  return s / static_cast<double>(spec.size()) * dt / units::nJ;
}

}  // namespace

PropagationResult propagate(const Envelope& input, const FiberSpec& fiber, const PropagationOptions& opts,
                            const StepObserver& observer) {
  opts.validate();
  fiber.validate();
  if (!input.grid) throw DomainError("envelope has no grid");
  const Grid& grid = *input.grid;
  if (input.field.size() != grid.size()) throw DomainError("envelope size does not match its grid");
  if (std::abs(grid.carrier_wavelength_nm() - fiber.reference_wavelength_nm) > 1e-6)
    throw DomainError("grid carrier and fiber reference wavelength differ");

  const FlushDenormals ftz;
  PropagationResult result;
  PropagationRecord& rec = result.record;
  GnlsOperators ops(grid, fiber, opts, rec.warnings);
  Integrator integrator(ops, opts.scheme);
  const std::size_t n = grid.size();
  const FftPair& fft = ops.fft();
  const double length = fiber.length_m;
  const double z0 = input.z;

  CVector state(n), trial(n), half(n), n_trial(n), field(n);
  fft.to_spectrum(input.field, state);

  // Snapshot positions relative to the fiber input.
  std::vector<double> snap_z(opts.snapshot_count);
  for (std::size_t i = 0; i < snap_z.size(); ++i)
    snap_z[i] = length * static_cast<double>(i) / static_cast<double>(snap_z.size() - 1);

  auto take_snapshot = [&](double z) {
    Envelope env(input.grid);
    fft.to_time(state, env.field);
    env.z = z0 + z;
    std::vector<double> ps(n);
    for (std::size_t j = 0; j < n; ++j) ps[j] = std::norm(state[j]);
    rec.max_band_edge_fraction = std::max(rec.max_band_edge_fraction, band_edge_fraction(ps));
    rec.max_time_edge_fraction = std::max(rec.max_time_edge_fraction, time_edge_fraction(env.field));
    if (rec.max_band_edge_fraction > 1e-2) {
      std::ostringstream os;
      os << "spectrum reached the band edge at z = " << z << " m (edge energy fraction "
         << rec.max_band_edge_fraction << "); enlarge the grid";
      throw SolverError(os.str(), z, 0.0);
    }
    rec.snapshots.push_back(std::move(env));
  };

  // Quadratic absorption profile inside the edge layers, 1/m.
  std::vector<double> absorber;
  if (opts.absorber_width_ps > 0.0) {
    if (2.0 * opts.absorber_width_ps >= grid.window_ps()) throw DomainError("absorbing layers cover the whole window");
    absorber.resize(n);
    const double inner = 0.5 * grid.window_ps() - opts.absorber_width_ps;
    for (std::size_t k = 0; k < n; ++k) {
      const double depth = (std::abs(grid.time(k) / units::ps) - inner) / opts.absorber_width_ps;
      absorber[k] = depth > 0.0 ? opts.absorber_strength_per_m * depth * depth : 0.0;
    }
  }

  take_snapshot(0.0);
  rec.snapshots.front().field = input.field;  // exact input, not a transform round trip
  if (observer) observer(0.0, rec.snapshots.front().field);
  std::size_t next_snap = 1;

  const bool adaptive = opts.step_control == StepControl::adaptive;
  const bool embedded = adaptive && opts.estimator == ErrorEstimator::embedded;
  double order_exponent = 1.0 / 5.0;
  if (embedded) order_exponent = 1.0 / 4.0;
  if (opts.scheme == Scheme::split_step) order_exponent = 1.0 / 3.0;
  const double tol = opts.local_error_target;
  const double max_dz = opts.max_dz_m > 0.0 ? opts.max_dz_m : length;

  double z = 0.0;
  double h = adaptive ? (opts.initial_dz_m > 0.0 ? opts.initial_dz_m : length / 1e4) : opts.fixed_dz_m;
  h = std::min(h, max_dz);
  // Steps are rounded down onto h0 * 2^(k/8) so the exp(hL) tables recur.
  const double h0 = h;
  auto ladder = [h0, max_dz](double x) {
    const double k = std::floor(8.0 * std::log2(x / h0) + 1e-9);
    return std::min(h0 * std::exp2(k / 8.0), max_dz);
  };
  std::size_t steps = 0;

  while (next_snap < snap_z.size()) {
    if (++steps > opts.max_steps) throw SolverError("step limit exceeded", z, h);
    const double to_snap = snap_z[next_snap] - z;
    const double h_step = adaptive ? ladder(h) : h;
    // Relative slack so a fixed step does not leave a rounding-sized sliver.
    const bool clipped = h_step >= to_snap * (1.0 - 1e-9);
    const double dz = clipped ? to_snap : h_step;
    if (!(dz > 0.0) || z + dz == z) throw SolverError("step size underflow", z, dz);

    double err = 0.0;
    if (!adaptive) {
      integrator.step(state, dz, trial);
    } else if (embedded) {
      err = integrator.step_embedded(state, dz, trial, n_trial);
    } else {
      integrator.step(state, dz, trial);
      integrator.step(state, 0.5 * dz, half);
      integrator.invalidate();
      integrator.step(half, 0.5 * dz, field);
      double diff = 0.0;
      for (std::size_t j = 0; j < n; ++j) diff += std::norm(field[j] - trial[j]);
      err = std::sqrt(diff) / std::max(l2(field), std::numeric_limits<double>::min());
      std::swap(trial, field);  // keep the two-half-step result
    }

    if (!std::isfinite(err)) throw SolverError("non-finite local error estimate", z, dz);

    if (adaptive && err > tol) {
      ++rec.rejected_steps;
      if (!embedded) integrator.invalidate();
      h = dz * std::clamp(0.9 * std::pow(tol / err, order_exponent), 0.1, 0.5);
      continue;
    }

    std::swap(state, trial);
    z = clipped ? snap_z[next_snap] : z + dz;
    if (embedded) {
      integrator.adopt_n_at_a(n_trial);
    } else {
      integrator.invalidate();
    }

    bool have_field = false;
    if (!absorber.empty()) {
      fft.to_time(state, field);
      have_field = true;
      double edge = 0.0, total = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double p = std::norm(field[k]);
        total += p;
        if (absorber[k] > 0.0) edge += p;
      }
      // Skip the extra transform while the layers are empty.
      if (edge > 1e-12 * total) {
        for (std::size_t k = 0; k < n; ++k)
          if (absorber[k] > 0.0) field[k] *= std::exp(-0.5 * absorber[k] * dz);
        const double before = spectral_energy_nJ(state, grid.dt());
        fft.to_spectrum(field, state);
        rec.absorbed_energy_nJ += before - spectral_energy_nJ(state, grid.dt());
        integrator.invalidate();
      }
    }

    const double energy = spectral_energy_nJ(state, grid.dt());
    if (!std::isfinite(energy)) {
      std::ostringstream os;
      os << "field became non-finite at z = " << z << " m";
      throw SolverError(os.str(), z, dz);
    }
    rec.steps.push_back({z0 + z, dz, err, energy});

    if (observer) {
      if (!have_field) fft.to_time(state, field);
      observer(z, field);
    }
    if (clipped) take_snapshot(z), ++next_snap;

    if (adaptive) {
      const double grow = err > 0.0 ? std::clamp(0.9 * std::pow(tol / err, order_exponent), 0.5, 2.0) : 2.0;
      // A step shortened to land on a snapshot says nothing about the natural step.
      h = clipped ? std::max(h, dz * grow) : dz * grow;
      h = std::min(h, max_dz);
    }
  }

  if (rec.max_band_edge_fraction > 1e-5) {
    std::ostringstream os;
    os << "spectral energy near the band edge (fraction " << rec.max_band_edge_fraction << ")";
    rec.warnings.push_back(os.str());
  }
  if (absorber.empty() && rec.max_time_edge_fraction > 1e-3) {
    std::ostringstream os;
    os << "pulse energy near the time-window edge (fraction " << rec.max_time_edge_fraction << ")";
    rec.warnings.push_back(os.str());
  }

  result.output = rec.snapshots.back();
  return result;
}

EvolutionMap evolution_map(const PropagationRecord& record, MapDomain domain, double floor_dB) {
  if (record.snapshots.size() < 2) throw DomainError("evolution map needs at least two snapshots");
  EvolutionMap map;
  map.domain = domain;
  map.floor_dB = floor_dB;
  const Grid& grid = *record.snapshots.front().grid;
  const std::size_t n = grid.size();

  std::vector<std::size_t> order(n);
  if (domain == MapDomain::time) {
    for (std::size_t k = 0; k < n; ++k) order[k] = k, map.axis.push_back(grid.time(k) / units::ps);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      order[i] = (n / 2 - 1 + n - i) % n;
      map.axis.push_back(grid.wavelength_nm(order[i]));
    }
  }

  double global_max = 0.0;
  for (const auto& snap : record.snapshots) {
    std::vector<double> row(n);
    if (domain == MapDomain::time) {
      for (std::size_t k = 0; k < n; ++k) row[k] = std::norm(snap.field[k]);
    } else {
      const auto ps = power_spectrum(snap);
      for (std::size_t i = 0; i < n; ++i) row[i] = ps[order[i]];
    }
    for (double v : row) global_max = std::max(global_max, v);
    map.z_m.push_back(snap.z);
    map.dB.push_back(std::move(row));
  }
  for (auto& row : map.dB) {
    for (double& v : row) {
      const double db = global_max > 0.0 && v > 0.0 ? 10.0 * std::log10(v / global_max) : floor_dB;
      v = std::clamp(db, floor_dB, 0.0);
    }
  }
  return map;
}

}  // namespace fibersim
