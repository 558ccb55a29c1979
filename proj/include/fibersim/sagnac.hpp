#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fibersim/fiber_model.hpp"
#include "fibersim/propagator.hpp"
#include "fibersim/pulse_grid.hpp"

namespace fibersim {

/// Weak probe routed by the loop. Its intensity profile is a Gaussian of
/// `fwhm_ps`, normalized to unit integral.
struct SignalSpec {
  double wavelength_nm = 1310.0;
  double fwhm_ps = 1.0;
  /// Delay of the signal centre relative to the pump centre at the loop
  /// input, in the pump's retarded frame. Unset: the collision is centred
  /// in the loop when walk-off is on, and 0 otherwise.
  std::optional<double> delay_ps;
  bool walk_off_enabled = true;
  /// Report the best delay instead of `delay_ps`. The phase profile already
  /// covers every delay, so this costs no extra propagation.
  bool maximize_over_delay = false;

  void validate() const;
  /// beta1(signal) - beta1(pump) in s/m, or 0 with walk-off disabled.
  double walk_off(const FiberSpec& fiber, double pump_nm) const;
  double resolved_delay_ps(const FiberSpec& fiber, double pump_nm, double length_m) const;
};

/// XPM phase sampled on the signal's time axis u_k = delay + t_k.
struct PhaseProfile {
  double delay_ps = 0.0;
  double dt_ps = 0.0;
  std::vector<double> phi;  // rad

  double time_ps(std::size_t k) const {
    return delay_ps + (static_cast<double>(k) - static_cast<double>(phi.size() / 2)) * dt_ps;
  }
  /// Value at the signal centre (u = delay).
  double at_center() const { return phi[phi.size() / 2]; }
};

/// XPM coefficient 2 pi n2 / (lambda_s A_ps) in 1/(W km), with A_ps the
/// pump/signal mode-overlap area.
double xpm_coefficient(const FiberSpec& fiber, double pump_nm, double signal_nm);

/// Integrates phi(u) = 2 gamma int_0^L |A(z, u + d z)|^2 dz by the trapezoid
/// rule over every observed step. Pump content outside the time window counts
/// as zero. Observations past `length_m` are clipped with linear interpolation
/// of the integrand.
class XpmAccumulator {
 public:
  /// `pump_center_ps` is the grid time of the pump centre at the fiber input.
  XpmAccumulator(GridPtr grid, double delay_ps, double walk_off_s_per_m, double gamma_per_W_km, double length_m,
                 double pump_center_ps = 0.0);

  void observe(double z_m, std::span<const cplx> field);
  bool complete() const { return done_; }
  double length_m() const { return length_; }
  PhaseProfile phase() const;

 private:
  void sample(double z_m, std::span<const cplx> field, std::vector<double>& out) const;

  GridPtr grid_;
  double delay_ps_;
  double pump_center_ps_;
  double walk_off_;
  double gamma_;  // 1/(W m)
  double length_;
  double last_z_ = 0.0;
  bool started_ = false;
  bool done_ = false;
  std::vector<double> last_, current_, phi_;
};

/// XPM phase from the snapshots of a propagation record. Throws DomainError
/// if the record does not start at z = 0 or snapshots use different grids.
PhaseProfile xpm_phase(const PropagationRecord& record, const SignalSpec& signal, const FiberSpec& fiber,
                       double gamma_per_W_km, double pump_center_ps = 0.0);

struct SwitchProbabilities {
  double T;
  double R;
  double delay_ps;  // signal centre used
};

/// T = int s(u - delay) sin^2(phi(u)/2) du, R = 1 - T. With
/// `maximize_over_delay` the delay is the profile position with the largest T.
SwitchProbabilities switch_probabilities(const PhaseProfile& phase, const SignalSpec& signal);

struct SwitchPoint {
  double pump_energy_nJ = 0.0;
  double T = 0.0;
  double R = 1.0;
  double phase_at_signal_center = 0.0;
};

struct SwitchCurve {
  std::vector<SwitchPoint> points;
  double length_m = 0.0;
  double pump_fwhm_ps = 0.0;
  double raman_fraction = 0.0;
};

/// Pump grid for switching runs. Zeros select automatic values, sampled at
/// 1/64 ps. With Raman on, the window holds the pump plus the stretch of the
/// pump frame the signal sweeps through, with the pump near the leading edge
/// so the delayed, red-shifted solitons stay inside. Without Raman the pump
/// stays put and a centred 128 ps window suffices.
struct GridSettings {
  std::size_t n = 0;
  double window_ps = 0.0;
  std::optional<double> pump_center_ps;
  double absorber_width_ps = 8.0;  // 0 leaves the window periodic

  struct Resolved {
    std::size_t n;
    double window_ps;
    double pump_center_ps;
    double absorber_width_ps;
  };
  Resolved resolve(double length_m, double walk_off_s_per_m, double pump_fwhm_ps, bool raman) const;
};

/// Everything needed to turn a pump energy into switching probabilities.
struct SwitchSetup {
  FiberSpec fiber;  // length_m is ignored; lengths are passed explicitly
  double pump_fwhm_ps = 5.0;
  SignalSpec signal;
  GridSettings grid;
  PropagationOptions options = default_switch_options();
  std::size_t workers = 0;  // 0: FIBERSIM_WORKERS or hardware concurrency

  static PropagationOptions default_switch_options();
};

/// One propagation to the longest length; one switching point per length.
std::vector<SwitchPoint> evaluate_switch(const SwitchSetup& setup, double energy_nJ, std::span<const double> lengths_m);

/// Switching curve over increasing energies. Propagations run concurrently;
/// the result is independent of scheduling.
SwitchCurve energy_sweep(const SwitchSetup& setup, double length_m, std::span<const double> energies_nJ);

/// Curves for several lengths from a shared set of propagations.
std::vector<SwitchCurve> energy_sweep_lengths(const SwitchSetup& setup, std::span<const double> lengths_m,
                                              std::span<const double> energies_nJ);

struct SpanResult {
  double theta = 0.95;
  bool found = false;
  double E_lo = 0.0;
  double E_hi = 0.0;
  double width() const { return found ? E_hi - E_lo : 0.0; }
  bool open_low = false;   // threshold already met at the first sample
  bool open_high = false;  // threshold still met at the last sample
  std::size_t refinement_runs = 0;
};

using TransmissionFn = std::function<double(double energy_nJ)>;

/// Maximal contiguous run of samples with T >= theta, starting at the first
/// sample that reaches theta. Endpoints are refined by bisection on
/// `evaluate` down to `resolution_nJ`, or linearly interpolated between the
/// bracketing samples if `evaluate` is empty.
SpanResult span_for_threshold(const SwitchCurve& curve, double theta = 0.95, const TransmissionFn& evaluate = {},
                              double resolution_nJ = 0.01);

struct SpanCell {
  double length_m;
  double pump_fwhm_ps;
  double raman_fraction;
  SpanResult span;
  SwitchCurve curve;  // coarse sweep the span was taken from
  std::optional<std::string> error;
};

struct SpanGridRequest {
  std::vector<double> lengths_m{100, 200, 300, 400, 500};
  std::vector<double> pump_fwhms_ps{4, 5, 6};
  std::vector<double> raman_fractions{0.0, 0.18};
  std::vector<double> energies_nJ;  // coarse sweep shared by every cell
  double theta = 0.95;
  double resolution_nJ = 0.01;  // 0 disables bisection refinement
};

/// Energy span for every (length, width, f_R) cell. Per-cell failures are
/// recorded and the table still completes.
std::vector<SpanCell> span_vs_length(const SwitchSetup& base, const SpanGridRequest& request);

/// Ordered parallel map over [0, count) using up to `workers` threads.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& body);

/// FIBERSIM_WORKERS if set, else hardware concurrency (at least 1).
std::size_t default_worker_count();

}  // namespace fibersim
