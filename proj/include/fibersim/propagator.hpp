#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fibersim/fiber_model.hpp"
#include "fibersim/pulse_grid.hpp"

namespace fibersim {

/// Non-finite field or a spectrum that has run into the band edge.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double z_m, double dz_m)
      : std::runtime_error(what), z_(z_m), dz_(dz_m) {}
  double z() const { return z_; }
  double dz() const { return dz_; }

 private:
  double z_;
  double dz_;
};

enum class Scheme { split_step, rk4ip };
enum class StepControl { fixed, adaptive };
enum class ErrorEstimator {
  step_doubling,  // one step of dz against two of dz/2
  embedded,       // RK4(3) pair sharing the last stage (rk4ip only)
};

struct PropagationOptions {
  Scheme scheme = Scheme::rk4ip;
  StepControl step_control = StepControl::adaptive;
  ErrorEstimator estimator = ErrorEstimator::step_doubling;
  double local_error_target = 1e-6;
  double fixed_dz_m = 0.01;
  double initial_dz_m = 0.0;  // 0 selects length / 1e4
  double max_dz_m = 0.0;      // 0 means unbounded
  bool include_shock = true;
  bool include_raman = true;  // f_R from FiberSpec when on, 0 when off
  bool include_loss = true;
  bool wavelength_dependent_loss = true;
  bool frequency_dependent_area = true;
  int max_dispersion_order = 4;
  std::size_t snapshot_count = 200;
  std::optional<double> gamma_override;  // 1/(W km), frequency independent
  std::optional<DispersionCoeffs> dispersion_override;
  /// Absorbing layers of this width at both ends of the time window; 0 keeps
  /// the window periodic. Content crossing a layer decays at up to
  /// `absorber_strength_per_m`.
  double absorber_width_ps = 0.0;
  double absorber_strength_per_m = 10.0;
  std::size_t max_steps = 20'000'000;

  void validate() const;
};

struct StepInfo {
  double z_m;
  double dz_m;
  double local_error;
  double energy_nJ;
};

struct PropagationRecord {
  std::vector<Envelope> snapshots;  // z-ordered, first is the input
  std::vector<StepInfo> steps;      // accepted steps
  std::size_t rejected_steps = 0;
  double max_band_edge_fraction = 0.0;
  double max_time_edge_fraction = 0.0;
  double absorbed_energy_nJ = 0.0;
  std::vector<std::string> warnings;
};

struct PropagationResult {
  Envelope output;
  PropagationRecord record;
};

/// Called with the time-domain field at z = 0 and after every accepted step.
using StepObserver = std::function<void(double z_m, std::span<const cplx> field)>;

/// Integrate the generalized NLS along `fiber.length_m`.
PropagationResult propagate(const Envelope& input, const FiberSpec& fiber, const PropagationOptions& opts,
                            const StepObserver& observer = {});

/// Fraction of spectral energy in the outer 1/16 of the frequency window.
double band_edge_fraction(std::span<const double> power_spectrum_fft_order);

enum class MapDomain { time, wavelength };

/// Snapshot-by-sample matrix in dB relative to the global maximum, floored at
/// `floor_dB`. Wavelength rows are ordered by increasing wavelength.
struct EvolutionMap {
  MapDomain domain;
  std::vector<double> z_m;
  std::vector<double> axis;  // t in ps or wavelength in nm
  std::vector<std::vector<double>> dB;
  double floor_dB;
};

EvolutionMap evolution_map(const PropagationRecord& record, MapDomain domain, double floor_dB = -40.0);

}  // namespace fibersim
