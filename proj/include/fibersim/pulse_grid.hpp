#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "fibersim/fft.hpp"

namespace fibersim {

/// Uniform time/frequency grid around a carrier.
///
/// Time samples are t_k = (k - n/2) dt, so t = 0 is sample n/2. Angular
/// frequency offsets use standard FFT ordering: w_j = j dw for j < n/2 and
/// (j - n) dw otherwise, with dw = 2 pi / window. A positive offset is a
/// higher optical frequency (shorter wavelength).
class Grid {
 public:
  Grid(std::size_t n, double window_ps, double carrier_wavelength_nm);

  std::size_t size() const { return n_; }
  double window_ps() const { return window_ps_; }
  double dt_ps() const { return window_ps_ / static_cast<double>(n_); }
  double dt() const { return dt_ps() * 1e-12; }  // s
  double domega() const;                          // rad/s
  double carrier_wavelength_nm() const { return carrier_nm_; }
  double omega0() const;                          // rad/s

  double time(std::size_t k) const { return (static_cast<double>(k) - static_cast<double>(n_ / 2)) * dt(); }
  double omega(std::size_t j) const;  // offset from the carrier, rad/s
  /// Absolute wavelength of frequency bin j in nm.
  double wavelength_nm(std::size_t j) const;

  const std::vector<double>& omegas() const { return omegas_; }

 private:
  std::size_t n_;
  double window_ps_;
  double carrier_nm_;
  std::vector<double> omegas_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// Throws DomainError (from fiber_model.hpp) for non-power-of-two n.
GridPtr make_grid(std::size_t n, double window_ps, double carrier_wavelength_nm);

/// Complex envelope A(t) in sqrt(W) at position z (m).
struct Envelope {
  GridPtr grid;
  CVector field;
  double z = 0.0;

  Envelope() = default;
  explicit Envelope(GridPtr g) : grid(std::move(g)), field(grid->size()) {}
};

/// Gaussian with intensity FWHM `fwhm_ps` carrying `energy_nJ`, centred at
/// `center_ps`.
Envelope gaussian_pulse(double fwhm_ps, double energy_nJ, const GridPtr& grid, double center_ps = 0.0);

/// sqrt(P0) sech(t / T0). Used as the fundamental-soliton fixture.
Envelope sech_pulse(double t0_ps, double peak_power_W, const GridPtr& grid, double center_ps = 0.0);

struct SpectrumSample {
  double wavelength_nm;
  double power_density;  // |A(w)|^2, arbitrary but consistent units
};

struct PulseMeasures {
  double energy_nJ = 0.0;
  double fwhm_ps = 0.0;
  double peak_power_W = 0.0;
  double mean_frequency_offset_THz = 0.0;
  std::vector<SpectrumSample> spectrum;  // ordered by increasing wavelength
};

double energy_nJ(const Envelope& env);
double peak_power_W(const Envelope& env);

/// Outermost half-maximum crossing pair, linearly interpolated. Throws
/// DomainError for an all-zero field.
double fwhm_ps(const Envelope& env);

/// |A(w)|^2 in FFT order.
std::vector<double> power_spectrum(const Envelope& env);

/// First moment of |A(w)|^2 in THz (negative = red-shifted).
double mean_frequency_offset_THz(const Envelope& env);

PulseMeasures measures(const Envelope& env);

/// CSV with header `t_ps,re_sqrtW,im_sqrtW` and 9 significant digits.
void write_envelope_csv(std::ostream& os, const Envelope& env);

}  // namespace fibersim
