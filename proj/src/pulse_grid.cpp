#include "fibersim/pulse_grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "fibersim/constants.hpp"
#include "fibersim/fiber_model.hpp"

namespace fibersim {

namespace {

bool is_power_of_two(std::size_t n) { return n >= 2 && (n & (n - 1)) == 0; }

}  // namespace

Grid::Grid(std::size_t n, double window_ps, double carrier_wavelength_nm)
    : n_(n), window_ps_(window_ps), carrier_nm_(carrier_wavelength_nm) {
  if (!is_power_of_two(n)) {
    std::ostringstream os;
    os << "grid size " << n << " is not a power of two";
    throw DomainError(os.str());
  }
  if (!(window_ps > 0.0)) throw DomainError("grid window must be positive");
  if (!(carrier_wavelength_nm > 0.0)) throw DomainError("carrier wavelength must be positive");
  omegas_.resize(n_);
  for (std::size_t j = 0; j < n_; ++j) omegas_[j] = omega(j);
}

double Grid::domega() const { return 2.0 * kPi / (window_ps_ * units::ps); }

double Grid::omega0() const { return wavelength_to_angular(carrier_nm_ * units::nm); }

double Grid::omega(std::size_t j) const {
  const double idx = j < n_ / 2 ? static_cast<double>(j) : static_cast<double>(j) - static_cast<double>(n_);
  return idx * domega();
}

double Grid::wavelength_nm(std::size_t j) const {
  return angular_to_wavelength(omega0() + omegas_[j]) / units::nm;
}

GridPtr make_grid(std::size_t n, double window_ps, double carrier_wavelength_nm) {
  return std::make_shared<const Grid>(n, window_ps, carrier_wavelength_nm);
}

Envelope gaussian_pulse(double fwhm_ps, double energy_nJ, const GridPtr& grid, double center_ps) {
  if (!(fwhm_ps > 0.0)) throw DomainError("pulse FWHM must be positive");
  if (!(energy_nJ >= 0.0)) throw DomainError("pulse energy must be non-negative");
  if (fwhm_ps < 16.0 * grid->dt_ps()) throw DomainError("pulse FWHM is resolved by fewer than 16 samples");
  const double t0 = fwhm_ps / (2.0 * std::sqrt(std::log(2.0)));
  // -80 dB half-extent of the intensity profile.
  const double extent = t0 * std::sqrt(8.0 * std::log(10.0));
  if (std::abs(center_ps) + extent > 0.5 * grid->window_ps() || grid->window_ps() < 10.0 * fwhm_ps)
    throw DomainError("pulse too wide for the time window");

  Envelope env(grid);
  const double p0 = energy_nJ * units::nJ / (std::sqrt(kPi) * t0 * units::ps);
  for (std::size_t k = 0; k < grid->size(); ++k) {
    const double x = (grid->time(k) / units::ps - center_ps) / t0;
    env.field[k] = std::sqrt(p0) * std::exp(-0.5 * x * x);
  }
  return env;
}

Envelope sech_pulse(double t0_ps, double peak_power_W, const GridPtr& grid, double center_ps) {
  if (!(t0_ps > 0.0)) throw DomainError("sech width must be positive");
  Envelope env(grid);
  for (std::size_t k = 0; k < grid->size(); ++k) {
    const double x = (grid->time(k) / units::ps - center_ps) / t0_ps;
    env.field[k] = std::sqrt(peak_power_W) / std::cosh(x);
  }
  return env;
}

double energy_nJ(const Envelope& env) {
  double sum = 0.0;
  for (const auto& a : env.field) sum += std::norm(a);
  return sum * env.grid->dt() / units::nJ;
}

double peak_power_W(const Envelope& env) {
  double peak = 0.0;
  for (const auto& a : env.field) peak = std::max(peak, std::norm(a));
  return peak;
}

double fwhm_ps(const Envelope& env) {
  const std::size_t n = env.field.size();
  const double peak = peak_power_W(env);
  if (!(peak > 0.0)) throw DomainError("FWHM undefined for an all-zero field");
  const double half = 0.5 * peak;
  std::size_t first = 0, last = n - 1;
  while (std::norm(env.field[first]) < half) ++first;
  while (std::norm(env.field[last]) < half) --last;

  const double dt = env.grid->dt_ps();
  auto crossing = [&](std::size_t below, std::size_t above) {
    const double pb = std::norm(env.field[below]), pa = std::norm(env.field[above]);
    const double frac = (half - pb) / (pa - pb);
    return static_cast<double>(below) + frac * (static_cast<double>(above) - static_cast<double>(below));
  };
  const double left = first == 0 ? 0.0 : crossing(first - 1, first);
  const double right = last == n - 1 ? static_cast<double>(n - 1) : crossing(last + 1, last);
  return (right - left) * dt;
}

std::vector<double> power_spectrum(const Envelope& env) {
  const FftPair fft(env.field.size());
  CVector spec(env.field.size());
  fft.to_spectrum(env.field, spec);
  std::vector<double> out(spec.size());
  for (std::size_t j = 0; j < spec.size(); ++j) out[j] = std::norm(spec[j]);
  return out;
}

double mean_frequency_offset_THz(const Envelope& env) {
  const auto ps = power_spectrum(env);
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < ps.size(); ++j) {
    num += env.grid->omegas()[j] * ps[j];
    den += ps[j];
  }
  if (!(den > 0.0)) return 0.0;
  return num / den / (2.0 * kPi) / units::THz;
}

PulseMeasures measures(const Envelope& env) {
  PulseMeasures m;
  m.energy_nJ = energy_nJ(env);
  m.peak_power_W = peak_power_W(env);
  m.fwhm_ps = fwhm_ps(env);
  m.mean_frequency_offset_THz = mean_frequency_offset_THz(env);

  const auto ps = power_spectrum(env);
  const std::size_t n = ps.size();
  // Highest frequency first == shortest wavelength first.
  m.spectrum.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (n / 2 - 1 + n - i) % n;
    m.spectrum.push_back({env.grid->wavelength_nm(j), ps[j]});
  }
  return m;
}

void write_envelope_csv(std::ostream& os, const Envelope& env) {
  os << "t_ps,re_sqrtW,im_sqrtW\n";
  char line[96];
  for (std::size_t k = 0; k < env.field.size(); ++k) {
    std::snprintf(line, sizeof line, "%.9g,%.9g,%.9g\n", env.grid->time(k) / units::ps, env.field[k].real(),
                  env.field[k].imag());
    os << line;
  }
}

}  // namespace fibersim
