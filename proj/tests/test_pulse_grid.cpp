#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "fibersim/constants.hpp"
#include "fibersim/fiber_model.hpp"
#include "fibersim/pulse_grid.hpp"

using namespace fibersim;

TEST_CASE("grid spacing") {
  const Grid g(1u << 14, 128.0, 1550.0);
  CHECK(g.dt_ps() * 1e3 == doctest::Approx(7.8125).epsilon(1e-14));
  CHECK(g.domega() / (2 * kPi) / 1e9 == doctest::Approx(1000.0 / 128.0).epsilon(1e-12));
  CHECK(g.time(g.size() / 2) == 0.0);
  CHECK(g.omega(1) == doctest::Approx(g.domega()));
  CHECK(g.omega(g.size() - 1) == doctest::Approx(-g.domega()));
  CHECK(g.omega(g.size() / 2) == doctest::Approx(-kPi / g.dt()));
  CHECK(g.wavelength_nm(0) == doctest::Approx(1550.0));
  CHECK(g.wavelength_nm(1) < 1550.0);
  CHECK_THROWS_AS(Grid(1000, 128.0, 1550.0), DomainError);
  CHECK_THROWS_AS(Grid(1024, 0.0, 1550.0), DomainError);
}

TEST_CASE("Gaussian pulse construction") {
  const auto grid = make_grid(1u << 14, 128.0, 1550.0);
  const Envelope e = gaussian_pulse(5.0, 2.5, grid);
  const double t0 = 5.0 / (2.0 * std::sqrt(std::log(2.0)));
  CHECK(t0 == doctest::Approx(3.0027).epsilon(1e-4));
  const double p0 = 2.5e-9 / (std::sqrt(kPi) * t0 * 1e-12);
  CHECK(p0 == doctest::Approx(469.7).epsilon(1e-4));
  CHECK(peak_power_W(e) == doctest::Approx(p0).epsilon(1e-9));
  CHECK(energy_nJ(e) == doctest::Approx(2.5).epsilon(1e-6));
  CHECK(std::abs(fwhm_ps(e) - 5.0) <= grid->dt_ps());
  CHECK(std::abs(mean_frequency_offset_THz(e)) < 1e-9);
}

TEST_CASE("construction is the identity on energy and width") {
  const auto grid = make_grid(1u << 14, 128.0, 1550.0);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> width(1.0, 10.0), energy(0.01, 5.0);
  for (int i = 0; i < 25; ++i) {
    const double w = width(rng), e = energy(rng);
    const Envelope env = gaussian_pulse(w, e, grid, 3.0);
    CHECK(energy_nJ(env) == doctest::Approx(e).epsilon(1e-6));
    CHECK(std::abs(fwhm_ps(env) - w) <= grid->dt_ps());
  }
}

TEST_CASE("pulse preconditions") {
  const auto grid = make_grid(1024, 64.0, 1550.0);  // dt = 62.5 fs
  CHECK_THROWS_AS(gaussian_pulse(0.5, 1.0, grid), DomainError);  // 8 samples across
  CHECK_THROWS_AS(gaussian_pulse(8.0, 1.0, grid), DomainError);  // window < 10 fwhm
  CHECK_THROWS_AS(gaussian_pulse(2.0, 1.0, grid, 28.0), DomainError);
  CHECK_THROWS_AS(gaussian_pulse(2.0, -1.0, grid), DomainError);
  CHECK_NOTHROW(gaussian_pulse(2.0, 1.0, grid, 20.0));
}

TEST_CASE("Parseval on random fields") {
  const auto grid = make_grid(4096, 64.0, 1550.0);
  std::mt19937 rng(11);
  std::normal_distribution<double> g;
  Envelope env(grid);
  for (auto& a : env.field) a = {g(rng), g(rng)};
  const auto ps = power_spectrum(env);
  double spectral = 0.0;
  for (double p : ps) spectral += p;
  spectral *= grid->dt() / double(grid->size()) / units::nJ;
  CHECK(spectral == doctest::Approx(energy_nJ(env)).epsilon(1e-12));

  const FftPair fft(grid->size());
  CVector s(grid->size()), back(grid->size());
  fft.to_spectrum(env.field, s);
  fft.to_time(s, back);
  Envelope round(grid);
  round.field = back;
  CHECK(energy_nJ(round) == doctest::Approx(energy_nJ(env)).epsilon(1e-12));
}

TEST_CASE("FWHM of split pulses uses the outer crossings") {
  const auto grid = make_grid(4096, 64.0, 1550.0);
  Envelope a = gaussian_pulse(1.0, 1.0, grid, -5.0);
  const Envelope b = gaussian_pulse(1.0, 1.0, grid, 5.0);
  for (std::size_t k = 0; k < a.field.size(); ++k) a.field[k] += b.field[k];
  CHECK(fwhm_ps(a) == doctest::Approx(11.0).epsilon(2e-3));
  Envelope zero(grid);
  CHECK_THROWS_AS(fwhm_ps(zero), DomainError);
}

TEST_CASE("frequency offset sign") {
  // exp(-i dw t) shifts the spectrum to +dw, toward shorter wavelengths.
  const auto grid = make_grid(4096, 64.0, 1550.0);
  Envelope e = gaussian_pulse(2.0, 1.0, grid);
  const double dw = 2 * kPi * 1e12;
  for (std::size_t k = 0; k < e.field.size(); ++k) e.field[k] *= std::polar(1.0, -dw * grid->time(k));
  CHECK(mean_frequency_offset_THz(e) == doctest::Approx(1.0).epsilon(1e-6));
  const PulseMeasures m = measures(e);
  CHECK(m.spectrum.size() == grid->size());
  for (std::size_t i = 1; i < m.spectrum.size(); ++i) CHECK(m.spectrum[i].wavelength_nm > m.spectrum[i - 1].wavelength_nm);
  std::size_t peak = 0;
  for (std::size_t i = 0; i < m.spectrum.size(); ++i)
    if (m.spectrum[i].power_density > m.spectrum[peak].power_density) peak = i;
  CHECK(m.spectrum[peak].wavelength_nm < 1550.0);
}

TEST_CASE("envelope CSV") {
  const auto grid = make_grid(16, 1.0, 1550.0);
  Envelope e(grid);
  e.field[8] = {1.5, -0.25};
  std::ostringstream os;
  write_envelope_csv(os, e);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "t_ps,re_sqrtW,im_sqrtW");
  int rows = 0;
  std::string row8;
  while (std::getline(is, line)) {
    if (rows == 8) row8 = line;
    ++rows;
  }
  CHECK(rows == 16);
  CHECK(row8 == "0,1.5,-0.25");
}
