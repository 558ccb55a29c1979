#include <doctest.h>

#include <atomic>
#include <cmath>
#include <random>

#include "fibersim/constants.hpp"
#include "fibersim/sagnac.hpp"

using namespace fibersim;

namespace {

double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

SwitchCurve curve_from(const std::vector<double>& e, const std::function<double(double)>& T) {
  SwitchCurve c;
  for (double x : e) c.points.push_back({x, T(x), 1.0 - T(x), 0.0});
  return c;
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * double(i) / double(n - 1);
  return v;
}

PhaseProfile uniform_phase(double phi, std::size_t n = 512, double dt = 0.01) {
  PhaseProfile p;
  p.dt_ps = dt;
  p.phi.assign(n, phi);
  return p;
}

// Small, fast switching setup without walk-off.
SwitchSetup small_setup() {
  SwitchSetup s;
  s.pump_fwhm_ps = 2.0;
  s.signal.walk_off_enabled = false;
  s.signal.wavelength_nm = 1550.0;
  s.grid.n = 2048;
  s.grid.window_ps = 64.0;
  s.grid.absorber_width_ps = 0.0;
  s.workers = 1;
  return s;
}

}  // namespace

TEST_CASE("walk-off and delay conventions") {
  const FiberSpec f;
  SignalSpec s;
  const double oracle = simpson([](double l) { return 0.02 * (l - std::pow(1313.0, 4) / std::pow(l, 3)); }, 1550.0,
                                1310.0, 2000) * 1e-15;
  CHECK(s.walk_off(f, 1550.0) == doctest::Approx(oracle).epsilon(1e-9));
  CHECK(s.resolved_delay_ps(f, 1550.0, 100.0) == doctest::Approx(-0.5 * oracle * 100.0 / 1e-12));
  s.delay_ps = 1.5;
  CHECK(s.resolved_delay_ps(f, 1550.0, 100.0) == 1.5);
  s.walk_off_enabled = false;
  CHECK(s.walk_off(f, 1550.0) == 0.0);
  s.fwhm_ps = 0.0;
  CHECK_THROWS_AS(s.validate(), DomainError);
}

TEST_CASE("XPM coefficient") {
  const FiberSpec f;
  const double a = lp01_overlap_area(1550.0, 1310.0, f, ModeCheck::lp01_only);
  CHECK(xpm_coefficient(f, 1550.0, 1310.0) ==
        doctest::Approx(2 * kPi * 2.2e-20 / (1310e-9 * a * 1e-12) * 1e3).epsilon(1e-12));
  CHECK(xpm_coefficient(f, 1550.0, 1550.0) == doctest::Approx(kerr_coefficient(1550.0)).epsilon(1e-9));
}

TEST_CASE("continuous-wave pump gives phi = 2 gamma P L") {
  const auto grid = make_grid(256, 10.0, 1550.0);
  const double P = 3.0, gamma = 1.5, L = 80.0;
  CVector cw(256, cplx(std::sqrt(P), 0.0));
  for (const double walk : {0.0, -1e-14}) {
    XpmAccumulator acc(grid, 0.0, walk, gamma, L);
    for (double z = 0.0; z <= 100.0; z += 7.0) acc.observe(z, cw);
    REQUIRE(acc.complete());
    const PhaseProfile p = acc.phase();
    // Away from samples that slide out of the window.
    CHECK(p.at_center() == doctest::Approx(2.0 * gamma * 1e-3 * P * L).epsilon(1e-12));
  }
}

TEST_CASE("walk-through phase equals 2 gamma E / |d|") {
  // A frozen Gaussian pump swept completely past the signal.
  const auto grid = make_grid(4096, 200.0, 1550.0);
  const Envelope pump = gaussian_pulse(5.0, 2.0, grid);
  const double d = -1.9e-12, L = 100.0, gamma = 1.5;
  const double delay = -0.5 * d * L / 1e-12;
  XpmAccumulator acc(grid, delay, d, gamma, L);
  for (int i = 0; i <= 2000; ++i) acc.observe(L * i / 2000.0, pump.field);
  const double expected = 2.0 * gamma * 1e-3 * 2.0e-9 / std::abs(d);
  CHECK(acc.phase().at_center() == doctest::Approx(expected).epsilon(1e-4));

  // The pump centre offset moves the collision with it.
  const Envelope shifted = gaussian_pulse(5.0, 2.0, grid, -40.0);
  XpmAccumulator acc2(grid, delay, d, gamma, L, -40.0);
  for (int i = 0; i <= 2000; ++i) acc2.observe(L * i / 2000.0, shifted.field);
  CHECK(acc2.phase().at_center() == doctest::Approx(expected).epsilon(1e-4));
}

TEST_CASE("accumulator contract") {
  const auto grid = make_grid(64, 4.0, 1550.0);
  CVector f(64, cplx(1.0, 0.0));
  XpmAccumulator acc(grid, 0.0, 0.0, 1.0, 10.0);
  CHECK_THROWS_AS(acc.observe(1.0, f), DomainError);
  acc.observe(0.0, f);
  CHECK_THROWS_AS(acc.observe(0.0, f), DomainError);
  CHECK_THROWS_AS(acc.phase(), DomainError);
  acc.observe(4.0, f);
  acc.observe(12.0, f);  // clipped to 10 m
  CHECK(acc.phase().at_center() == doctest::Approx(2e-3 * 10.0));
}

TEST_CASE("phase scales linearly with gamma for a frozen record") {
  const auto grid = make_grid(1024, 32.0, 1550.0);
  PropagationOptions o;
  o.snapshot_count = 50;
  FiberSpec f;
  f.length_m = 10.0;
  const auto r = propagate(gaussian_pulse(2.0, 0.5, grid), f, o);
  SignalSpec s;
  const PhaseProfile a = xpm_phase(r.record, s, f, 1.0);
  const PhaseProfile b = xpm_phase(r.record, s, f, 2.0);
  for (std::size_t k = 0; k < a.phi.size(); ++k) CHECK(b.phi[k] == doctest::Approx(2.0 * a.phi[k]).epsilon(1e-14));
}

TEST_CASE("transmission of uniform phases") {
  const SignalSpec s;
  CHECK(switch_probabilities(uniform_phase(0.0), s).T == 0.0);
  CHECK(switch_probabilities(uniform_phase(kPi), s).T == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(switch_probabilities(uniform_phase(kPi / 2), s).T == doctest::Approx(0.5).epsilon(1e-12));
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  PhaseProfile p = uniform_phase(0.0);
  for (int trial = 0; trial < 20; ++trial) {
    for (auto& x : p.phi) x = u(rng);
    const auto tr = switch_probabilities(p, s);
    CHECK(tr.T + tr.R == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(tr.T >= 0.0);
    CHECK(tr.T <= 1.0);
  }
}

TEST_CASE("signal profile weighting and delay search") {
  PhaseProfile p = uniform_phase(0.0, 2001, 0.01);
  p.delay_ps = 0.0;
  // pi inside |u - 3| < 0.5 ps only.
  for (std::size_t k = 0; k < p.phi.size(); ++k)
    if (std::abs(p.time_ps(k) - 3.0) < 0.5) p.phi[k] = kPi;
  SignalSpec s;
  s.fwhm_ps = 0.2;
  CHECK(switch_probabilities(p, s).T < 1e-9);
  s.maximize_over_delay = true;
  const auto best = switch_probabilities(p, s);
  CHECK(best.T == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(best.delay_ps - 3.0) < 0.4);
}

TEST_CASE("zero pump never switches") {
  SwitchSetup s = small_setup();
  const double lengths[] = {5.0, 10.0};
  const auto pts = evaluate_switch(s, 0.0, lengths);
  for (const auto& p : pts) {
    CHECK(p.T == 0.0);
    CHECK(p.R == 1.0);
  }
}

TEST_CASE("automatic grid") {
  GridSettings g;
  const double d = -1.916e-12;
  auto r = g.resolve(100.0, d, 5.0, true);
  CHECK(r.n == 8192);
  CHECK(r.window_ps == 128.0);
  CHECK(r.pump_center_ps == doctest::Approx(-64.0 + 8.0 + 17.5));
  r = g.resolve(500.0, d, 4.0, true);
  CHECK(r.window_ps == 512.0);
  CHECK(r.n == 32768);
  r = g.resolve(500.0, d, 4.0, false);
  CHECK(r.window_ps == 128.0);
  CHECK(r.pump_center_ps == 0.0);
  g.n = 4096;
  g.window_ps = 64.0;
  g.pump_center_ps = 3.0;
  r = g.resolve(500.0, d, 4.0, true);
  CHECK(r.n == 4096);
  CHECK(r.window_ps == 64.0);
  CHECK(r.pump_center_ps == 3.0);
}

TEST_CASE("energy sweep without walk-off") {
  SwitchSetup s = small_setup();
  s.options.include_raman = false;
  const auto energies = linspace(0.0, 0.6, 7);
  const double lengths[] = {2.0, 4.0};
  const auto curves = energy_sweep_lengths(s, lengths, energies);
  REQUIRE(curves.size() == 2);
  // Phase grows with energy below the first peak, so T does too.
  for (const auto& c : curves) {
    CHECK(c.points.size() == energies.size());
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      CHECK(c.points[i].T > c.points[i - 1].T);
      CHECK(c.points[i].phase_at_signal_center < kPi);
    }
  }
  // Longer fiber, more phase.
  CHECK(curves[1].points.back().phase_at_signal_center > curves[0].points.back().phase_at_signal_center);

  // Scheduling does not change the result.
  s.workers = 3;
  const auto again = energy_sweep_lengths(s, lengths, energies);
  for (std::size_t l = 0; l < 2; ++l)
    for (std::size_t i = 0; i < energies.size(); ++i) CHECK(again[l].points[i].T == curves[l].points[i].T);

  const double bad[] = {1.0, 0.5};
  CHECK_THROWS_AS(energy_sweep(s, 2.0, bad), DomainError);
  CHECK_THROWS_AS(energy_sweep(s, 2.0, std::span<const double>{}), DomainError);
}

TEST_SUITE("span") {
  TEST_CASE("interpolated span of a smooth lobe") {
    // T = sin^2(pi E / 4) peaks at E = 2.
    auto T = [](double e) { return std::pow(std::sin(kPi * e / 4.0), 2); };
    const double lo = 4.0 / kPi * std::asin(std::sqrt(0.95));
    const auto c = curve_from(linspace(0.0, 3.5, 141), T);
    const SpanResult r = span_for_threshold(c, 0.95);
    REQUIRE(r.found);
    CHECK(r.E_lo == doctest::Approx(lo).epsilon(1e-3));
    CHECK(r.E_hi == doctest::Approx(4.0 - lo).epsilon(1e-3));
    CHECK(r.width() == doctest::Approx(4.0 - 2 * lo).epsilon(2e-3));
    CHECK_FALSE(r.open_low);
    CHECK_FALSE(r.open_high);

    const SpanResult b = span_for_threshold(curve_from(linspace(0.0, 3.5, 15), T), 0.95, T, 0.01);
    CHECK(std::abs(b.E_lo - lo) <= 0.01);
    CHECK(std::abs(b.E_hi - (4.0 - lo)) <= 0.01);
    CHECK(b.refinement_runs > 0);
  }

  TEST_CASE("first run wins, open ends flagged, no span reported") {
    const auto e = linspace(0.0, 10.0, 11);
    auto two_lobes = [](double x) { return (x >= 2 && x <= 3) || (x >= 6 && x <= 9) ? 1.0 : 0.0; };
    SpanResult r = span_for_threshold(curve_from(e, two_lobes), 0.95);
    REQUIRE(r.found);
    CHECK(r.E_lo > 1.0);
    CHECK(r.E_hi < 4.0);

    r = span_for_threshold(curve_from(e, [](double x) { return x < 5 ? 1.0 : 0.0; }), 0.95);
    CHECK(r.open_low);
    CHECK(r.E_lo == 0.0);
    r = span_for_threshold(curve_from(e, [](double x) { return x > 5 ? 1.0 : 0.0; }), 0.95);
    CHECK(r.open_high);
    CHECK(r.E_hi == 10.0);

    r = span_for_threshold(curve_from(e, [](double) { return 0.5; }), 0.95);
    CHECK_FALSE(r.found);
    CHECK(r.width() == 0.0);
    CHECK_THROWS_AS(span_for_threshold(curve_from(e, [](double) { return 0.5; }), 1.5), DomainError);
  }

  TEST_CASE("a single-cell grid reduces to span_for_threshold") {
    SwitchSetup s = small_setup();
    s.fiber.raman_fraction = 0.0;
    s.options.include_raman = false;
    SpanGridRequest req;
    req.lengths_m = {4.0};
    req.pump_fwhms_ps = {2.0};
    req.raman_fractions = {0.0};
    req.energies_nJ = linspace(0.1, 1.5, 8);
    req.theta = 0.9;
    req.resolution_nJ = 0.05;
    const auto cells = span_vs_length(s, req);
    REQUIRE(cells.size() == 1);
    CHECK_FALSE(cells[0].error.has_value());

    const auto curve = energy_sweep(s, 4.0, req.energies_nJ);
    const double L[] = {4.0};
    const auto direct = span_for_threshold(curve, 0.9, [&](double e) { return evaluate_switch(s, e, L).front().T; },
                                           0.05);
    CHECK(cells[0].span.found == direct.found);
    CHECK(cells[0].span.E_lo == direct.E_lo);
    CHECK(cells[0].span.E_hi == direct.E_hi);
    CHECK(cells[0].curve.points.size() == curve.points.size());
  }

  TEST_CASE("cell failures are recorded and the table completes") {
    SwitchSetup s = small_setup();
    s.grid.n = 256;
    s.grid.window_ps = 32.0;  // 8 samples across the 1 ps pulse
    SpanGridRequest req;
    req.lengths_m = {20.0};
    req.pump_fwhms_ps = {1.0, 3.0};
    req.raman_fractions = {0.0};
    req.energies_nJ = {0.5, 1.0};
    const auto cells = span_vs_length(s, req);
    REQUIRE(cells.size() == 2);
    CHECK(cells[0].error.has_value());
    CHECK_FALSE(cells[1].error.has_value());
  }
}

TEST_CASE("parallel_for") {
  std::vector<int> out(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { out[i] = int(i) * 2; });
  for (int i = 0; i < 100; ++i) CHECK(out[i] == 2 * i);
  std::atomic<int> count{0};
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [&](std::size_t i) {
                                 ++count;
                                 if (i == 4) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
  CHECK(count == 10);
  CHECK(default_worker_count() >= 1);
}
