#include "fibersim/fiber_model.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <sstream>

#include "fibersim/constants.hpp"

namespace fibersim {

namespace {

constexpr double kFirstBesselZero = 2.404825557695773;
constexpr double kQuadratureTolerance = 1e-10;

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    std::ostringstream os;
    os << name << " must be positive and finite (got " << value << ")";
    throw DomainError(os.str());
  }
}

double s0_si(const FiberSpec& spec) { return spec.disp_S0 * 1e3; }  // ps/(nm^2 km) -> s/m^3

double D_si(double lambda, const FiberSpec& spec) {
  const double l0 = spec.disp_lambda0_nm * units::nm;
  return 0.25 * s0_si(spec) * (lambda - std::pow(l0, 4) / std::pow(lambda, 3));
}

double dD_si(double lambda, const FiberSpec& spec) {
  const double l0 = spec.disp_lambda0_nm * units::nm;
  return 0.25 * s0_si(spec) * (1.0 + 3.0 * std::pow(l0 / lambda, 4));
}

double d2D_si(double lambda, const FiberSpec& spec) {
  const double l0 = spec.disp_lambda0_nm * units::nm;
  return 0.25 * s0_si(spec) * (-12.0 * std::pow(l0, 4) / std::pow(lambda, 5));
}

// Radial mode profile in r/a, normalized to 1 at the core boundary.
struct Lp01Profile {
  ModeSolution mode;
  double j0_u;
  double k0_w;

  double operator()(double rho) const {
    if (rho <= 1.0) return std::cyl_bessel_j(0.0, mode.u * rho) / j0_u;
    return std::cyl_bessel_k(0.0, mode.w * rho) / k0_w;
  }
};

Lp01Profile profile_for(double lambda_nm, const FiberSpec& spec, ModeCheck check) {
  const ModeSolution m = solve_lp01(lambda_nm, spec, check);
  return {m, std::cyl_bessel_j(0.0, m.u), std::cyl_bessel_k(0.0, m.w)};
}

// int_0^inf f(rho) rho d rho split at the core boundary.
template <class F>
double radial_integral(F&& f) {
  using boost::math::quadrature::gauss_kronrod;
  auto g = [&](double rho) { return f(rho) * rho; };
  const double core = gauss_kronrod<double, 31>::integrate(g, 0.0, 1.0, 15, kQuadratureTolerance);
  const double clad = gauss_kronrod<double, 31>::integrate(
      g, 1.0, std::numeric_limits<double>::infinity(), 15, kQuadratureTolerance);
  return core + clad;
}

}  // namespace

MultimodeError::MultimodeError(double v_number, double lambda_nm)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "fiber is multimode at " << lambda_nm << " nm (V = " << v_number << " >= 2.405)";
        return os.str();
      }()),
      v_(v_number) {}

void FiberSpec::validate() const {
  require_positive(core_radius_um, "core_radius_um");
  require_positive(cladding_index, "cladding_index");
  require_positive(index_step, "index_step");
  require_positive(n2, "n2");
  require_positive(loss_A_dB_km, "loss_A_dB_km");
  require_positive(loss_B_um, "loss_B_um");
  require_positive(loss_C_dB_um4_km, "loss_C_dB_um4_km");
  require_positive(disp_S0, "disp_S0");
  require_positive(disp_lambda0_nm, "disp_lambda0_nm");
  require_positive(tau1_fs, "tau1_fs");
  require_positive(tau2_fs, "tau2_fs");
  require_positive(length_m, "length_m");
  require_positive(reference_wavelength_nm, "reference_wavelength_nm");
  if (!(raman_fraction >= 0.0 && raman_fraction <= 1.0))
    throw DomainError("raman_fraction must lie in [0, 1]");
  const double v = v_number(reference_wavelength_nm, *this);
  if (v >= kFirstBesselZero) throw MultimodeError(v, reference_wavelength_nm);
}

double loss_dB_per_km(double lambda_um, const FiberSpec& spec) {
  require_positive(lambda_um, "wavelength");
  return spec.loss_A_dB_km * std::exp(-spec.loss_B_um / lambda_um) +
         spec.loss_C_dB_um4_km / std::pow(lambda_um, 4);
}

double dB_per_km_to_per_m(double dB_per_km) { return std::log(10.0) / 10.0 * dB_per_km / 1000.0; }

double dispersion_D(double lambda_nm, const FiberSpec& spec) {
  require_positive(lambda_nm, "wavelength");
  return D_si(lambda_nm * units::nm, spec) * 1e6;
}

double group_delay_difference(double lambda_nm, double lambda_ref_nm, const FiberSpec& spec) {
  require_positive(lambda_nm, "wavelength");
  require_positive(lambda_ref_nm, "reference wavelength");
  const double l0_4 = std::pow(spec.disp_lambda0_nm * units::nm, 4);
  auto antiderivative = [&](double l) { return 0.25 * s0_si(spec) * (0.5 * l * l + 0.5 * l0_4 / (l * l)); };
  return antiderivative(lambda_nm * units::nm) - antiderivative(lambda_ref_nm * units::nm);
}

double DispersionCoeffs::si(int order) const {
  if (order > max_order) return 0.0;
  switch (order) {
    case 2: return beta2 * 1e-27;
    case 3: return beta3 * 1e-39;
    case 4: return beta4 * 1e-51;
    default: return 0.0;
  }
}

DispersionCoeffs taylor_betas(double lambda_ref_nm, int max_order, const FiberSpec& spec) {
  if (max_order < 2 || max_order > 4) throw DomainError("dispersion order must be in 2..4");
  if (!(lambda_ref_nm >= 1200.0 && lambda_ref_nm <= 1700.0))
    throw DomainError("taylor_betas: reference wavelength outside [1200, 1700] nm");
  const double l = lambda_ref_nm * units::nm;
  const double k = 2.0 * kPi * kSpeedOfLight;
  const double D = D_si(l, spec), dD = dD_si(l, spec), d2D = d2D_si(l, spec);

  DispersionCoeffs c;
  c.lambda_ref_nm = lambda_ref_nm;
  c.max_order = max_order;
  c.beta2 = -l * l * D / k * 1e27;
  if (max_order >= 3) c.beta3 = l * l * (l * l * dD + 2.0 * l * D) / (k * k) * 1e39;
  if (max_order >= 4)
    c.beta4 = -l * l * (std::pow(l, 4) * d2D + 6.0 * std::pow(l, 3) * dD + 6.0 * l * l * D) / (k * k * k) * 1e51;
  return c;
}

double v_number(double lambda_nm, const FiberSpec& spec) {
  require_positive(lambda_nm, "wavelength");
  const double na = spec.cladding_index * std::sqrt(2.0 * spec.index_step);
  return 2.0 * kPi / (lambda_nm * 1e-3) * spec.core_radius_um * na;
}

ModeSolution solve_lp01(double lambda_nm, const FiberSpec& spec, ModeCheck check) {
  const double v = v_number(lambda_nm, spec);
  if (check == ModeCheck::single_mode && v >= kFirstBesselZero) throw MultimodeError(v, lambda_nm);
  if (!(v > 0.0)) throw DomainError("no guided LP01 mode (V <= 0)");

  // g(u) = u J1(u) K0(w) - w K1(w) J0(u): negative at u -> 0, positive at the
  // first zero of J0 or at u -> V, whichever comes first.
  auto g = [v](double u) {
    const double w = std::sqrt(std::max(v * v - u * u, 0.0));
    return u * std::cyl_bessel_j(1.0, u) * std::cyl_bessel_k(0.0, w) -
           w * std::cyl_bessel_k(1.0, w) * std::cyl_bessel_j(0.0, u);
  };
  double lo = 1e-12 * v;
  double hi = std::min(v, kFirstBesselZero) * (1.0 - 1e-14);
  if (!(g(lo) < 0.0 && g(hi) > 0.0)) throw DomainError("no guided LP01 mode found");
  // Bisect until the normalized propagation constant is pinned to 1e-12.
  while ((hi * hi - lo * lo) / (v * v) > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  ModeSolution m;
  m.v = v;
  m.u = 0.5 * (lo + hi);
  m.w = std::sqrt(v * v - m.u * m.u);
  return m;
}

double lp01_effective_area(double lambda_nm, const FiberSpec& spec, ModeCheck check) {
  const Lp01Profile f = profile_for(lambda_nm, spec, check);
  const double i2 = radial_integral([&](double r) { return std::pow(f(r), 2); });
  const double i4 = radial_integral([&](double r) { return std::pow(f(r), 4); });
  const double a = spec.core_radius_um;
  return 2.0 * kPi * a * a * i2 * i2 / i4;
}

double lp01_overlap_area(double lambda1_nm, double lambda2_nm, const FiberSpec& spec, ModeCheck check) {
  const Lp01Profile f1 = profile_for(lambda1_nm, spec, check);
  const Lp01Profile f2 = profile_for(lambda2_nm, spec, check);
  const double n1 = radial_integral([&](double r) { return std::pow(f1(r), 2); });
  const double n2 = radial_integral([&](double r) { return std::pow(f2(r), 2); });
  const double cross = radial_integral([&](double r) { return std::pow(f1(r) * f2(r), 2); });
  const double a = spec.core_radius_um;
  return 2.0 * kPi * a * a * n1 * n2 / cross;
}

double kerr_coefficient(double lambda_nm, const FiberSpec& spec, ModeCheck check) {
  const double area = lp01_effective_area(lambda_nm, spec, check) * units::um * units::um;
  return 2.0 * kPi * spec.n2 / (lambda_nm * units::nm * area) * units::km;
}

double raman_h(double t_s, double tau1_fs, double tau2_fs) {
  if (t_s < 0.0) return 0.0;
  const double t1 = tau1_fs * units::fs, t2 = tau2_fs * units::fs;
  return (t1 * t1 + t2 * t2) / (t1 * t2 * t2) * std::exp(-t_s / t2) * std::sin(t_s / t1);
}

std::complex<double> raman_h_spectrum(double omega, double tau1_fs, double tau2_fs) {
  const double t1 = tau1_fs * units::fs, t2 = tau2_fs * units::fs;
  const double amplitude = (t1 * t1 + t2 * t2) / (t1 * t2 * t2);
  const std::complex<double> damped(1.0 / t2, -omega);
  return amplitude * (1.0 / t1) / (damped * damped + 1.0 / (t1 * t1));
}

RamanKernel raman_kernel(double dt_fs, std::size_t n_samples, double raman_fraction, double tau1_fs,
                         double tau2_fs) {
  require_positive(dt_fs, "dt");
  require_positive(tau1_fs, "tau1");
  require_positive(tau2_fs, "tau2");
  if (n_samples < 2) throw DomainError("raman_kernel: need at least two samples");
  if (!(raman_fraction >= 0.0 && raman_fraction <= 1.0))
    throw DomainError("raman_fraction must lie in [0, 1]");

  RamanKernel k;
  k.raman_fraction = raman_fraction;
  k.instantaneous_weight = 1.0 - raman_fraction;
  k.dt_fs = dt_fs;
  k.tau1_fs = tau1_fs;
  k.tau2_fs = tau2_fs;
  if (dt_fs > 0.5 * tau1_fs) {
    std::ostringstream os;
    os << "time step " << dt_fs << " fs exceeds tau1/2 = " << 0.5 * tau1_fs
       << " fs; the sampled Raman kernel under-resolves its oscillation (the propagator uses the exact "
          "response spectrum)";
    k.warning = os.str();
  }

  const std::size_t n = n_samples;
  const double dt = dt_fs * units::fs;
  k.samples.assign(n, 0.0);
  for (std::size_t i = 0; i < n / 2; ++i) k.samples[i] = raman_h(static_cast<double>(i) * dt, tau1_fs, tau2_fs);

  k.response.resize(n);
  const double dw = 2.0 * kPi / (static_cast<double>(n) * dt);
  for (std::size_t j = 0; j < n; ++j) {
    const double idx = j < n / 2 ? static_cast<double>(j) : static_cast<double>(j) - static_cast<double>(n);
    k.response[j] = k.instantaneous_weight + raman_fraction * raman_h_spectrum(idx * dw, tau1_fs, tau2_fs);
  }
  return k;
}

}  // namespace fibersim
