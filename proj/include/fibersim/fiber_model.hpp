#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fibersim/fft.hpp"

namespace fibersim {

/// Raised for arguments outside an operation's physical domain.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when the fiber supports more than LP01 at the requested wavelength.
class MultimodeError : public std::runtime_error {
 public:
  MultimodeError(double v_number, double lambda_nm);
  double v_number() const { return v_; }

 private:
  double v_;
};

/// Material and waveguide parameters of a step-index single-mode fiber.
/// Defaults describe SMF-28. Units are the engineering units in the field
/// names; everything is converted to SI internally.
struct FiberSpec {
  double core_radius_um = 4.1;
  double cladding_index = 1.444;
  double index_step = 0.0036;     // fractional Delta, NA = n_clad * sqrt(2 Delta)
  double n2 = 2.2e-20;            // m^2/W
  double loss_A_dB_km = 5e11;     // infrared absorption prefactor
  double loss_B_um = 49.0;        // infrared absorption scale
  double loss_C_dB_um4_km = 0.8;  // Rayleigh coefficient
  double disp_S0 = 0.08;          // ps/(nm^2 km)
  double disp_lambda0_nm = 1313.0;
  double raman_fraction = 0.18;
  double tau1_fs = 12.2;
  double tau2_fs = 32.0;
  double length_m = 100.0;
  double reference_wavelength_nm = 1550.0;

  /// Throws DomainError on non-physical values and MultimodeError if the
  /// fiber is not single-mode at the reference wavelength.
  void validate() const;
};

// ---- loss -----------------------------------------------------------------

/// Attenuation a_A exp(-a_B/lambda) + a_C/lambda^4 in dB/km.
double loss_dB_per_km(double lambda_um, const FiberSpec& spec = {});

/// dB/km to the power attenuation coefficient in 1/m. The field decays with
/// half of this value.
double dB_per_km_to_per_m(double dB_per_km);

// ---- dispersion -----------------------------------------------------------

/// D(lambda) = S0 (lambda - lambda0^4 / lambda^3) / 4 in ps/(nm km).
double dispersion_D(double lambda_nm, const FiberSpec& spec = {});

/// Inverse group velocity relative to the reference wavelength,
/// beta1(lambda) - beta1(lambda_ref), in s/m. Closed-form integral of D.
double group_delay_difference(double lambda_nm, double lambda_ref_nm, const FiberSpec& spec = {});

struct DispersionCoeffs {
  double lambda_ref_nm = 0.0;
  int max_order = 2;
  double beta2 = 0.0;  // ps^2/km
  double beta3 = 0.0;  // ps^3/km
  double beta4 = 0.0;  // ps^4/km

  /// beta_k in s^k/m; zero for orders beyond max_order.
  double si(int order) const;
};

/// Taylor coefficients of beta(omega) at lambda_ref from analytic derivatives
/// of D(lambda). max_order in [2, 4].
DispersionCoeffs taylor_betas(double lambda_ref_nm, int max_order, const FiberSpec& spec = {});

// ---- LP01 mode ------------------------------------------------------------

double v_number(double lambda_nm, const FiberSpec& spec = {});

enum class ModeCheck {
  single_mode,  // reject V >= 2.405
  lp01_only,    // LP01 is computed regardless of higher-order modes
};

struct ModeSolution {
  double v = 0.0;
  double u = 0.0;  // core transverse parameter
  double w = 0.0;  // cladding decay parameter
  double b() const { return (w * w) / (v * v); }
};

/// Scalar LP01 eigenvalue u J1(u)/J0(u) = w K1(w)/K0(w), u^2 + w^2 = V^2,
/// solved by bisection.
ModeSolution solve_lp01(double lambda_nm, const FiberSpec& spec = {},
                        ModeCheck check = ModeCheck::single_mode);

/// (int |F|^2 dA)^2 / int |F|^4 dA in um^2.
double lp01_effective_area(double lambda_nm, const FiberSpec& spec = {},
                           ModeCheck check = ModeCheck::single_mode);

/// Cross-mode area int|F1|^2 dA int|F2|^2 dA / int |F1|^2 |F2|^2 dA in um^2,
/// the area that sets cross-phase modulation between two wavelengths.
double lp01_overlap_area(double lambda1_nm, double lambda2_nm, const FiberSpec& spec = {},
                         ModeCheck check = ModeCheck::single_mode);

/// gamma = 2 pi n2 / (lambda A_eff) in 1/(W km).
double kerr_coefficient(double lambda_nm, const FiberSpec& spec = {},
                        ModeCheck check = ModeCheck::single_mode);

// ---- Raman response -------------------------------------------------------

/// h_R(t) = (tau1^2 + tau2^2)/(tau1 tau2^2) exp(-t/tau2) sin(t/tau1) for t >= 0,
/// in 1/s. Zero for t < 0.
double raman_h(double t_s, double tau1_fs, double tau2_fs);

/// Closed-form transform  int h_R(t) exp(+i w t) dt  (equals 1 at w = 0).
std::complex<double> raman_h_spectrum(double omega, double tau1_fs, double tau2_fs);

/// Nonlinear response R(t) = (1 - f_R) delta(t) + f_R h_R(t) on an FFT grid.
/// The instantaneous part is kept as a scalar weight. `response` holds R(w) in
/// FFT order for convolution; it is the exact transform of the continuous
/// kernel rather than an FFT of the samples.
struct RamanKernel {
  double raman_fraction = 0.0;
  double instantaneous_weight = 1.0;
  double dt_fs = 0.0;
  double tau1_fs = 12.2;
  double tau2_fs = 32.0;
  std::vector<double> samples;  // h_R at lag k*dt, FFT lag order, 1/s
  CVector response;             // (1 - f_R) + f_R h_R(w), FFT order
  std::optional<std::string> warning;

  std::size_t size() const { return samples.size(); }
  bool is_instantaneous() const { return raman_fraction == 0.0; }
};

RamanKernel raman_kernel(double dt_fs, std::size_t n_samples, double raman_fraction,
                         double tau1_fs = 12.2, double tau2_fs = 32.0);

}  // namespace fibersim
