#pragma once

#include <numbers>

namespace fibersim {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

// Engineering-unit conversions into SI.
namespace units {
inline constexpr double ps = 1e-12;
inline constexpr double fs = 1e-15;
inline constexpr double nm = 1e-9;
inline constexpr double um = 1e-6;
inline constexpr double km = 1e3;
inline constexpr double nJ = 1e-9;
inline constexpr double THz = 1e12;
}  // namespace units

inline double wavelength_to_angular(double lambda_m) {
  return 2.0 * kPi * kSpeedOfLight / lambda_m;
}

inline double angular_to_wavelength(double omega) {
  return 2.0 * kPi * kSpeedOfLight / omega;
}

}  // namespace fibersim
