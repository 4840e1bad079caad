#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include <Eigen/Core>

namespace pecmmv {

using cd = std::complex<double>;
using Point = Eigen::Vector2d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kMu0 = 1.25663706212e-6;
inline constexpr double kEps0 = 1.0 / (kMu0 * kSpeedOfLight * kSpeedOfLight);

/// Single-frequency free-space propagation constants.
struct Wavenumber {
    double frequency = 0.0; // Hz
    double omega = 0.0;     // rad/s
    double k = 0.0;         // rad/m

    static Wavenumber from_frequency(double frequency_hz) {
        if (!(frequency_hz > 0.0) || !std::isfinite(frequency_hz)) {
            throw std::invalid_argument("frequency must be positive and finite");
        }
        Wavenumber w;
        w.frequency = frequency_hz;
        w.omega = 2.0 * kPi * frequency_hz;
        w.k = w.omega * std::sqrt(kMu0 * kEps0);
        return w;
    }

    double wavelength() const { return 2.0 * kPi / k; }
};

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

} // namespace pecmmv
