#include "pecmmv/bessel.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace pecmmv {

namespace {

constexpr long double kEulerGamma = 0.57721566490153286060651209008240243L;
constexpr long double kPiL = 3.14159265358979323846264338327950288L;
constexpr double kSeriesLimit = 14.0;

void check_argument(int n, double x) {
    if (n < 0) throw std::invalid_argument("Bessel order must be non-negative");
    if (!(x > 0.0) || !std::isfinite(x)) {
        std::ostringstream msg;
        msg << "Bessel argument must be positive and finite, got " << x;
        throw std::invalid_argument(msg.str());
    }
}

struct Base {
    double j0, j1, y0, y1;
};

Base ascending_series(double xd) {
    const long double x = xd;
    const long double q = x * x / 4.0L;
    const long double log_term = std::log(x / 2.0L) + kEulerGamma;

    // t_k = (-q)^k / (k!)^2 for J0 and t_k / (k+1) for J1 / (x/2).
    long double j0 = 0.0L, j1_half = 0.0L, s0 = 0.0L, s1 = 0.0L;
    long double t = 1.0L;
    long double h_k = 0.0L;  // harmonic number H_k
    for (int k = 0; k < 200; ++k) {
        if (k > 0) {
            t *= -q / (static_cast<long double>(k) * k);
            h_k += 1.0L / k;
        }
        const long double h_k1 = h_k + 1.0L / (k + 1);
        const long double t1 = t / (k + 1);
        j0 += t;
        j1_half += t1;
        s0 += -t * h_k;            // sum_{k>=1} (-1)^{k+1} H_k q^k/(k!)^2
        s1 += t1 * (h_k + h_k1);   // sum (-1)^k (H_k + H_{k+1}) q^k/(k!(k+1)!)
        if (k > q && std::abs(t) < 1e-22L * std::abs(j0) + 1e-300L) break;
    }
    const long double j1 = (x / 2.0L) * j1_half;
    const long double y0 = (2.0L / kPiL) * (log_term * j0 + s0);
    // Y1 = (2/pi)(ln(x/2)+gamma) J1 - 2/(pi x) - (x/(2 pi)) sum(...)
    const long double y1 = (2.0L / kPiL) * log_term * j1 - 2.0L / (kPiL * x) -
                           (x / (2.0L * kPiL)) * s1;
    return {static_cast<double>(j0), static_cast<double>(j1), static_cast<double>(y0),
            static_cast<double>(y1)};
}

// Hankel asymptotic expansion for order nu in {0, 1}.
void asymptotic(int nu, double x, double& j, double& y) {
    const double mu = 4.0 * nu * nu;
    double p = 0.0, q = 0.0;
    double term = 1.0;  // a_k(nu) / x^k
    double last = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 60; ++k) {
        if (k > 0) {
            const double odd = 2.0 * k - 1.0;
            term *= (mu - odd * odd) / (k * 8.0 * x);
        }
        if (std::abs(term) > last) break;  // divergent tail
        last = std::abs(term);
        // i^k a_k / x^k contributes to P (even k) or Q (odd k).
        switch (k % 4) {
        case 0: p += term; break;
        case 1: q += term; break;
        case 2: p -= term; break;
        case 3: q -= term; break;
        }
        if (last < 1e-18 * std::abs(p)) break;
    }
    const double chi = x - (nu * 0.5 + 0.25) * kPi;
    const double amp = std::sqrt(2.0 / (kPi * x));
    const double c = std::cos(chi), s = std::sin(chi);
    j = amp * (p * c - q * s);
    y = amp * (p * s + q * c);
}

Base base_functions(double x) {
    if (x <= kSeriesLimit) return ascending_series(x);
    Base b{};
    asymptotic(0, x, b.j0, b.y0);
    asymptotic(1, x, b.j1, b.y1);
    return b;
}

} // namespace

BesselTable bessel_jy(int n_max, double x) {
    check_argument(n_max, x);
    BesselTable t;
    t.j.assign(n_max + 1, 0.0);
    t.y.assign(n_max + 1, 0.0);
    const Base b = base_functions(x);
    t.j[0] = b.j0;
    t.y[0] = b.y0;
    if (n_max >= 1) {
        t.j[1] = b.j1;
        t.y[1] = b.y1;
    }
    for (int n = 1; n < n_max; ++n) t.y[n + 1] = (2.0 * n / x) * t.y[n] - t.y[n - 1];

    // Upward recurrence for J is stable while n < x.
    const int n_up = std::min(n_max, static_cast<int>(std::floor(x)));
    for (int n = 1; n < n_up; ++n) t.j[n + 1] = (2.0 * n / x) * t.j[n] - t.j[n - 1];
    if (n_up >= n_max) return t;

    // Miller: recur downward from well above max(n_max, x), normalize with
    // J0 + 2 sum J_{2k} = 1.
    const int top = std::max(n_max, static_cast<int>(x));
    int start = top + 20 + static_cast<int>(std::sqrt(40.0 * top));
    start += start % 2;
    std::vector<double> down(start + 2, 0.0);
    double upper = 0.0, cur = 1e-300, norm = 0.0;
    down[start] = cur;
    for (int n = start; n > 0; --n) {
        const double lower = (2.0 * n / x) * cur - upper;
        upper = cur;
        cur = lower;
        down[n - 1] = cur;
        if (std::abs(cur) > 1e200) {
            for (int m = n - 1; m <= start; ++m) down[m] *= 1e-200;
            norm *= 1e-200;
            upper *= 1e-200;
            cur *= 1e-200;
        }
        if ((n - 1) % 2 == 0 && n - 1 > 0) norm += 2.0 * down[n - 1];
    }
    norm += down[0];
    for (int n = n_up + 1; n <= n_max; ++n) t.j[n] = down[n] / norm;
    return t;
}

double bessel_j(int n, double x) { return bessel_jy(n, x).j[n]; }
double bessel_y(int n, double x) { return bessel_jy(n, x).y[n]; }

cd hankel1(int n, double x) {
    const BesselTable t = bessel_jy(n, x);
    return {t.j[n], t.y[n]};
}

cd hankel2(int n, double x) {
    const BesselTable t = bessel_jy(n, x);
    return {t.j[n], -t.y[n]};
}

cd hankel1_neg(int n, double x) {
    const double sign = (n % 2 == 0) ? -1.0 : 1.0;
    return sign * hankel2(n, x);
}

} // namespace pecmmv
