#pragma once

#include <vector>

#include "pecmmv/constants.hpp"

namespace pecmmv {

/// Integer-order Bessel functions of the first and second kind for x > 0.
///
/// J0, J1, Y0, Y1 come from the ascending series (x <= 14, long double
/// accumulation) or the Hankel asymptotic expansion (x > 14). Higher orders
/// use upward recurrence for Y, upward recurrence for J below the turning
/// point n < x, and Miller's normalized downward recurrence above it.
/// Relative accuracy of H_n = J_n + iY_n is ~1e-12 for n <= 12 and
/// x in [1e-3, 1e3].
struct BesselTable {
    std::vector<double> j;
    std::vector<double> y;
};

/// Orders 0..n_max at argument x > 0.
BesselTable bessel_jy(int n_max, double x);

double bessel_j(int n, double x);
double bessel_y(int n, double x);

/// H_n^(1)(x) = J_n(x) + i Y_n(x), x > 0.
cd hankel1(int n, double x);

/// H_n^(2)(x) = J_n(x) - i Y_n(x), x > 0.
cd hankel2(int n, double x);

/// H_n^(1) continued to the negative real axis: H_n^(1)(x e^{i pi}) for x > 0,
/// i.e. -(-1)^n H_n^(2)(x).
cd hankel1_neg(int n, double x);

} // namespace pecmmv
