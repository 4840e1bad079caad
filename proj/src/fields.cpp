#include "pecmmv/fields.hpp"

#include <sstream>
#include <stdexcept>

#include "pecmmv/bessel.hpp"

namespace pecmmv {

namespace {

double checked_distance(const Point& x_s, const Point& x_r, double r_min) {
    const double r = (x_r - x_s).norm();
    if (!(r > 0.0) || r < r_min) {
        std::ostringstream msg;
        msg << "source and observation points too close (R = " << r << " m, minimum " << r_min
            << " m)";
        throw std::invalid_argument(msg.str());
    }
    return r;
}

} // namespace

cd dipole_field_tm(const Point& x_s, const Point& x_r, const Wavenumber& w, double r_min) {
    const double r = checked_distance(x_s, x_r, r_min);
    return 0.25 * w.omega * kMu0 * hankel1_neg(0, w.k * r);
}

Eigen::Matrix2cd dipole_field_te(const Point& x_s, const Point& x_r, const Wavenumber& w,
                                 double r_min) {
    const double r = checked_distance(x_s, x_r, r_min);
    const Point d = x_r - x_s;
    const double x1 = d.x(), x2 = d.y();
    const double k = w.k;
    const cd h1 = hankel1_neg(1, k * r);
    const cd h2 = hankel1_neg(2, k * r);
    const double pre = k / (4.0 * w.omega * kEps0);
    const double r2 = r * r;

    Eigen::Matrix2cd e;
    e(0, 0) = -pre * (h1 / r + (k * x2 * x2 / r2) * h2);
    e(1, 1) = -pre * (h1 / r + (k * x1 * x1 / r2) * h2);
    e(0, 1) = pre * (k * x1 * x2 / r2) * h2;
    e(1, 0) = e(0, 1);
    return e;
}

Point orbit_tangent(const Point& p) {
    const double r = p.norm();
    if (!(r > 0.0)) throw std::invalid_argument("tangent undefined at the origin");
    return {-p.y() / r, p.x() / r};
}

SensingMatrix build_sensing_matrix(const ImagingGrid& grid, const TransceiverLayout& layout,
                                   const PolarizationMode& mode, const Wavenumber& w) {
    for (int q = 0; q < layout.num_rx(); ++q) {
        if (grid.contains(layout.rx[q])) {
            std::ostringstream msg;
            msg << "receiver " << q << " at (" << layout.rx[q].x() << ", " << layout.rx[q].y()
                << ") lies inside the imaging grid";
            throw std::invalid_argument(msg.str());
        }
    }
    const int n_pix = grid.size();
    const int n_rx = layout.num_rx();
    const double area = grid.dx * grid.dx;
    const double r_min = grid.dx / 10.0;

    SensingMatrix phi;
    phi.mode = mode;
    if (mode.pol == Polarization::TM) {
        phi.entries.resize(n_rx, n_pix);
        for (int n = 0; n < n_pix; ++n) {
            const Point c = grid.center(n);
            for (int q = 0; q < n_rx; ++q)
                phi.entries(q, n) = area * dipole_field_tm(c, layout.rx[q], w, r_min);
        }
        return phi;
    }

    const int rows = mode.channels_per_receiver();
    phi.entries.resize(rows * n_rx, 2 * n_pix);
    for (int n = 0; n < n_pix; ++n) {
        const Point c = grid.center(n);
        for (int q = 0; q < n_rx; ++q) {
            const Eigen::Matrix2cd block = area * dipole_field_te(c, layout.rx[q], w, r_min);
            if (rows == 2) {
                phi.entries.block<2, 2>(2 * q, 2 * n) = block;
            } else {
                const Eigen::Vector2cd t = orbit_tangent(layout.rx[q]).cast<cd>();
                phi.entries.block<1, 2>(q, 2 * n) = t.transpose() * block;
            }
        }
    }
    return phi;
}

} // namespace pecmmv
