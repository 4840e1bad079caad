#pragma once

#include <Eigen/Core>

#include "pecmmv/constants.hpp"
#include "pecmmv/geometry.hpp"

namespace pecmmv {

/// Field at x_r of a z-directed electric line dipole at x_s, exp(i omega t)
/// convention: E33 = (1/4) omega mu0 H0^(1)(-kR).
///
/// Throws std::invalid_argument when R < r_min.
cd dipole_field_tm(const Point& x_s, const Point& x_r, const Wavenumber& w, double r_min = 0.0);

/// In-plane field matrix [[E11, E12], [E21, E22]] at x_r of electric dipoles
/// at x_s polarized along x1 (column 0) and x2 (column 1).
Eigen::Matrix2cd dipole_field_te(const Point& x_s, const Point& x_r, const Wavenumber& w,
                                 double r_min = 0.0);

/// Dense operator from pixel contrast sources to receiver channels.
///
/// TM: Q x N. TE: 2Q x 2N, with rows (2q, 2q+1) holding the x1/x2 field
/// components at receiver q and columns (2n, 2n+1) the x1/x2 source
/// components of pixel n. TE-tangential: Q x 2N, rows projected on the unit
/// tangent of the receiver orbit.
struct SensingMatrix {
    Eigen::MatrixXcd entries;
    PolarizationMode mode;

    int group_size() const { return mode.group_size(); }
    int rows_per_receiver() const { return mode.channels_per_receiver(); }
};

/// Unit vector tangential (counter-clockwise) to the circle through p
/// centred at the origin.
Point orbit_tangent(const Point& p);

/// Assemble Phi with midpoint quadrature (cell area dx^2) over the grid.
/// Every receiver must lie strictly outside the grid bounding box.
SensingMatrix build_sensing_matrix(const ImagingGrid& grid, const TransceiverLayout& layout,
                                   const PolarizationMode& mode, const Wavenumber& w);

} // namespace pecmmv
