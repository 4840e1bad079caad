#pragma once

#include <Eigen/Core>

#include "pecmmv/constants.hpp"
#include "pecmmv/geometry.hpp"
#include "pecmmv/imaging.hpp"
#include "pecmmv/measurement.hpp"

namespace pecmmv {

/// Thin SVD of a data matrix with the Tikhonov parameter a = 0.01 s_max.
struct LsmOperator {
    Eigen::VectorXd s;  // singular values, descending
    Eigen::MatrixXcd u; // left singular vectors (columns)
    double a = 0.0;

    explicit LsmOperator(const Eigen::MatrixXcd& y);

    /// ||g||^2 = sum_d (s_d / (s_d^2 + a^2))^2 |u_d^H f|^2 for every column of f.
    Eigen::VectorXd solution_norms(const Eigen::MatrixXcd& f) const;
};

/// gamma = 1 / ||g||^2 at every grid cell centre.
///
/// TM: one system Y g = f with f_q = E33(x_s, x_q).
/// TE (two components): the x1 and x2 rows of Y form separate operators,
/// each solved for both dipole polarizations; the four norms are summed.
/// TE (tangential component): one operator, right-hand sides t_q . E(:, j).
/// Masked samples are zero-filled.
IndicatorMap lsm_indicator(const MeasurementSet& data, const ImagingGrid& grid, const Wavenumber& w);

/// Multipole order used by the improved indicator: round(k a).
int improved_lsm_order(const Wavenumber& w, double radius_a);

/// Improved LSM (TM): product over i = 1..I of the ratios
/// ||g^x_i||^2 / ||g||^2 and ||g^y_i||^2 / ||g||^2, to the power 1/(2I).
/// The test functions are (1/4) omega mu0 H_i^(1)(-kR) times cos or sin of
/// i (phi_r - phi_s), with phi_r, phi_s the polar angles of the receiver and
/// the sampling point.
IndicatorMap improved_lsm_indicator(const MeasurementSet& data, const ImagingGrid& grid,
                                    const Wavenumber& w, double radius_a);

} // namespace pecmmv
