#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "pecmmv/forward.hpp"
#include "pecmmv/geometry.hpp"
#include "pecmmv/solver.hpp"

namespace pecmmv {

enum class IndicatorKind { Mmv, Lsm, ImprovedLsm };

std::string to_string(IndicatorKind kind);
IndicatorKind indicator_kind_from_string(const std::string& text);

/// Per-pixel indicator over an imaging grid.
struct IndicatorMap {
    ImagingGrid grid;
    Eigen::VectorXd values;
    IndicatorKind kind = IndicatorKind::Mmv;
    bool in_db = false;
    double db_floor = -60.0; // meaningful when in_db
    bool zero_filled = false; // LSM: missing tx/rx pairs were zero-filled
    int saturated = 0;        // LSM: pixels where ||g||^2 vanished
};

/// sum_p |j_{p,n}|^2 (g = 1) or sum_p (|j_{p,2n}|^2 + |j_{p,2n+1}|^2) (g = 2).
IndicatorMap image_mmv(const Eigen::MatrixXcd& j, const GroupStructure& groups, const ImagingGrid& grid);

/// 10 log10(v / max v), clamped below at floor_db.
IndicatorMap db_scale(const IndicatorMap& map, double floor_db = -60.0);

/// Pearson correlation, negative values clipped to zero.
double corr_coeff(const Eigen::VectorXd& reference, const Eigen::VectorXd& image);
double corr_coeff(const IndicatorMap& reference, const IndicatorMap& image);

/// Pixels whose centre lies within dx of a target boundary.
std::vector<bool> boundary_cells(const ImagingGrid& grid, const Scene& scene);

/// Share of the total (linear) indicator within `halo` cells (Chebyshev
/// index distance) of a boundary cell.
double boundary_energy_fraction(const IndicatorMap& map, const Scene& scene, int halo);

/// 8-connected components of the pixels at or above threshold_db relative to
/// the maximum. labels[n] = -1 below threshold, otherwise the component id.
struct Components {
    std::vector<int> labels;
    int count = 0;
};
Components connected_components(const IndicatorMap& map, double threshold_db = -10.0);

/// Half the diagonal of the tightest box (cell edges included) around the
/// pixels at or above threshold_db.
double cover_radius(const IndicatorMap& map, double threshold_db = -6.0);

} // namespace pecmmv
