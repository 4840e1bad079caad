#pragma once

#include <Eigen/Core>

#include "pecmmv/geometry.hpp"
#include "pecmmv/imaging.hpp"
#include "pecmmv/measurement.hpp"
#include "pecmmv/solver.hpp"

namespace pecmmv {

struct MmvResult {
    Eigen::MatrixXcd j;
    IndicatorMap image;
    SolveTrace trace;
    std::vector<NewtonStep> steps;
    GroupStructure groups;
    bool cross_validated = false;
    bool patience_triggered = false;
    double r_rec = 0.0;
    double r_cv = 0.0; // NaN without cross-validation
};

/// Build Phi for the data's layout and polarization, then solve either with
/// a known noise level (config.sigma) or with the CV stopping rule on the
/// layout's CV receivers.
MmvResult invert_mmv(const MeasurementSet& data, const ImagingGrid& grid, const SolverConfig& config);

} // namespace pecmmv
