#include "pecmmv/reconstruct.hpp"

#include <limits>

#include "pecmmv/constants.hpp"
#include "pecmmv/errors.hpp"
#include "pecmmv/fields.hpp"

namespace pecmmv {

MmvResult invert_mmv(const MeasurementSet& data, const ImagingGrid& grid, const SolverConfig& config) {
    validate(data);
    const Wavenumber w = Wavenumber::from_frequency(data.frequency);
    const SensingMatrix phi = build_sensing_matrix(grid, data.layout, data.mode, w);

    MmvResult out;
    out.groups = GroupStructure{phi.group_size(), grid.size()};
    if (config.sigma) {
        const MaskedOperator<cd> op(phi.entries, data.mask);
        const Eigen::MatrixXcd y = op.restrict(data.y);
        NewtonResult<cd> res = newton_root_bpsigma(op, y, *config.sigma, out.groups, config);
        out.j = std::move(res.j);
        out.r_rec = res.r.norm();
        out.r_cv = std::numeric_limits<double>::quiet_NaN();
        out.trace = std::move(res.trace);
        out.steps = std::move(res.steps);
    } else {
        const std::vector<int> cv_rows = receiver_rows(data.layout.cv_indices(), data.rows_per_receiver());
        if (cv_rows.empty())
            throw UsageError("no cross-validation receivers in the layout; split the data or give sigma");
        CvResult<cd> res = cv_spgl1<cd>(phi.entries, data.y, data.mask, cv_rows, out.groups, config);
        out.j = std::move(res.j);
        out.cross_validated = true;
        out.patience_triggered = res.patience_triggered;
        out.r_rec = res.r_rec_opt;
        out.r_cv = res.r_cv_opt;
        out.trace = std::move(res.trace);
        out.steps = std::move(res.steps);
    }
    out.image = image_mmv(out.j, out.groups, grid);
    return out;
}

} // namespace pecmmv
