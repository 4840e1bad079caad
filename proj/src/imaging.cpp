#include "pecmmv/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pecmmv {

namespace {

Eigen::VectorXd linear_values(const IndicatorMap& map) {
    if (!map.in_db) return map.values;
    return (map.values.array() * (std::log(10.0) / 10.0)).exp().matrix();
}

} // namespace

std::string to_string(IndicatorKind kind) {
    switch (kind) {
    case IndicatorKind::Mmv: return "MMV";
    case IndicatorKind::Lsm: return "LSM";
    case IndicatorKind::ImprovedLsm: return "ILSM";
    }
    return "MMV";
}

IndicatorKind indicator_kind_from_string(const std::string& text) {
    if (text == "MMV") return IndicatorKind::Mmv;
    if (text == "LSM") return IndicatorKind::Lsm;
    if (text == "ILSM") return IndicatorKind::ImprovedLsm;
    throw std::invalid_argument("unknown indicator kind '" + text + "'");
}

IndicatorMap image_mmv(const Eigen::MatrixXcd& j, const GroupStructure& groups, const ImagingGrid& grid) {
    groups.check(j.rows());
    if (groups.groups != grid.size()) throw std::invalid_argument("group count does not match the grid");
    IndicatorMap map;
    map.grid = grid;
    map.kind = IndicatorKind::Mmv;
    map.values = group_norms(j, groups).array().square().matrix();
    return map;
}

IndicatorMap db_scale(const IndicatorMap& map, double floor_db) {
    if (map.in_db) return map;
    if (!(floor_db < 0)) throw std::invalid_argument("dB floor must be negative");
    const double peak = map.values.size() ? map.values.maxCoeff() : 0.0;
    if (!(peak > 0)) throw std::invalid_argument("indicator map has no positive value");
    IndicatorMap out = map;
    out.in_db = true;
    out.db_floor = floor_db;
    for (Eigen::Index n = 0; n < out.values.size(); ++n) {
        const double v = map.values(n);
        out.values(n) = v > 0 ? std::max(floor_db, 10.0 * std::log10(v / peak)) : floor_db;
    }
    return out;
}

double corr_coeff(const Eigen::VectorXd& reference, const Eigen::VectorXd& image) {
    if (reference.size() != image.size() || reference.size() < 2)
        throw std::invalid_argument("images must have the same size (at least two pixels)");
    const Eigen::ArrayXd a = reference.array() - reference.mean();
    const Eigen::ArrayXd b = image.array() - image.mean();
    const double den = std::sqrt(a.square().sum() * b.square().sum());
    if (!(den > 0)) throw std::invalid_argument("correlation of a constant image is undefined");
    return std::clamp((a * b).sum() / den, 0.0, 1.0);
}

double corr_coeff(const IndicatorMap& reference, const IndicatorMap& image) {
    if (reference.grid.nx != image.grid.nx || reference.grid.ny != image.grid.ny)
        throw std::invalid_argument("images are on different grids");
    return corr_coeff(linear_values(reference), linear_values(image));
}

std::vector<bool> boundary_cells(const ImagingGrid& grid, const Scene& scene) {
    std::vector<bool> out(static_cast<std::size_t>(grid.size()), false);
    for (int n = 0; n < grid.size(); ++n) {
        const Point c = grid.center(n);
        for (const PecTarget& t : scene) {
            if (t.boundary_distance(c) <= grid.dx) {
                out[static_cast<std::size_t>(n)] = true;
                break;
            }
        }
    }
    return out;
}

double boundary_energy_fraction(const IndicatorMap& map, const Scene& scene, int halo) {
    if (halo < 0) throw std::invalid_argument("halo must be non-negative");
    const ImagingGrid& grid = map.grid;
    const Eigen::VectorXd v = linear_values(map);
    const double total = v.sum();
    if (!(total > 0)) throw std::invalid_argument("indicator map has no energy");
    const std::vector<bool> boundary = boundary_cells(grid, scene);
    std::vector<bool> near(boundary.size(), false);
    for (int n = 0; n < grid.size(); ++n) {
        if (!boundary[static_cast<std::size_t>(n)]) continue;
        const int r0 = grid.row_of(n), c0 = grid.col_of(n);
        for (int r = std::max(0, r0 - halo); r <= std::min(grid.ny - 1, r0 + halo); ++r)
            for (int c = std::max(0, c0 - halo); c <= std::min(grid.nx - 1, c0 + halo); ++c)
                near[static_cast<std::size_t>(grid.index(r, c))] = true;
    }
    double inside = 0.0;
    for (int n = 0; n < grid.size(); ++n)
        if (near[static_cast<std::size_t>(n)]) inside += v(n);
    return inside / total;
}

Components connected_components(const IndicatorMap& map, double threshold_db) {
    const IndicatorMap db = db_scale(map, std::min(-60.0, threshold_db - 1.0));
    const ImagingGrid& grid = map.grid;
    Components out;
    out.labels.assign(static_cast<std::size_t>(grid.size()), -1);
    std::vector<int> stack;
    for (int seed = 0; seed < grid.size(); ++seed) {
        if (db.values(seed) < threshold_db || out.labels[static_cast<std::size_t>(seed)] >= 0) continue;
        const int id = out.count++;
        stack.push_back(seed);
        out.labels[static_cast<std::size_t>(seed)] = id;
        while (!stack.empty()) {
            const int n = stack.back();
            stack.pop_back();
            const int r0 = grid.row_of(n), c0 = grid.col_of(n);
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    const int r = r0 + dr, c = c0 + dc;
                    if (r < 0 || c < 0 || r >= grid.ny || c >= grid.nx) continue;
                    const int m = grid.index(r, c);
                    if (db.values(m) < threshold_db || out.labels[static_cast<std::size_t>(m)] >= 0) continue;
                    out.labels[static_cast<std::size_t>(m)] = id;
                    stack.push_back(m);
                }
            }
        }
    }
    return out;
}

double cover_radius(const IndicatorMap& map, double threshold_db) {
    const IndicatorMap db = db_scale(map, std::min(-60.0, threshold_db - 1.0));
    const ImagingGrid& grid = map.grid;
    double x0 = grid.x_max, x1 = grid.x_min, y0 = grid.y_max, y1 = grid.y_min;
    for (int n = 0; n < grid.size(); ++n) {
        if (db.values(n) < threshold_db) continue;
        const Point c = grid.center(n);
        x0 = std::min(x0, c.x() - grid.dx / 2);
        x1 = std::max(x1, c.x() + grid.dx / 2);
        y0 = std::min(y0, c.y() - grid.dx / 2);
        y1 = std::max(y1, c.y() + grid.dx / 2);
    }
    return 0.5 * std::hypot(x1 - x0, y1 - y0);
}

} // namespace pecmmv
