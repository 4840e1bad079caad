#include "pecmmv/lsm.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/SVD>

#include "pecmmv/bessel.hpp"
#include "pecmmv/errors.hpp"
#include "pecmmv/fields.hpp"

namespace pecmmv {

LsmOperator::LsmOperator(const Eigen::MatrixXcd& y) {
    if (y.size() == 0 || y.cwiseAbs().maxCoeff() == 0.0)
        throw DataError("LSM data matrix is all zero");
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(y, Eigen::ComputeThinU);
    s = svd.singularValues();
    u = svd.matrixU();
    a = 0.01 * s(0);
}

Eigen::VectorXd LsmOperator::solution_norms(const Eigen::MatrixXcd& f) const {
    const Eigen::ArrayXd weight = s.array() / (s.array().square() + a * a);
    const Eigen::MatrixXcd c = u.adjoint() * f;
    return (c.cwiseAbs2().array().colwise() * weight.square()).colwise().sum().transpose().matrix();
}

namespace {

Eigen::MatrixXcd masked_data(const MeasurementSet& data) {
    validate(data);
    return data.mask.select(data.y.array(), cd(0.0)).matrix();
}

IndicatorMap finish(const Eigen::VectorXd& norms, const ImagingGrid& grid, IndicatorKind kind,
                    const MeasurementSet& data) {
    IndicatorMap map;
    map.grid = grid;
    map.kind = kind;
    map.zero_filled = !data.mask.all();
    map.values.resize(norms.size());
    double top = 0.0;
    for (Eigen::Index n = 0; n < norms.size(); ++n) {
        if (norms(n) > 0 && std::isfinite(norms(n))) {
            map.values(n) = 1.0 / norms(n);
            top = std::max(top, map.values(n));
        } else {
            map.values(n) = -1.0;
            ++map.saturated;
        }
    }
    // Vanishing ||g||^2: saturate at the largest finite indicator.
    for (Eigen::Index n = 0; n < norms.size(); ++n)
        if (map.values(n) < 0) map.values(n) = top;
    return map;
}

} // namespace

IndicatorMap lsm_indicator(const MeasurementSet& data, const ImagingGrid& grid, const Wavenumber& w) {
    const Eigen::MatrixXcd y = masked_data(data);
    const auto& rx = data.layout.rx;
    const int q_count = data.layout.num_rx();
    const int n_pix = grid.size();

    if (data.mode.pol == Polarization::TM) {
        const LsmOperator op(y);
        Eigen::MatrixXcd f(q_count, n_pix);
        for (int n = 0; n < n_pix; ++n)
            for (int q = 0; q < q_count; ++q) f(q, n) = dipole_field_tm(grid.center(n), rx[q], w);
        return finish(op.solution_norms(f), grid, IndicatorKind::Lsm, data);
    }

    // Right-hand sides f[c][j]: field component c at the receivers of a dipole along x_j.
    const bool full = data.mode.te_channels == TeChannels::Full;
    const int systems = full ? 2 : 1;
    std::vector<std::vector<Eigen::MatrixXcd>> f(systems, std::vector<Eigen::MatrixXcd>(2, Eigen::MatrixXcd(q_count, n_pix)));
    for (int n = 0; n < n_pix; ++n) {
        for (int q = 0; q < q_count; ++q) {
            const Eigen::Matrix2cd e = dipole_field_te(grid.center(n), rx[q], w);
            if (full) {
                for (int c = 0; c < 2; ++c)
                    for (int j = 0; j < 2; ++j) f[c][j](q, n) = e(c, j);
            } else {
                const Eigen::RowVector2cd t = orbit_tangent(rx[q]).cast<cd>().transpose();
                for (int j = 0; j < 2; ++j) f[0][j](q, n) = t * e.col(j);
            }
        }
    }
    Eigen::VectorXd norms = Eigen::VectorXd::Zero(n_pix);
    for (int c = 0; c < systems; ++c) {
        Eigen::MatrixXcd yc(q_count, y.cols());
        for (int q = 0; q < q_count; ++q) yc.row(q) = y.row(systems * q + c);
        const LsmOperator op(yc);
        for (int j = 0; j < 2; ++j) norms += op.solution_norms(f[c][j]);
    }
    return finish(norms, grid, IndicatorKind::Lsm, data);
}

int improved_lsm_order(const Wavenumber& w, double radius_a) {
    if (!(radius_a > 0)) throw std::invalid_argument("cover radius must be positive");
    return static_cast<int>(std::lround(w.k * radius_a));
}

IndicatorMap improved_lsm_indicator(const MeasurementSet& data, const ImagingGrid& grid,
                                    const Wavenumber& w, double radius_a) {
    if (data.mode.pol != Polarization::TM) throw std::invalid_argument("improved LSM is defined for TM data only");
    const int order = improved_lsm_order(w, radius_a);
    if (order < 1) throw std::invalid_argument("k a rounds to zero; target too small for the improved indicator");
    const Eigen::MatrixXcd y = masked_data(data);
    const LsmOperator op(y);
    const auto& rx = data.layout.rx;
    const int q_count = data.layout.num_rx();
    const int n_pix = grid.size();
    const double amp = 0.25 * w.omega * kMu0;

    Eigen::MatrixXcd f0(q_count, n_pix);
    std::vector<Eigen::MatrixXcd> fx(order, Eigen::MatrixXcd(q_count, n_pix));
    std::vector<Eigen::MatrixXcd> fy(order, Eigen::MatrixXcd(q_count, n_pix));
    for (int n = 0; n < n_pix; ++n) {
        const Point xs = grid.center(n);
        const double phi_s = std::atan2(xs.y(), xs.x());
        for (int q = 0; q < q_count; ++q) {
            const double r = (rx[q] - xs).norm();
            const double phi_r = std::atan2(rx[q].y(), rx[q].x());
            const BesselTable t = bessel_jy(order, w.k * r);
            for (int i = 0; i <= order; ++i) {
                // H_i^(1)(-kR) = -(-1)^i (J_i - i Y_i)
                const double sign = (i % 2 == 0) ? -1.0 : 1.0;
                const cd h = amp * sign * cd(t.j[i], -t.y[i]);
                if (i == 0) {
                    f0(q, n) = h;
                } else {
                    fx[i - 1](q, n) = h * std::cos(i * (phi_r - phi_s));
                    fy[i - 1](q, n) = h * std::sin(i * (phi_r - phi_s));
                }
            }
        }
    }
    const Eigen::ArrayXd g0 = op.solution_norms(f0).array();
    Eigen::ArrayXd log_sum = Eigen::ArrayXd::Zero(n_pix);
    for (int i = 0; i < order; ++i) {
        log_sum += op.solution_norms(fx[i]).array().log() - g0.log();
        log_sum += op.solution_norms(fy[i]).array().log() - g0.log();
    }
    Eigen::VectorXd values = (log_sum / (2.0 * order)).exp().matrix();

    IndicatorMap map;
    map.grid = grid;
    map.kind = IndicatorKind::ImprovedLsm;
    map.zero_filled = !data.mask.all();
    double top = 0.0;
    for (Eigen::Index n = 0; n < values.size(); ++n)
        if (std::isfinite(values(n))) top = std::max(top, values(n));
    for (Eigen::Index n = 0; n < values.size(); ++n) {
        if (!std::isfinite(values(n)) || !(g0(n) > 0)) {
            values(n) = top;
            ++map.saturated;
        }
    }
    map.values = values;
    return map;
}

} // namespace pecmmv
