#include "doctest.h"

#include <random>

#include <Eigen/SVD>

#include "oracles.hpp"
#include "pecmmv/errors.hpp"
#include "pecmmv/fields.hpp"
#include "pecmmv/forward.hpp"
#include "pecmmv/lsm.hpp"

using namespace pecmmv;
using Mat = Eigen::MatrixXcd;

namespace {

const Wavenumber kW = Wavenumber::from_frequency(500e6);

MeasurementSet one_circle(const Circle& c) {
    return synth_dataset(Scene{PecTarget{c}}, build_circular_layout({}), PolarizationMode::tm(), kW, std::nullopt, 1)
        .data;
}

} // namespace

TEST_CASE("regularized norm equals the explicit Tikhonov solution") {
    std::mt19937_64 rng(1);
    const Mat y = oracle::random_complex(12, 8, rng);
    const Mat f = oracle::random_complex(12, 5, rng);
    const LsmOperator op(y);
    CHECK(op.a == doctest::Approx(0.01 * op.s(0)));
    for (int i = 1; i < op.s.size(); ++i) CHECK(op.s(i) <= op.s(i - 1));

    const Eigen::BDCSVD<Mat> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd s = svd.singularValues();
    const Eigen::VectorXd w = (s.array() / (s.array().square() + op.a * op.a)).matrix();
    const Mat g = svd.matrixV() * w.asDiagonal() * svd.matrixU().adjoint() * f;
    const Eigen::VectorXd direct = g.colwise().squaredNorm().transpose();
    CHECK((op.solution_norms(f) - direct).cwiseAbs().maxCoeff() < 1e-10 * direct.maxCoeff());
}

TEST_CASE("rank-one data reduces to the leading singular vector") {
    std::mt19937_64 rng(2);
    const Mat u = oracle::random_complex(10, 1, rng), v = oracle::random_complex(6, 1, rng);
    const LsmOperator op(u * v.adjoint());
    const Mat f = oracle::random_complex(10, 4, rng);
    const Eigen::VectorXd norms = op.solution_norms(f);
    const Eigen::VectorXd proj = (op.u.col(0).adjoint() * f).cwiseAbs2().transpose();
    const Eigen::ArrayXd ratio = norms.array() / proj.array();
    CHECK((ratio - ratio(0)).abs().maxCoeff() < 1e-8 * ratio(0));
}

TEST_CASE("LSM image is invariant to data scaling and receiver permutation") {
    const MeasurementSet d = one_circle(Circle{Point(0.1, 0.2), 0.25});
    const ImagingGrid g = build_grid(-0.6, 0.6, -0.6, 0.6, 0.1);
    const IndicatorMap base = lsm_indicator(d, g, kW);

    MeasurementSet scaled = d;
    scaled.y *= std::complex<double>(-3.0, 2.0);
    const IndicatorMap s = lsm_indicator(scaled, g, kW);
    CHECK((db_scale(s).values - db_scale(base).values).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(s.values(0) / base.values(0) == doctest::Approx(13.0));

    // reverse the receiver order together with the layout
    MeasurementSet perm = d;
    const int q = d.layout.num_rx();
    for (int i = 0; i < q; ++i) {
        perm.y.row(i) = d.y.row(q - 1 - i);
        perm.mask.row(i) = d.mask.row(q - 1 - i);
        perm.layout.rx[i] = d.layout.rx[q - 1 - i];
        perm.layout.rx_role[i] = d.layout.rx_role[q - 1 - i];
        perm.layout.active.row(i) = d.layout.active.row(q - 1 - i);
    }
    const IndicatorMap p = lsm_indicator(perm, g, kW);
    CHECK((p.values - base.values).cwiseAbs().maxCoeff() < 1e-9 * base.values.maxCoeff());
    CHECK(base.zero_filled);
}

TEST_CASE("LSM peak sits on the target of a single-circle phantom") {
    const Circle c{Point(0.2, -0.1), 0.3};
    const MeasurementSet d = one_circle(c);
    const ImagingGrid g = build_grid(-1, 1, -1, 1, 0.05);
    const IndicatorMap m = lsm_indicator(d, g, kW);
    Eigen::Index best = 0;
    m.values.maxCoeff(&best);
    const double dist = (g.center(static_cast<int>(best)) - c.center).norm();
    CHECK(dist <= c.radius + g.dx);
    CHECK((m.values.array() > 0).all());
    CHECK(m.values.allFinite());
}

TEST_CASE("TE LSM variants produce finite images") {
    const Scene scene{PecTarget{Circle{Point(0.0, 0.1), 0.2}}};
    const ImagingGrid g = build_grid(-0.5, 0.5, -0.5, 0.5, 0.1);
    for (auto mode : {PolarizationMode::te(), PolarizationMode::te(TeChannels::Tangential)}) {
        const MeasurementSet d = synth_dataset(scene, build_circular_layout({}), mode, kW, std::nullopt, 1).data;
        const IndicatorMap m = lsm_indicator(d, g, kW);
        CHECK(m.values.allFinite());
        CHECK((m.values.array() > 0).all());
    }
}

TEST_CASE("LSM rejects all-zero data") {
    MeasurementSet d = one_circle(Circle{Point(0, 0), 0.2});
    d.y.setZero();
    CHECK_THROWS_AS(lsm_indicator(d, build_grid(-0.5, 0.5, -0.5, 0.5, 0.25), kW), DataError);
}

TEST_CASE("improved LSM order") {
    // smallest ball around both circles of the two-circle scene: radius 0.45 + 0.2
    CHECK(improved_lsm_order(kW, 0.65) == 7);
    // I = 9 at 16 GHz corresponds to a covering radius between 25.3 and 28.3 mm
    const Wavenumber w16 = Wavenumber::from_frequency(16e9);
    CHECK(improved_lsm_order(w16, 0.0268) == 9);
    CHECK_THROWS_AS(improved_lsm_order(kW, 0.0), std::invalid_argument);
}

TEST_CASE("improved LSM: TM only, positive order, finite output") {
    const Circle c{Point(0.2, -0.1), 0.3};
    const MeasurementSet d = one_circle(c);
    const ImagingGrid g = build_grid(-0.6, 0.6, -0.6, 0.6, 0.1);
    const IndicatorMap m = improved_lsm_indicator(d, g, kW, 0.4);
    CHECK(m.kind == IndicatorKind::ImprovedLsm);
    CHECK(m.values.allFinite());
    CHECK((m.values.array() > 0).all());
    CHECK_THROWS_AS(improved_lsm_indicator(d, g, kW, 0.01), std::invalid_argument);

    const MeasurementSet te = synth_dataset(Scene{PecTarget{c}}, build_circular_layout({}), PolarizationMode::te(), kW,
                                            std::nullopt, 1).data;
    CHECK_THROWS_AS(improved_lsm_indicator(te, g, kW, 0.4), std::invalid_argument);
}
