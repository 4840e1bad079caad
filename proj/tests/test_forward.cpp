#include "doctest.h"

#include "pecmmv/errors.hpp"
#include "pecmmv/forward.hpp"

using namespace pecmmv;

namespace {

const Wavenumber kW = Wavenumber::from_frequency(500e6);

TransceiverLayout ring(int num_tx = 1) {
    CircularLayoutSpec s;
    s.num_tx = num_tx;
    s.dead_zone = 0;
    return build_circular_layout(s);
}

// Point just outside circle c at polar angle a.
Point rim(const Circle& c, double a) { return c.center + c.radius * (1 + 1e-7) * Point(std::cos(a), std::sin(a)); }

} // namespace

TEST_CASE("TM circle series: total field vanishes on the boundary") {
    const Circle c{Point(0.2, -0.1), 0.3};
    const Point tx(3, 0.5);
    const int n = min_series_terms(c, kW);
    CHECK(n == static_cast<int>(std::ceil(kW.k * c.radius)) + 15);
    double worst = 0, peak = 0;
    for (int i = 0; i < 64; ++i) {
        const Point b = rim(c, 2 * kPi * i / 64);
        worst = std::max(worst, std::abs(scatter_circle_tm(c, tx, b, kW, n) + incident_tm(tx, b, kW)));
        peak = std::max(peak, std::abs(incident_tm(tx, b, kW)));
    }
    CHECK(worst < 1e-6 * peak);
}

TEST_CASE("TE circle series: tangential total field vanishes on the boundary") {
    const Circle c{Point(0.2, -0.1), 0.3};
    const Point tx(-1.0, 2.8);
    const int n = min_series_terms(c, kW);
    double worst = 0, peak = 0;
    for (int i = 0; i < 64; ++i) {
        const double a = 2 * kPi * i / 64;
        const Point b = rim(c, a);
        const Eigen::Vector2cd t(-std::sin(a), std::cos(a));
        const Eigen::Vector2cd total = scatter_circle_te(c, tx, b, kW, n) + incident_te(tx, b, kW);
        worst = std::max(worst, std::abs(t.dot(total)));
        peak = std::max(peak, incident_te(tx, b, kW).norm());
    }
    CHECK(worst < 1e-5 * peak);
}

TEST_CASE("circle series: reciprocity and truncation convergence") {
    const Circle c{Point(0.1, 0.3), 0.25};
    const Point tx(2.9, 0.4), rx(-1.5, -2.5);
    const int n = min_series_terms(c, kW);
    const cd a = scatter_circle_tm(c, tx, rx, kW, n);
    CHECK(std::abs(a - scatter_circle_tm(c, rx, tx, kW, n)) < 1e-10 * std::abs(a));
    CHECK(std::abs(a - scatter_circle_tm(c, tx, rx, kW, 2 * n)) < 1e-9 * std::abs(a));

    const Eigen::Vector2cd e = scatter_circle_te(c, tx, rx, kW, n);
    CHECK((e - scatter_circle_te(c, tx, rx, kW, 2 * n)).norm() < 1e-8 * e.norm());
}

TEST_CASE("TE symmetry: on-axis receiver of a symmetric scene") {
    // Circle on the x axis, source and receiver on the same axis. The
    // magnetic line source drives an azimuthal E field, so the surviving
    // component is the one normal to the axis; the along-axis one vanishes.
    const Circle c{Point(0.3, 0), 0.2};
    const Eigen::Vector2cd e = scatter_circle_te(c, Point(3, 0), Point(-3, 0), kW, min_series_terms(c, kW));
    CHECK(std::abs(e(0)) < 1e-12 * std::abs(e(1)));
    CHECK(std::abs(e(1)) > 0);
}

TEST_CASE("circle series rejects sources inside and short truncations") {
    const Circle c{Point(0, 0), 0.5};
    CHECK_THROWS(scatter_circle_tm(c, Point(0.1, 0), Point(3, 0), kW, 30));
    CHECK_THROWS(scatter_circle_tm(c, Point(3, 0), Point(-3, 0), kW, min_series_terms(c, kW) - 1));
}

TEST_CASE("multiple-scattering solver satisfies the boundary condition on each circle") {
    const std::vector<Circle> two{{Point(-0.45, 0.6), 0.2}, {Point(0.45, 0.6), 0.2}};
    const Point tx(0, -3);
    const CircleScatterer tm(two, Polarization::TM, kW);
    const CircleScatterer te(two, Polarization::TE, kW);
    for (const Circle& c : two) {
        double worst_tm = 0, worst_te = 0, peak_tm = 0, peak_te = 0;
        for (int i = 0; i < 64; ++i) {
            const double a = 2 * kPi * i / 64;
            const Point b = rim(c, a);
            worst_tm = std::max(worst_tm, std::abs(tm.scattered(tx, {b})(0) + incident_tm(tx, b, kW)));
            peak_tm = std::max(peak_tm, std::abs(incident_tm(tx, b, kW)));
            const Eigen::Vector2cd t(-std::sin(a), std::cos(a));
            const Eigen::VectorXcd s = te.scattered(tx, {b});
            worst_te = std::max(worst_te, std::abs(t.dot(Eigen::Vector2cd(s(0), s(1)) + incident_te(tx, b, kW))));
            peak_te = std::max(peak_te, incident_te(tx, b, kW).norm());
        }
        CHECK(worst_tm < 1e-6 * peak_tm);
        CHECK(worst_te < 1e-5 * peak_te);
    }
}

TEST_CASE("single-circle multiple-scattering solver reduces to the series") {
    const Circle c{Point(0.2, -0.1), 0.3};
    const TransceiverLayout l = ring();
    const CircleScatterer s({c}, Polarization::TM, kW);
    const Eigen::VectorXcd a = s.scattered(l.tx[0], l.rx);
    for (int q = 0; q < l.num_rx(); q += 7)
        CHECK(std::abs(a(q) - scatter_circle_tm(c, l.tx[0], l.rx[q], kW, s.terms())) < 1e-9 * a.norm());
}

TEST_CASE("well separated circles scatter almost independently") {
    // off the illumination axis so neither circle shadows the other
    const std::vector<Circle> two{{Point(0, -1.3), 0.2}, {Point(0, 1.3), 0.2}};
    REQUIRE(2.6 > 4 * kW.wavelength());
    const TransceiverLayout l = ring();
    const Eigen::VectorXcd joint = CircleScatterer(two, Polarization::TM, kW).scattered(l.tx[0], l.rx);
    const Eigen::VectorXcd sum = CircleScatterer({two[0]}, Polarization::TM, kW).scattered(l.tx[0], l.rx) +
                                 CircleScatterer({two[1]}, Polarization::TM, kW).scattered(l.tx[0], l.rx);
    CHECK((joint - sum).norm() <= 0.2 * joint.norm());
}

TEST_CASE("method of moments against the circle series over 61 receivers") {
    const Circle c{Point(0.2, -0.1), 0.3};
    const TransceiverLayout l = build_circular_layout({});
    const int p = 4;
    std::vector<Point> rx;
    for (int q = 0; q < l.num_rx(); ++q)
        if (l.active(q, p)) rx.push_back(l.rx[q]);
    REQUIRE(rx.size() == 61u);
    Eigen::VectorXcd series(61);
    for (int q = 0; q < 61; ++q) series(q) = scatter_circle_tm(c, l.tx[p], rx[q], kW, min_series_terms(c, kW));
    const Contour contour = circle_contour(c, 256);
    const Eigen::VectorXcd coarse = MomSolverTm({contour}, kW, 20).scattered(l.tx[p], rx);
    const Eigen::VectorXcd fine = MomSolverTm({contour}, kW, 40).scattered(l.tx[p], rx);
    CHECK((coarse - series).norm() < 0.02 * series.norm());
    CHECK((coarse - fine).norm() < 0.01 * fine.norm());
}

TEST_CASE("a vanishing contour follows the thin-wire limit") {
    // A TM PEC wire scatters only logarithmically less as it shrinks, so the
    // check is agreement with the series and monotone decay, not a fixed floor.
    const double dx = 2.0 / 67;
    const Point tx(0, -3), rx(0, 3);
    double previous = 1e300;
    for (double radius : {dx, dx / 10, dx / 100}) {
        const Circle c{Point(0, 0.5), radius};
        const cd mom = scatter_mom_tm(circle_contour(c, 64), tx, {rx}, kW, 16)(0);
        const cd series = scatter_circle_tm(c, tx, rx, kW, min_series_terms(c, kW));
        CHECK(std::abs(mom - series) < 0.02 * std::abs(series));
        CHECK(std::abs(mom) < previous);
        previous = std::abs(mom);
    }
    CHECK(previous < 0.1 * std::abs(incident_tm(tx, rx, kW)));
}

TEST_CASE("MoM rejects meshes coarser than 10 segments per wavelength") {
    const Contour big = circle_contour(Circle{Point(0, 0), 1.0}, 256);
    CHECK_THROWS(scatter_mom_tm(big, Point(0, -3), {Point(0, 3)}, kW, 40));
}

TEST_CASE("reference scenes") {
    const Scene s1 = reference_scene("sim1");
    REQUIRE(s1.size() == 2u);
    const auto& c0 = std::get<Circle>(s1[0].shape);
    const auto& c1 = std::get<Circle>(s1[1].shape);
    CHECK(c0.radius == doctest::Approx(0.2));
    CHECK(c1.radius == doctest::Approx(0.2));
    CHECK(c0.center.x() == doctest::Approx(-0.45));
    CHECK(c1.center.x() == doctest::Approx(0.45));
    CHECK(c0.center.y() == doctest::Approx(0.6));
    CHECK(c1.center.y() == doctest::Approx(0.6));
    const Scene s2 = reference_scene("sim2");
    REQUIRE(s2.size() == 1u);
    CHECK(std::holds_alternative<Contour>(s2[0].shape));
    CHECK_THROWS(reference_scene("nope"));
}

TEST_CASE("synthetic data: engine choice, exact SNR and reproducible noise") {
    const TransceiverLayout l = build_circular_layout({});
    const SynthResult clean = synth_dataset(reference_scene("sim1"), l, PolarizationMode::tm(), kW, std::nullopt, 1);
    CHECK(clean.engine == ForwardEngine::CircleSeries);
    CHECK(clean.data.noise_realization.norm() == 0.0);
    CHECK(!clean.data.noise.snr_db);
    CHECK(clean.data.y.rows() == l.num_rx());
    CHECK(clean.data.y.cols() == l.num_tx());
    // masked entries carry no data
    for (int p = 0; p < l.num_tx(); ++p)
        for (int q = 0; q < l.num_rx(); ++q)
            if (!l.active(q, p)) CHECK(clean.data.y(q, p) == cd(0.0));

    const SynthResult noisy = synth_dataset(reference_scene("sim1"), l, PolarizationMode::tm(), kW, 30.0, 11);
    REQUIRE(l.active.count() >= 1000);
    const double snr = 20 * std::log10(noisy.data.y.norm() / noisy.data.noise_realization.norm());
    CHECK(std::abs(snr - 30.0) < 0.2);
    CHECK(noisy.data.noise.seed == 11u);
    const SynthResult again = synth_dataset(reference_scene("sim1"), l, PolarizationMode::tm(), kW, 30.0, 11);
    CHECK(again.data.y == noisy.data.y);
    const SynthResult other = synth_dataset(reference_scene("sim1"), l, PolarizationMode::tm(), kW, 30.0, 12);
    CHECK(other.data.y != noisy.data.y);

    const SynthResult te = synth_dataset(reference_scene("sim1"), l, PolarizationMode::te(), kW, std::nullopt, 1);
    CHECK(te.data.y.rows() == 2 * l.num_rx());
}

TEST_CASE("non-circular targets go through the moment method") {
    CircularLayoutSpec spec;
    spec.num_tx = 4;
    const TransceiverLayout l = build_circular_layout(spec);
    const SynthResult r = synth_dataset(reference_scene("sim2"), l, PolarizationMode::tm(), kW, std::nullopt, 1);
    CHECK(r.engine == ForwardEngine::MomTm);
    CHECK(r.data.y.allFinite());
    CHECK(r.data.y.norm() > 0);
    CHECK_THROWS(synth_dataset(reference_scene("sim2"), l, PolarizationMode::te(), kW, std::nullopt, 1));
}
