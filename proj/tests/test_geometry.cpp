#include "doctest.h"

#include <algorithm>
#include <set>

#include "pecmmv/geometry.hpp"

using namespace pecmmv;

TEST_CASE("grid of the two-circle domain at 1 cm") {
    const ImagingGrid g = build_grid(-1.0, 1.0, -0.4, 1.6, 0.01);
    CHECK(g.nx == 200);
    CHECK(g.ny == 200);
    CHECK(g.size() == 40000);
}

TEST_CASE("grid cell centres and index map") {
    const ImagingGrid one = build_grid(0, 1, 0, 1, 1);
    CHECK(one.size() == 1);
    CHECK(one.center(0).x() == doctest::Approx(0.5));
    CHECK(one.center(0).y() == doctest::Approx(0.5));

    const ImagingGrid g = build_grid(0, 1, 0, 2, 0.5);
    CHECK(g.size() == 8);
    CHECK(g.center(0).x() == doctest::Approx(0.25));
    CHECK(g.center(0).y() == doctest::Approx(0.25));
    CHECK(g.index(g.row_of(5), g.col_of(5)) == 5);
    CHECK(g.center(g.index(3, 1)).y() == doctest::Approx(1.75));
}

TEST_CASE("grid rejects bad bounds and non-dividing spacing") {
    CHECK_THROWS_AS(build_grid(0, 1, 0, 1, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(build_grid(1, 0, 0, 1, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(build_grid(0, 1, 0, 1, 0.0), std::invalid_argument);
    CHECK_NOTHROW(build_grid(-1, 1, -0.4, 1.6, 2.0 / 67));
}

TEST_CASE("desk layout: 18 transmitters, 61 active receivers each") {
    const TransceiverLayout l = build_circular_layout({});
    CHECK(l.num_tx() == 18);
    CHECK(l.num_rx() == 72);
    for (int p = 0; p < l.num_tx(); ++p) {
        CHECK(l.active.col(p).count() == 61);
        const double a = std::atan2(l.tx[p].y(), l.tx[p].x());
        for (int q = 0; q < l.num_rx(); ++q) {
            const double b = std::atan2(l.rx[q].y(), l.rx[q].x());
            if (l.active(q, p)) CHECK(angular_distance(a, b) >= deg_to_rad(30.0) - 1e-12);
        }
    }
    // 20 degree transmitter spacing
    const double d = angular_distance(std::atan2(l.tx[1].y(), l.tx[1].x()), std::atan2(l.tx[0].y(), l.tx[0].x()));
    CHECK(rad_to_deg(d) == doctest::Approx(20.0));
}

TEST_CASE("single transmitter without dead zone sees every receiver") {
    CircularLayoutSpec s;
    s.num_tx = 1;
    s.dead_zone = 0;
    const TransceiverLayout l = build_circular_layout(s);
    CHECK(l.active.all());
}

TEST_CASE("layout validation rejects an empty receiver set") {
    CircularLayoutSpec s;
    s.num_tx = 1;
    s.rx_offset = deg_to_rad(2.5); // farthest receiver sits 177.5 degrees away
    s.dead_zone = deg_to_rad(179.0);
    CHECK_THROWS(build_circular_layout(s));
}

TEST_CASE("CV split of a 61-receiver ring into 6 arcs of 2") {
    CircularLayoutSpec s;
    s.num_tx = 1;
    s.dead_zone = 0;
    s.rx_step = 2 * kPi / 61;
    const TransceiverLayout ring = build_circular_layout(s);
    REQUIRE(ring.num_rx() == 61);
    const TransceiverLayout split = split_cv(ring, 0.2, 0.5);
    CHECK(split.num_cv() == 12);

    // contiguous pairs in angular order
    const auto cv = split.cv_indices();
    int runs = 0;
    for (int i = 0; i < 61; ++i) {
        const bool here = split.rx_role[i] == ReceiverRole::CrossValidation;
        const bool prev = split.rx_role[(i + 60) % 61] == ReceiverRole::CrossValidation;
        if (here && !prev) ++runs;
    }
    CHECK(runs == 6);

    // partition and determinism
    auto rec = split.reconstruction_indices();
    std::set<int> all(rec.begin(), rec.end());
    for (int q : cv) CHECK(all.insert(q).second);
    CHECK(all.size() == 61u);
    CHECK(split_cv(ring, 0.2, 0.5).cv_indices() == cv);
}

TEST_CASE("CV split keeps at least one arc and rejects over-long arcs") {
    const TransceiverLayout l = build_circular_layout({});
    CHECK(split_cv(l, 1e-6, 0.3).num_cv() >= 1);
    CHECK_THROWS_AS(split_cv(l, 0.2, 100.0), std::invalid_argument);
    CHECK_THROWS_AS(split_cv(l, 0.6, 0.5), std::invalid_argument);
}

TEST_CASE("151-receiver ring with 8 degree arcs holds 4 receivers per arc") {
    // 151 receivers over the full turn: spacing 2.38 degrees, an 8 degree arc spans 4 positions
    const double step = 2 * kPi / 151;
    const double arc = 3.0 * deg_to_rad(8.0);
    CHECK(receivers_per_arc(arc, 3.0, step) == 4);
}

TEST_CASE("polarization strings round-trip") {
    for (const auto& m : {PolarizationMode::tm(), PolarizationMode::te(), PolarizationMode::te(TeChannels::Tangential)})
        CHECK(polarization_from_string(to_string(m)) == m);
    CHECK(PolarizationMode::tm().group_size() == 1);
    CHECK(PolarizationMode::te().group_size() == 2);
    CHECK(PolarizationMode::te().channels_per_receiver() == 2);
    CHECK_THROWS(polarization_from_string("XY"));
}
