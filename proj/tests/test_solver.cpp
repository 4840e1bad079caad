#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <random>

#include <Eigen/QR>

#include "oracles.hpp"
#include "pecmmv/solver.hpp"

using namespace pecmmv;
using oracle::random_complex;
using Mat = Eigen::MatrixXcd;
using cd = std::complex<double>;

namespace {

struct Planted {
    Mat phi, j, y;
    GroupStructure groups;
};

// Column-normalized Gaussian Phi and a K-group-sparse J.
Planted planted(int q, int n, int p, int g, int k, std::mt19937_64& rng) {
    Planted s;
    s.groups = {g, n};
    s.phi = random_complex(q, g * n, rng);
    s.phi.colwise().normalize();
    s.j = Mat::Zero(g * n, p);
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int i = 0; i < k; ++i) s.j.middleRows(idx[i] * g, g) = random_complex(g, p, rng);
    s.y = s.phi * s.j;
    return s;
}

SolverConfig tight() {
    SolverConfig c;
    c.gap_tol = 1e-10;
    c.root_tol = 1e-9;
    c.max_iterations = 20000;
    return c;
}

double phi_at(const DenseOperator<cd>& op, const Mat& y, double tau, const GroupStructure& groups) {
    const Mat j0 = Mat::Zero(op.cols(), y.cols());
    return spg_solve_lstau(op, y, j0, tau, groups, tight()).r.norm();
}

} // namespace

TEST_CASE("mixed norms: hand examples") {
    const GroupStructure g1{1, 3}, g2{2, 2};
    CHECK(group_norm_12(Mat::Zero(3, 2), g1) == 0.0);
    CHECK(group_norm_inf2(Mat::Zero(3, 2), g1) == 0.0);

    Mat row = Mat::Zero(1, 3);
    row << cd(3, 0), cd(0, 4), cd(0, 0);
    CHECK(group_norm_12(row, GroupStructure{1, 1}) == doctest::Approx(5.0));
    CHECK(group_norm_inf2(row, GroupStructure{1, 1}) == doctest::Approx(5.0));

    Mat e(4, 1);
    e << 1, 0, 0, 1;
    CHECK(group_norm_12(e, g2) == doctest::Approx(2.0));
    CHECK(group_norm_inf2(e, g2) == doctest::Approx(1.0));
}

TEST_CASE("Hoelder inequality for the mixed norm pair") {
    std::mt19937_64 rng(3);
    const GroupStructure g{2, 7};
    for (int i = 0; i < 100; ++i) {
        const Mat j = random_complex(14, 3, rng), z = random_complex(14, 3, rng);
        CHECK(std::abs(real_inner(z, j)) <= group_norm_12(j, g) * group_norm_inf2(z, g) * (1 + 1e-14));
    }
}

TEST_CASE("projection: interior point, zero radius and negative radius") {
    std::mt19937_64 rng(5);
    const GroupStructure g{2, 3};
    const Mat j = random_complex(6, 3, rng);
    const double norm = group_norm_12(j, g);
    CHECK(project_group_l1(j, g, norm * 1.01) == j);
    CHECK(project_group_l1(j, g, 0.0).norm() == 0.0);
    CHECK_THROWS_AS(project_group_l1(j, g, -1.0), std::invalid_argument);
}

TEST_CASE("projection matches the multiplier-bisection oracle") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int g = 1 + trial % 2;
        const int n = 3 + trial % 9;
        const Mat j = random_complex(g * n, 1 + trial % 4, rng);
        const double tau = u(rng) * group_norm_12(j, GroupStructure{g, n});
        const Mat p = project_group_l1(j, GroupStructure{g, n}, tau);
        CHECK((p - oracle::projection_bisection(j, g, tau)).norm() < 1e-8);
        CHECK(group_norm_12(p, GroupStructure{g, n}) <= tau + 1e-9);
    }
    // the 6-row, g = 2, P = 3, tau = 1 case
    const Mat j = random_complex(6, 3, rng);
    CHECK((project_group_l1(j, GroupStructure{2, 3}, 1.0) - oracle::projection_bisection(j, 2, 1.0)).norm() < 1e-6);
}

TEST_CASE("projection is idempotent and optimal against random feasible points") {
    std::mt19937_64 rng(9);
    const GroupStructure g{2, 5};
    const Mat j = random_complex(10, 2, rng);
    const double tau = 0.4 * group_norm_12(j, g);
    const Mat p = project_group_l1(j, g, tau);
    CHECK((project_group_l1(p, g, tau) - p).norm() < 1e-12);
    for (int i = 0; i < 200; ++i) {
        const Mat s = project_group_l1(random_complex(10, 2, rng), g, tau);
        CHECK((j - p).norm() <= (j - s).norm() + 1e-12);
    }
}

TEST_CASE("TE grouping equals projecting the concatenated row pairs") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 4 + trial, p = 1 + trial % 5;
        const Mat j = random_complex(2 * n, p, rng);
        const double tau = 0.3 * group_norm_12(j, GroupStructure{2, n});
        Mat wide(n, 2 * p);
        for (int i = 0; i < n; ++i) wide.row(i) << j.row(2 * i), j.row(2 * i + 1);
        const Mat pw = project_group_l1(wide, GroupStructure{1, n}, tau);
        Mat back(2 * n, p);
        for (int i = 0; i < n; ++i) {
            back.row(2 * i) = pw.row(i).head(p);
            back.row(2 * i + 1) = pw.row(i).tail(p);
        }
        CHECK((project_group_l1(j, GroupStructure{2, n}, tau) - back).norm() < 1e-12);
    }
}

TEST_CASE("SPG: zero data returns immediately") {
    const DenseOperator<cd> op(Mat::Identity(4, 4));
    const auto r = spg_solve_lstau(op, Mat::Zero(4, 2), Mat::Zero(4, 2), 1.0, GroupStructure{1, 4}, SolverConfig{});
    CHECK(r.j.norm() == 0.0);
    CHECK(r.r.norm() == 0.0);
    CHECK(r.iterations == 0);
}

TEST_CASE("SPG with identity Phi reduces to the projection") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 10 + trial;
        const Mat y = random_complex(n, 1, rng);
        const double tau = 0.5 * y.cwiseAbs().sum();
        const GroupStructure g{1, n};
        const auto r = spg_solve_lstau(DenseOperator<cd>(Mat::Identity(n, n)), y, Mat::Zero(n, 1), tau, g, tight());
        CHECK((r.j - project_group_l1(y, g, tau)).norm() < 1e-6);
    }
}

TEST_CASE("SPG: feasibility, nonmonotone acceptance and final duality gap") {
    std::mt19937_64 rng(19);
    const Planted s = planted(30, 50, 3, 2, 4, rng);
    const DenseOperator<cd> op(s.phi);
    const double tau = 0.5 * group_norm_12(s.j, s.groups);
    SolveTrace trace;
    SpgControl<cd> control;
    control.trace = &trace;
    bool feasible = true;
    control.observer = [&](const Mat& j, IterationRecord&) {
        feasible = feasible && group_norm_12(j, s.groups) <= tau * (1 + 1e-12) + 1e-9;
        return true;
    };
    SolverConfig config;
    config.max_iterations = 5000;
    const auto r = spg_solve_lstau(op, s.y, Mat::Zero(s.phi.cols(), 3), tau, s.groups, config, control);
    CHECK(r.status == SpgStatus::Converged);
    CHECK(feasible);
    for (const auto& rec : trace.records) CHECK(rec.descent_margin >= 0);
    const double rn = r.r.norm();
    const double gap = std::abs(rn - (real_inner(s.y, r.r) - tau * group_norm_inf2(op.adjoint(r.r), s.groups)) / rn);
    CHECK(gap <= config.gap_tol * s.y.norm());
}

TEST_CASE("SPG rejects non-finite data") {
    Mat y = Mat::Ones(3, 1);
    y(1, 0) = cd(std::numeric_limits<double>::quiet_NaN(), 0);
    CHECK_THROWS_AS(spg_solve_lstau(DenseOperator<cd>(Mat::Identity(3, 3)), y, Mat::Zero(3, 1), 1.0,
                                    GroupStructure{1, 3}, SolverConfig{}),
                    NumericalError);
}

TEST_CASE("Pareto curve: origin formula and finite differences") {
    std::mt19937_64 rng(23);
    const Mat phi = random_complex(20, 30, rng);
    const Mat y = random_complex(20, 2, rng);
    const DenseOperator<cd> op(phi);
    const GroupStructure g{1, 30};
    const ParetoPoint origin = pareto_value_and_slope(op, y, Mat::Zero(30, 2), g);
    CHECK(origin.value == doctest::Approx(y.norm()));
    CHECK(origin.slope == doctest::Approx(-group_norm_inf2(phi.adjoint() * y, g) / y.norm()));

    const double tau = 0.5 * group_norm_12(phi.completeOrthogonalDecomposition().solve(y), g);
    const auto sol = spg_solve_lstau(op, y, Mat::Zero(30, 2), tau, g, tight());
    const ParetoPoint p = pareto_value_and_slope(op, y, sol.j, g);
    const double h = 1e-3 * tau;
    const double fd = (phi_at(op, y, tau + h, g) - phi_at(op, y, tau - h, g)) / (2 * h);
    CHECK(std::abs(fd - p.slope) <= 1e-2 * std::abs(p.slope));
}

TEST_CASE("Newton: sigma at the data norm gives the origin") {
    std::mt19937_64 rng(29);
    const Planted s = planted(20, 30, 2, 1, 3, rng);
    const auto r = newton_root_bpsigma(DenseOperator<cd>(s.phi), s.y, s.y.norm(), s.groups, SolverConfig{});
    CHECK(r.tau == 0.0);
    CHECK(r.j.norm() == 0.0);
}

TEST_CASE("Newton: noiseless recovery, monotone path and root accuracy") {
    std::mt19937_64 rng(31);
    const Planted s = planted(40, 60, 3, 1, 5, rng);
    const DenseOperator<cd> op(s.phi);
    SolverConfig config = tight();
    config.root_tol = 1e-7;
    const auto r = newton_root_bpsigma(op, s.y, 0.0, s.groups, config);
    CHECK(r.r.norm() <= 1e-6 * s.y.norm());
    CHECK((r.j - s.j).norm() <= 1e-4 * s.j.norm());
    for (std::size_t i = 1; i < r.steps.size(); ++i) {
        CHECK(r.steps[i].tau >= r.steps[i - 1].tau);
        CHECK(r.steps[i].phi < r.steps[i - 1].phi);
    }
}

TEST_CASE("Newton root agrees with a tau sweep") {
    std::mt19937_64 rng(37);
    const Planted s = planted(24, 30, 2, 1, 3, rng);
    const Mat noisy = s.y + 0.05 * random_complex(24, 2, rng);
    const DenseOperator<cd> op(s.phi);
    const double sigma = 0.3 * noisy.norm();
    const auto r = newton_root_bpsigma(op, noisy, sigma, s.groups, tight());
    CHECK(std::abs(r.r.norm() - sigma) <= 1e-9 * noisy.norm());

    // dense sweep to bracket the root, then bisection on the bracket
    const double top = 2 * group_norm_12(s.j, s.groups) + 1;
    double lo = 0, hi = top;
    for (int i = 1; i <= 200; ++i) {
        const double t = top * i / 200;
        if (phi_at(op, noisy, t, s.groups) < sigma) {
            hi = t;
            lo = top * (i - 1) / 200;
            break;
        }
    }
    for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        (phi_at(op, noisy, mid, s.groups) > sigma ? lo : hi) = mid;
    }
    const double sweep = 0.5 * (lo + hi);
    CHECK(std::abs(r.tau - sweep) <= 1e-3 * sweep);
}

TEST_CASE("cross-validated solve on noiseless data") {
    std::mt19937_64 rng(41);
    const Planted s = planted(48, 60, 3, 1, 4, rng);
    const std::vector<int> cv_rows{5, 6, 20, 21, 33, 34, 40, 41};
    SolverConfig config;
    config.max_iterations = 3000;
    config.gap_tol = 1e-10;
    config.root_tol = 1e-9;
    const RowMask mask = RowMask::Constant(48, 3, true);
    const auto cv = cv_spgl1<cd>(s.phi, s.y, mask, cv_rows, s.groups, config);

    // r_cv keeps falling: the best iterate is (nearly) the last one
    CHECK(!cv.patience_triggered);
    CHECK(cv.trace.n_opt >= cv.trace.iterations() - config.patience);
    CHECK((cv.j - s.j).norm() <= 1e-6 * s.j.norm());

    std::vector<int> rec_rows;
    for (int i = 0; i < 48; ++i)
        if (std::find(cv_rows.begin(), cv_rows.end(), i) == cv_rows.end()) rec_rows.push_back(i);
    const auto direct = newton_root_bpsigma(DenseOperator<cd>(take_rows(s.phi, rec_rows)), take_rows(s.y, rec_rows),
                                            0.0, s.groups, config);
    CHECK((cv.j - direct.j).norm() <= 1e-6 * s.j.norm());
    CHECK_THROWS_AS(cv_spgl1<cd>(s.phi, s.y, mask, {}, s.groups, config), std::invalid_argument);
}

TEST_CASE("cross-validation stops once the CV residual turns upward") {
    std::mt19937_64 rng(43);
    Planted s = planted(60, 80, 4, 1, 4, rng);
    const Mat noise = random_complex(60, 4, rng);
    s.y += noise * (0.3 * s.y.norm() / noise.norm());
    std::vector<int> cv_rows;
    for (int i = 0; i < 60; i += 5) cv_rows.push_back(i);
    const RowMask mask = RowMask::Constant(60, 4, true);
    const auto cv = cv_spgl1<cd>(s.phi, s.y, mask, cv_rows, s.groups, SolverConfig{});
    CHECK(cv.patience_triggered);
    CHECK(cv.trace.iterations() == cv.trace.n_opt + SolverConfig{}.patience + 1);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& rec : cv.trace.records) best = std::min(best, rec.r_cv);
    CHECK(cv.r_cv_opt == best);
}

TEST_CASE("masked operator ignores masked entries") {
    std::mt19937_64 rng(47);
    const Mat phi = random_complex(6, 4, rng);
    RowMask mask = RowMask::Constant(6, 2, true);
    mask(1, 0) = false;
    mask(4, 1) = false;
    const MaskedOperator<cd> op(phi, mask);
    const Mat j = random_complex(4, 2, rng);
    const Mat out = op.apply(j);
    CHECK(out(1, 0) == cd(0.0));
    CHECK(out(4, 1) == cd(0.0));
    CHECK(std::abs(out(0, 0) - (phi * j)(0, 0)) < 1e-14);
    // adjoint consistency <op j, r> = <j, op^H r>
    const Mat r = random_complex(6, 2, rng);
    CHECK(std::abs((out.adjoint() * r).trace() - (j.adjoint() * op.adjoint(r)).trace()) < 1e-12);
}

TEST_CASE("solver configuration validation") {
    SolverConfig c;
    c.alpha_min = 2;
    c.alpha_max = 1;
    CHECK_THROWS(c.validate());
    c = SolverConfig{};
    c.gamma = 0.6;
    CHECK_THROWS(c.validate());
    c = SolverConfig{};
    c.history = 0;
    CHECK_THROWS(c.validate());
    c = SolverConfig{};
    c.sigma = -1.0;
    CHECK_THROWS(c.validate());
}
