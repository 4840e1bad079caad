#pragma once

// Group-sparse basis pursuit denoise for multiple measurement vectors:
//   min ||J||_{1,2} s.t. ||Phi J - Y||_F <= sigma
// solved through the Lasso subproblem  min ||Phi J - Y||_F s.t. ||J||_{1,2} <= tau
// (spectral projected gradient) and Newton root finding on the Pareto curve
// phi(tau). Rows of J are grouped g at a time (g = 1: one pixel per row, g = 2:
// the two in-plane components of a pixel).

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <type_traits>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "pecmmv/errors.hpp"

namespace pecmmv {

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using RowMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct GroupStructure {
    int g = 1;      // rows per group
    int groups = 0; // N

    int rows() const { return g * groups; }
    void check(Eigen::Index rows_of_j) const {
        if (g < 1) throw std::invalid_argument("group size must be positive");
        if (rows_of_j != static_cast<Eigen::Index>(g) * groups) {
            std::ostringstream msg;
            msg << "matrix has " << rows_of_j << " rows, group structure expects " << rows();
            throw std::invalid_argument(msg.str());
        }
    }
};

/// Euclidean norm of every group (Frobenius norm of its g x P block).
template <typename Derived>
Eigen::Matrix<typename Derived::RealScalar, Eigen::Dynamic, 1>
group_norms(const Eigen::MatrixBase<Derived>& j, const GroupStructure& groups) {
    using Real = typename Derived::RealScalar;
    groups.check(j.rows());
    const Eigen::Matrix<Real, Eigen::Dynamic, 1> row_sq = j.rowwise().squaredNorm();
    const Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>> blocks(
        row_sq.data(), groups.g, groups.groups);
    return blocks.colwise().sum().transpose().cwiseSqrt();
}

/// Sum of group norms, ||J||_{1,2}.
template <typename Derived>
typename Derived::RealScalar group_norm_12(const Eigen::MatrixBase<Derived>& j,
                                           const GroupStructure& groups) {
    if (groups.groups == 0) return 0;
    return group_norms(j, groups).sum();
}

/// Largest group norm, ||Z||_{inf,2}; dual of group_norm_12.
template <typename Derived>
typename Derived::RealScalar group_norm_inf2(const Eigen::MatrixBase<Derived>& z,
                                             const GroupStructure& groups) {
    if (groups.groups == 0) return 0;
    return group_norms(z, groups).maxCoeff();
}

/// Re Tr(A^H B).
template <typename DA, typename DB>
typename DA::RealScalar real_inner(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
    return Eigen::numext::real(a.conjugate().cwiseProduct(b).sum());
}

/// Euclidean projection of a non-negative vector onto {w >= 0, sum w <= tau}.
template <typename Real>
Eigen::Matrix<Real, Eigen::Dynamic, 1> project_simplex_l1(const Eigen::Matrix<Real, Eigen::Dynamic, 1>& v,
                                                          Real tau) {
    if (tau < 0) throw std::invalid_argument("tau must be non-negative");
    if (v.sum() <= tau) return v;
    if (tau == 0) return Eigen::Matrix<Real, Eigen::Dynamic, 1>::Zero(v.size());
    std::vector<Real> sorted(v.data(), v.data() + v.size());
    std::sort(sorted.begin(), sorted.end(), std::greater<Real>());
    Real cumsum = 0, theta = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        cumsum += sorted[i];
        const Real t = (cumsum - tau) / static_cast<Real>(i + 1);
        if (sorted[i] - t > 0) theta = t;
        else break;
    }
    return (v.array() - theta).cwiseMax(Real(0)).matrix();
}

/// Projection onto the ball ||S||_{1,2} <= tau: project the vector of group
/// norms onto the l1 ball and rescale each group.
template <typename Derived>
DenseMatrix<typename Derived::Scalar> project_group_l1(const Eigen::MatrixBase<Derived>& j,
                                                       const GroupStructure& groups,
                                                       typename Derived::RealScalar tau) {
    using Real = typename Derived::RealScalar;
    if (!(tau >= 0)) throw std::invalid_argument("tau must be non-negative");
    DenseMatrix<typename Derived::Scalar> out = j;
    if (groups.groups == 0) return out;
    const Eigen::Matrix<Real, Eigen::Dynamic, 1> norms = group_norms(j, groups);
    if (norms.sum() <= tau) return out;
    const Eigen::Matrix<Real, Eigen::Dynamic, 1> shrunk = project_simplex_l1<Real>(norms, tau);
    for (int n = 0; n < groups.groups; ++n) {
        const Real scale = norms(n) > 0 ? shrunk(n) / norms(n) : Real(0);
        out.middleRows(static_cast<Eigen::Index>(n) * groups.g, groups.g) *= scale;
    }
    return out;
}

/// Phi as a plain dense matrix.
template <typename Scalar>
class DenseOperator {
public:
    using Matrix = DenseMatrix<Scalar>;
    explicit DenseOperator(Matrix phi) : phi_(std::move(phi)) {}

    Matrix apply(const Matrix& j) const { return phi_ * j; }
    Matrix adjoint(const Matrix& r) const { return phi_.adjoint() * r; }
    Eigen::Index rows() const { return phi_.rows(); }
    Eigen::Index cols() const { return phi_.cols(); }
    const Matrix& matrix() const { return phi_; }

private:
    Matrix phi_;
};

/// Phi shared by all columns, with per-column row masks: apply gives
/// M .* (Phi J) and adjoint gives Phi^H (M .* R). Masked channels carry no
/// data and drop out of every residual.
template <typename Scalar>
class MaskedOperator {
public:
    using Matrix = DenseMatrix<Scalar>;
    MaskedOperator(Matrix phi, RowMask mask) : phi_(std::move(phi)), mask_(std::move(mask)) {
        if (mask_.rows() != phi_.rows()) throw std::invalid_argument("mask rows must match Phi rows");
    }

    Matrix apply(const Matrix& j) const {
        check_cols(j.cols());
        Matrix out = phi_ * j;
        return mask_.select(out.array(), Scalar(0)).matrix();
    }
    Matrix adjoint(const Matrix& r) const {
        check_cols(r.cols());
        const Matrix masked = mask_.select(r.array(), Scalar(0)).matrix();
        return phi_.adjoint() * masked;
    }
    /// Zero the masked entries of a data matrix.
    Matrix restrict(const Matrix& y) const {
        check_cols(y.cols());
        return mask_.select(y.array(), Scalar(0)).matrix();
    }
    Eigen::Index rows() const { return phi_.rows(); }
    Eigen::Index cols() const { return phi_.cols(); }
    const Matrix& matrix() const { return phi_; }
    const RowMask& mask() const { return mask_; }

private:
    void check_cols(Eigen::Index c) const {
        if (c != mask_.cols()) throw std::invalid_argument("column count does not match the mask");
    }
    Matrix phi_;
    RowMask mask_;
};

struct SolverConfig {
    double alpha_min = 1e-16;
    double alpha_max = 1e16;
    double gamma = 1e-4;      // sufficient descent
    int history = 3;          // nonmonotone line-search memory M
    double gap_tol = 1e-6;    // duality gap tolerance, relative to ||Y||_F
    double root_tol = 1e-5;   // Pareto root tolerance, relative to ||Y||_F
    int max_iterations = 600; // total SPG iterations (N_max)
    int patience = 30;        // CV patience (Delta N)
    int max_backtracks = 60;
    int max_newton_steps = 100;
    double first_gap_tol = 1e-2; // relative gap tolerance of the first Newton subproblem
    std::optional<double> sigma; // unset: cross-validation stopping

    void validate() const {
        if (!(alpha_min > 0 && alpha_min < alpha_max)) throw std::invalid_argument("need 0 < alpha_min < alpha_max");
        if (!(gamma > 0 && gamma < 0.5)) throw std::invalid_argument("gamma must lie in (0, 0.5)");
        if (history < 1) throw std::invalid_argument("line-search history must be >= 1");
        if (!(gap_tol > 0) || !(root_tol > 0)) throw std::invalid_argument("tolerances must be positive");
        if (max_iterations < 1 || patience < 1 || max_backtracks < 1 || max_newton_steps < 1)
            throw std::invalid_argument("iteration limits must be positive");
        if (sigma && !(*sigma >= 0)) throw std::invalid_argument("sigma must be non-negative");
    }
};

struct IterationRecord {
    int iteration = 0;  // global SPG iteration count, 1-based
    double tau = 0.0;
    double r_rec = 0.0; // ||R||_F on the rows seen by the solver
    double r_cv = std::numeric_limits<double>::quiet_NaN();
    double gap = 0.0;   // duality gap before the step
    double step = 0.0;  // accepted step length
    int backtracks = 0;
    double descent_margin = 0.0; // slack of the nonmonotone acceptance test (>= 0)
};

struct SolveTrace {
    std::vector<IterationRecord> records;
    int n_opt = 0; // iteration with the smallest r_cv (0: the starting point)

    int iterations() const { return static_cast<int>(records.size()); }
};

enum class SpgStatus { Converged, IterationLimit, LineSearchFailed, Stopped };

/// Per-call controls of spg_solve_lstau.
template <typename Scalar>
struct SpgControl {
    double gap_tol_abs = -1.0; // < 0: SolverConfig::gap_tol * ||Y||_F
    int max_iterations = -1;   // < 0: SolverConfig::max_iterations
    SolveTrace* trace = nullptr;
    /// Called after every accepted iterate; may fill r_cv. Returning false
    /// stops the solve with SpgStatus::Stopped.
    std::function<bool(const DenseMatrix<Scalar>&, IterationRecord&)> observer;
};

template <typename Scalar>
struct SpgResult {
    DenseMatrix<Scalar> j;
    DenseMatrix<Scalar> r; // Y - Phi J
    int iterations = 0;
    double gap = 0.0;
    SpgStatus status = SpgStatus::Converged;
};

namespace detail {

template <typename Matrix>
void check_finite(const Matrix& m, const char* what, int iteration) {
    if (!m.allFinite()) {
        std::ostringstream msg;
        msg << "non-finite " << what << " at SPG iteration " << iteration;
        throw NumericalError(msg.str());
    }
}

} // namespace detail

/// Spectral projected gradient for min ||Y - Phi J||_F s.t. ||J||_{1,2} <= tau.
///
/// Nonmonotone line search over the last M residuals with a Barzilai-Borwein
/// step safeguarded to [alpha_min, alpha_max]. Stops when the duality gap
///   | ||R|| - (Re Tr(Y^H R) - tau ||Phi^H R||_{inf,2}) / ||R|| |
/// drops below the tolerance or the iteration budget runs out.
template <typename Op, typename Scalar = typename Op::Matrix::Scalar>
SpgResult<Scalar> spg_solve_lstau(const Op& op, const std::type_identity_t<DenseMatrix<Scalar>>& y,
                                  const std::type_identity_t<DenseMatrix<Scalar>>& j_init, double tau,
                                  const GroupStructure& groups, const SolverConfig& config,
                                  const SpgControl<Scalar>& control = {}) {
    using Matrix = DenseMatrix<Scalar>;
    config.validate();
    if (!(tau >= 0)) throw std::invalid_argument("tau must be non-negative");
    groups.check(j_init.rows());
    if (y.rows() != op.rows() || j_init.rows() != op.cols() || y.cols() != j_init.cols())
        throw std::invalid_argument("Phi, Y and J shapes are inconsistent");

    const double y_norm = y.norm();
    const double gap_tol = control.gap_tol_abs >= 0 ? control.gap_tol_abs : config.gap_tol * y_norm;
    const int budget = control.max_iterations >= 0 ? control.max_iterations : config.max_iterations;
    const int offset = control.trace ? control.trace->iterations() : 0;

    SpgResult<Scalar> out;
    out.j = project_group_l1(j_init, groups, tau);
    out.r = y - op.apply(out.j);
    Matrix g = -op.adjoint(out.r);
    detail::check_finite(out.r, "residual", offset);

    std::deque<double> history{out.r.squaredNorm()};
    double alpha = 1.0;
    if (tau > 0) {
        const double dual = group_norm_inf2(op.adjoint(y), groups);
        if (dual > 0) alpha = tau / dual;
    }
    alpha = std::clamp(alpha, config.alpha_min, config.alpha_max);

    for (int it = 0;; ++it) {
        const double r_norm = out.r.norm();
        out.gap = r_norm > 0
                      ? std::abs(r_norm - (real_inner(y, out.r) - tau * group_norm_inf2(g, groups)) / r_norm)
                      : 0.0;
        if (out.gap <= gap_tol) {
            out.status = SpgStatus::Converged;
            return out;
        }
        if (it >= budget) {
            out.status = SpgStatus::IterationLimit;
            return out;
        }

        const double reference = *std::max_element(history.begin(), history.end());
        double step = alpha;
        Matrix j_new, r_new;
        double margin = -1.0;
        int backtracks = 0;
        for (;; ++backtracks) {
            j_new = project_group_l1(out.j - step * g, groups, tau);
            r_new = y - op.apply(j_new);
            detail::check_finite(r_new, "residual", offset + it + 1);
            margin = reference + config.gamma * real_inner(j_new - out.j, g) - r_new.squaredNorm();
            if (margin >= 0) break;
            if (backtracks + 1 >= config.max_backtracks) {
                out.status = SpgStatus::LineSearchFailed;
                return out;
            }
            step /= 2;
        }

        Matrix g_new = -op.adjoint(r_new);
        const Matrix dj = j_new - out.j;
        const double sty = real_inner(dj, g_new - g);
        if (sty <= 0) {
            alpha = config.alpha_max;
        } else {
            alpha = std::min(config.alpha_max, std::max(config.alpha_min, dj.squaredNorm() / sty));
        }
        out.j = std::move(j_new);
        out.r = std::move(r_new);
        g = std::move(g_new);
        out.iterations = it + 1;
        history.push_back(out.r.squaredNorm());
        if (static_cast<int>(history.size()) > config.history) history.pop_front();

        IterationRecord rec;
        rec.iteration = offset + it + 1;
        rec.tau = tau;
        rec.r_rec = out.r.norm();
        rec.gap = out.gap;
        rec.step = step;
        rec.backtracks = backtracks;
        rec.descent_margin = margin;
        bool keep_going = true;
        if (control.observer) keep_going = control.observer(out.j, rec);
        if (control.trace) control.trace->records.push_back(rec);
        if (!keep_going) {
            out.status = SpgStatus::Stopped;
            return out;
        }
    }
}

struct ParetoPoint {
    double value = 0.0; // phi(tau) = ||Phi J - Y||_F
    double slope = 0.0; // -||Phi^H (Phi J - Y)||_{inf,2} / phi
    bool root_reached = false; // phi == 0: slope undefined
};

template <typename Op, typename Scalar = typename Op::Matrix::Scalar>
ParetoPoint pareto_value_and_slope(const Op& op, const std::type_identity_t<DenseMatrix<Scalar>>& y,
                                   const std::type_identity_t<DenseMatrix<Scalar>>& j,
                                   const GroupStructure& groups) {
    const DenseMatrix<Scalar> r = op.apply(j) - y;
    ParetoPoint p;
    p.value = r.norm();
    if (p.value == 0) {
        p.root_reached = true;
        p.slope = std::numeric_limits<double>::quiet_NaN();
        return p;
    }
    p.slope = -group_norm_inf2(op.adjoint(r), groups) / p.value;
    return p;
}

struct NewtonStep {
    double tau = 0.0;
    double phi = 0.0;
    double slope = 0.0;
    int spg_iterations = 0;
};

template <typename Scalar>
struct NewtonResult {
    DenseMatrix<Scalar> j;
    DenseMatrix<Scalar> r; // Y - Phi J
    double tau = 0.0;
    SolveTrace trace;
    std::vector<NewtonStep> steps;
    bool converged = false;          // |phi - sigma| within tolerance
    bool stopped_by_observer = false;
};

/// Newton iteration on phi(tau) = sigma, each LS_tau warm-started from the
/// previous solution with a gap tolerance tightened tenfold per step.
template <typename Op, typename Scalar = typename Op::Matrix::Scalar>
NewtonResult<Scalar> newton_root_bpsigma(
    const Op& op, const std::type_identity_t<DenseMatrix<Scalar>>& y, double sigma, const GroupStructure& groups,
    const SolverConfig& config,
    std::type_identity_t<std::function<bool(const DenseMatrix<Scalar>&, IterationRecord&)>> observer = {}) {
    config.validate();
    if (!(sigma >= 0)) throw std::invalid_argument("sigma must be non-negative");
    groups.check(op.cols());
    if (y.rows() != op.rows()) throw std::invalid_argument("Phi and Y row counts differ");

    NewtonResult<Scalar> out;
    out.j = DenseMatrix<Scalar>::Zero(op.cols(), y.cols());
    out.r = y;
    const double y_norm = y.norm();
    const double root_tol = config.root_tol * y_norm;
    const double gap_floor = config.gap_tol * y_norm;
    double gap_tol = std::max(gap_floor, config.first_gap_tol * y_norm);

    if (y_norm == 0 || sigma >= y_norm) {
        out.converged = true;
        return out;
    }

    for (int h = 0; h < config.max_newton_steps; ++h) {
        SpgControl<Scalar> control;
        control.gap_tol_abs = gap_tol;
        control.max_iterations = config.max_iterations - out.trace.iterations();
        control.trace = &out.trace;
        control.observer = observer;
        SpgResult<Scalar> sub = spg_solve_lstau(op, y, out.j, out.tau, groups, config, control);
        out.j = std::move(sub.j);
        out.r = std::move(sub.r);

        NewtonStep step;
        step.tau = out.tau;
        step.spg_iterations = sub.iterations;
        step.phi = out.r.norm();
        if (sub.status == SpgStatus::Stopped) {
            out.stopped_by_observer = true;
            out.steps.push_back(step);
            return out;
        }
        if (std::abs(step.phi - sigma) <= root_tol || step.phi == 0) {
            out.converged = true;
            out.steps.push_back(step);
            return out;
        }
        step.slope = -group_norm_inf2(op.adjoint(out.r), groups) / step.phi;
        out.steps.push_back(step);
        if (!(step.slope < 0)) {
            std::ostringstream msg;
            msg << "Pareto slope " << step.slope << " is not negative at tau = " << out.tau;
            throw NumericalError(msg.str());
        }
        if (out.trace.iterations() >= config.max_iterations) return out;
        // tau = 0 is solved exactly; tightening starts after the first real subproblem.
        if (out.tau > 0) gap_tol = std::max(gap_floor, 0.1 * gap_tol);
        out.tau = std::max(0.0, out.tau + (sigma - step.phi) / step.slope);
    }
    return out;
}

template <typename Scalar>
struct CvResult {
    DenseMatrix<Scalar> j;  // iterate with the smallest CV residual
    SolveTrace trace;
    double r_rec_opt = 0.0; // reconstruction residual at n_opt
    double r_cv_opt = 0.0;
    bool patience_triggered = false; // false: N_max or the root came first
    std::vector<NewtonStep> steps;
};

/// Row subset of a matrix.
template <typename Derived>
DenseMatrix<typename Derived::Scalar> take_rows(const Eigen::DenseBase<Derived>& m, const std::vector<int>& rows) {
    DenseMatrix<typename Derived::Scalar> out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return out;
}

inline RowMask take_rows(const RowMask& m, const std::vector<int>& rows) {
    RowMask out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return out;
}

/// Cross-validated SPGL1. The CV rows are removed from Phi; the remaining
/// rows are driven toward sigma = 0 by the Newton/SPG iteration, r_cv is
/// evaluated after every SPG iteration, and the solve stops once
/// N_iter > N_opt + patience (or at N_max).
template <typename Scalar>
CvResult<Scalar> cv_spgl1(const DenseMatrix<Scalar>& phi_full, const DenseMatrix<Scalar>& y_full,
                          const RowMask& mask_full, const std::vector<int>& cv_rows,
                          const GroupStructure& groups, const SolverConfig& config) {
    config.validate();
    if (cv_rows.empty()) throw std::invalid_argument("cross-validation split is empty");
    if (phi_full.rows() != y_full.rows() || mask_full.rows() != y_full.rows() || mask_full.cols() != y_full.cols())
        throw std::invalid_argument("Phi, Y and mask shapes are inconsistent");
    std::vector<bool> is_cv(static_cast<std::size_t>(phi_full.rows()), false);
    for (int r : cv_rows) {
        if (r < 0 || r >= phi_full.rows()) throw std::invalid_argument("CV row out of range");
        is_cv[static_cast<std::size_t>(r)] = true;
    }
    std::vector<int> rec_rows;
    for (int r = 0; r < phi_full.rows(); ++r)
        if (!is_cv[static_cast<std::size_t>(r)]) rec_rows.push_back(r);
    if (rec_rows.empty()) throw std::invalid_argument("no reconstruction rows left");

    const MaskedOperator<Scalar> rec(take_rows(phi_full, rec_rows), take_rows(mask_full, rec_rows));
    const MaskedOperator<Scalar> cv(take_rows(phi_full, cv_rows), take_rows(mask_full, cv_rows));
    const DenseMatrix<Scalar> y_rec = rec.restrict(take_rows(y_full, rec_rows));
    const DenseMatrix<Scalar> y_cv = cv.restrict(take_rows(y_full, cv_rows));

    CvResult<Scalar> out;
    out.j = DenseMatrix<Scalar>::Zero(phi_full.cols(), y_full.cols());
    out.r_rec_opt = y_rec.norm();
    out.r_cv_opt = y_cv.norm();
    out.trace.n_opt = 0;

    auto observer = [&](const DenseMatrix<Scalar>& j, IterationRecord& rec_info) {
        rec_info.r_cv = (y_cv - cv.apply(j)).norm();
        if (rec_info.r_cv < out.r_cv_opt) {
            out.r_cv_opt = rec_info.r_cv;
            out.r_rec_opt = rec_info.r_rec;
            out.trace.n_opt = rec_info.iteration;
            out.j = j;
        }
        if (rec_info.iteration > out.trace.n_opt + config.patience) {
            out.patience_triggered = true;
            return false;
        }
        return true;
    };

    NewtonResult<Scalar> newton = newton_root_bpsigma(rec, y_rec, 0.0, groups, config, observer);
    const int n_opt = out.trace.n_opt;
    out.trace.records = std::move(newton.trace.records);
    out.trace.n_opt = n_opt;
    out.steps = std::move(newton.steps);
    return out;
}

} // namespace pecmmv
