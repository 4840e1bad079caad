#include "pecmmv/forward.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "pecmmv/bessel.hpp"
#include "pecmmv/errors.hpp"
#include "pecmmv/fields.hpp"

namespace pecmmv {

namespace {

constexpr cd kI{0.0, 1.0};

// Order-n Hankel function of the second kind (outgoing for exp(i omega t))
// from a table of non-negative orders; handles negative n.
cd h2_from(const BesselTable& t, int n) {
    const int m = std::abs(n);
    const cd v{t.j[m], -t.y[m]};
    return (n < 0 && (m % 2 == 1)) ? -v : v;
}

double j_from(const BesselTable& t, int n) {
    const int m = std::abs(n);
    return (n < 0 && (m % 2 == 1)) ? -t.j[m] : t.j[m];
}

// Derivatives via Z'_n(x) = Z_{n-1}(x) - (n/x) Z_n(x).
cd h2_prime(const BesselTable& t, int n, double x) { return h2_from(t, n - 1) - (n / x) * h2_from(t, n); }
double j_prime(const BesselTable& t, int n, double x) { return j_from(t, n - 1) - (n / x) * j_from(t, n); }

struct Polar {
    double rho;
    double phi;
};

Polar polar(const Point& p, const Point& origin) {
    const Point d = p - origin;
    return {d.norm(), std::atan2(d.y(), d.x())};
}

void check_outside(const Circle& c, const Point& p, const char* what) {
    if ((p - c.center).norm() < c.radius * (1.0 - 1e-12)) {
        std::ostringstream msg;
        msg << what << " at (" << p.x() << ", " << p.y() << ") lies inside the circular target";
        throw std::invalid_argument(msg.str());
    }
}

// Boundary ratio J_n(ka)/H_n(ka) (Dirichlet, TM) or J'_n(ka)/H'_n(ka)
// (Neumann on H3, TE) for orders -n_terms..n_terms.
Eigen::VectorXcd reflection_ratios(double ka, int n_terms, Polarization pol) {
    const BesselTable t = bessel_jy(n_terms + 1, ka);
    Eigen::VectorXcd r(2 * n_terms + 1);
    for (int n = -n_terms; n <= n_terms; ++n) {
        r(n + n_terms) = (pol == Polarization::TM) ? cd(j_from(t, n)) / h2_from(t, n)
                                                   : cd(j_prime(t, n, ka)) / h2_prime(t, n, ka);
    }
    return r;
}

// Incident amplitude A in u_inc = A H0^(2)(k|x - tx|) for the field whose
// boundary condition is enforced: E3 (TM) or H3 (TE).
double incident_amplitude(Polarization pol, const Wavenumber& w) {
    return pol == Polarization::TM ? -0.25 * w.omega * kMu0 : -0.25 * w.omega * kEps0;
}

// In-plane E from the outgoing expansion sum_n b_n H_n(k rho) e^{i n phi}
// of H3 about `center`.
Eigen::Vector2cd te_field_from_expansion(const Eigen::Ref<const Eigen::VectorXcd>& b, int n_terms,
                                         const Point& center, const Point& x,
                                         const Wavenumber& w) {
    const Polar p = polar(x, center);
    const double kr = w.k * p.rho;
    const BesselTable t = bessel_jy(n_terms + 1, kr);
    cd d_rho = 0.0, d_phi = 0.0;  // dH/drho and (1/rho) dH/dphi
    for (int n = -n_terms; n <= n_terms; ++n) {
        const cd e = std::exp(kI * (n * p.phi));
        const cd coef = b(n + n_terms);
        d_rho += coef * w.k * h2_prime(t, n, kr) * e;
        d_phi += coef * (kI * (n / p.rho)) * h2_from(t, n) * e;
    }
    const double c = std::cos(p.phi), s = std::sin(p.phi);
    const cd dx = c * d_rho - s * d_phi;
    const cd dy = s * d_rho + c * d_phi;
    const cd scale = 1.0 / (kI * w.omega * kEps0);
    return {scale * dy, -scale * dx};
}

// Closest-point distance from p to the segment [a, b].
double segment_distance(const Point& p, const Point& a, const Point& b) {
    const Point ab = b - a;
    const double len2 = ab.squaredNorm();
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

double cross(const Point& a, const Point& b) { return a.x() * b.y() - a.y() * b.x(); }

bool segments_intersect(const Point& p1, const Point& p2, const Point& q1, const Point& q2) {
    const double d1 = cross(q2 - q1, p1 - q1);
    const double d2 = cross(q2 - q1, p2 - q1);
    const double d3 = cross(p2 - p1, q1 - p1);
    const double d4 = cross(p2 - p1, q2 - p1);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

// 4-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 4> kGaussX{-0.8611363115940526, -0.3399810435848563,
                                        0.3399810435848563, 0.8611363115940526};
constexpr std::array<double, 4> kGaussW{0.3478548451374538, 0.6521451548625461,
                                        0.6521451548625461, 0.3478548451374538};

} // namespace

double Contour::perimeter() const {
    double len = 0.0;
    for (std::size_t i = 0; i < vertices.size(); ++i)
        len += (vertices[(i + 1) % vertices.size()] - vertices[i]).norm();
    return len;
}

double Contour::distance(const Point& p) const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < vertices.size(); ++i)
        best = std::min(best, segment_distance(p, vertices[i], vertices[(i + 1) % vertices.size()]));
    return best;
}

double PecTarget::boundary_distance(const Point& p) const {
    if (const auto* c = std::get_if<Circle>(&shape)) return std::abs((p - c->center).norm() - c->radius);
    return std::get<Contour>(shape).distance(p);
}

bool PecTarget::contains(const Point& p) const {
    if (const auto* c = std::get_if<Circle>(&shape)) return (p - c->center).norm() < c->radius;
    const auto& v = std::get<Contour>(shape).vertices;
    bool inside = false;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
        if ((v[i].y() > p.y()) != (v[j].y() > p.y())) {
            const double xc = v[j].x() + (p.y() - v[j].y()) * (v[i].x() - v[j].x()) / (v[i].y() - v[j].y());
            if (p.x() < xc) inside = !inside;
        }
    }
    return inside;
}

void validate(const PecTarget& target) {
    if (const auto* c = std::get_if<Circle>(&target.shape)) {
        if (!(c->radius > 0.0)) throw std::invalid_argument("circle radius must be positive");
        return;
    }
    const auto& v = std::get<Contour>(target.shape).vertices;
    const std::size_t n = v.size();
    if (n < 16) throw std::invalid_argument("contour needs at least 16 segments");
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 2; j < n; ++j) {
            if (i == 0 && j == n - 1) continue;  // adjacent through the closing edge
            if (segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]))
                throw std::invalid_argument("contour is self-intersecting");
        }
    }
}

Contour circle_contour(const Circle& c, int segments) {
    Contour out;
    for (int i = 0; i < segments; ++i) {
        const double a = 2.0 * kPi * i / segments;
        out.vertices.emplace_back(c.center.x() + c.radius * std::cos(a),
                                  c.center.y() + c.radius * std::sin(a));
    }
    return out;
}

Contour crescent_contour(const Point& c_outer, const Point& c_inner, double radius, int segments) {
    const Point axis = c_inner - c_outer;
    const double d = axis.norm();
    if (!(d > 0.0) || !(d < 2.0 * radius)) throw std::invalid_argument("crescent circles must overlap");
    const Point u = axis / d;
    const Point v(-u.y(), u.x());
    const double h = std::sqrt(radius * radius - d * d / 4.0);
    const Point p_plus = c_outer + 0.5 * d * u + h * v;
    const Point p_minus = c_outer + 0.5 * d * u - h * v;

    auto angle_of = [](const Point& p, const Point& c) { return std::atan2(p.y() - c.y(), p.x() - c.x()); };
    // Outer arc: counter-clockwise about c_outer from p_plus to p_minus, far side.
    const double a0 = angle_of(p_plus, c_outer);
    double a1 = angle_of(p_minus, c_outer);
    while (a1 <= a0) a1 += 2.0 * kPi;
    // Inner arc: clockwise about c_inner from p_minus to p_plus, near side.
    const double b0 = angle_of(p_minus, c_inner);
    double b1 = angle_of(p_plus, c_inner);
    while (b1 >= b0) b1 -= 2.0 * kPi;

    const double sweep_outer = a1 - a0, sweep_inner = b0 - b1;
    const int n_outer = std::max(8, static_cast<int>(std::lround(segments * sweep_outer / (sweep_outer + sweep_inner))));
    const int n_inner = std::max(8, segments - n_outer);
    Contour out;
    for (int i = 0; i < n_outer; ++i) {
        const double a = a0 + sweep_outer * i / n_outer;
        out.vertices.emplace_back(c_outer + radius * Point(std::cos(a), std::sin(a)));
    }
    for (int i = 0; i < n_inner; ++i) {
        const double b = b0 - sweep_inner * i / n_inner;
        out.vertices.emplace_back(c_inner + radius * Point(std::cos(b), std::sin(b)));
    }
    return out;
}

cd incident_tm(const Point& tx, const Point& x, const Wavenumber& w) { return dipole_field_tm(tx, x, w); }

cd incident_te_hz(const Point& tx, const Point& x, const Wavenumber& w) {
    const double r = (x - tx).norm();
    if (!(r > 0.0)) throw std::invalid_argument("observation point coincides with the source");
    return 0.25 * w.omega * kEps0 * hankel1_neg(0, w.k * r);
}

Eigen::Vector2cd incident_te(const Point& tx, const Point& x, const Wavenumber& w) {
    const Point d = x - tx;
    const double r = d.norm();
    if (!(r > 0.0)) throw std::invalid_argument("observation point coincides with the source");
    // dH3/dx_i = (omega eps0 / 4) k H1^(2)(kR) d_i / R
    const cd f = (w.k / (4.0 * kI)) * hankel2(1, w.k * r) / r;
    return {f * d.y(), -f * d.x()};
}

int min_series_terms(const Circle& c, const Wavenumber& w) {
    return static_cast<int>(std::ceil(w.k * c.radius)) + 15;
}

cd scatter_circle_tm(const Circle& c, const Point& tx, const Point& rx, const Wavenumber& w,
                     int n_terms) {
    if (!(c.radius > 0.0)) throw std::invalid_argument("circle radius must be positive");
    if (n_terms < min_series_terms(c, w))
        throw std::invalid_argument("series truncation below ceil(ka) + 15");
    check_outside(c, tx, "transmitter");
    check_outside(c, rx, "receiver");
    const Polar pt = polar(tx, c.center), pr = polar(rx, c.center);
    const double ka = w.k * c.radius;
    const BesselTable ta = bessel_jy(n_terms, ka);
    const BesselTable tt = bessel_jy(n_terms, w.k * pt.rho);
    const BesselTable tr = bessel_jy(n_terms, w.k * pr.rho);
    const double amp = incident_amplitude(Polarization::TM, w);
    const double dphi = pr.phi - pt.phi;

    cd sum = 0.0, last = 0.0;
    for (int n = 0; n <= n_terms; ++n) {
        const cd ratio = ta.j[n] / h2_from(ta, n);
        last = (n == 0 ? 1.0 : 2.0) * ratio * h2_from(tt, n) * h2_from(tr, n) * std::cos(n * dphi);
        if (!std::isfinite(last.real()) || !std::isfinite(last.imag()))
            throw NumericalError("circle series overflow; reduce n_terms");
        sum += last;
    }
    if (std::abs(last) > 1e-10 * std::abs(sum)) {
        std::ostringstream msg;
        msg << "circle series not converged after " << n_terms << " terms (tail "
            << std::abs(last) / std::abs(sum) << " of sum)";
        throw NumericalError(msg.str());
    }
    return -amp * sum;
}

Eigen::Vector2cd scatter_circle_te(const Circle& c, const Point& tx, const Point& rx,
                                   const Wavenumber& w, int n_terms) {
    if (!(c.radius > 0.0)) throw std::invalid_argument("circle radius must be positive");
    if (n_terms < min_series_terms(c, w))
        throw std::invalid_argument("series truncation below ceil(ka) + 15");
    check_outside(c, tx, "transmitter");
    check_outside(c, rx, "receiver");
    const Polar pt = polar(tx, c.center);
    const Eigen::VectorXcd ratio = reflection_ratios(w.k * c.radius, n_terms, Polarization::TE);
    const BesselTable tt = bessel_jy(n_terms, w.k * pt.rho);
    const double amp = incident_amplitude(Polarization::TE, w);

    Eigen::VectorXcd b(2 * n_terms + 1);
    for (int n = -n_terms; n <= n_terms; ++n)
        b(n + n_terms) = -ratio(n + n_terms) * amp * h2_from(tt, n) * std::exp(-kI * (n * pt.phi));
    const Eigen::Vector2cd field = te_field_from_expansion(b, n_terms, c.center, rx, w);

    // Tail: contribution of the outermost pair of orders.
    Eigen::VectorXcd tail = Eigen::VectorXcd::Zero(b.size());
    tail(0) = b(0);
    tail(2 * n_terms) = b(2 * n_terms);
    const Eigen::Vector2cd last = te_field_from_expansion(tail, n_terms, c.center, rx, w);
    if (!field.allFinite()) throw NumericalError("circle series overflow; reduce n_terms");
    if (last.norm() > 1e-10 * field.norm()) {
        std::ostringstream msg;
        msg << "TE circle series not converged after " << n_terms << " terms";
        throw NumericalError(msg.str());
    }
    return field;
}

CircleScatterer::CircleScatterer(std::vector<Circle> circles, Polarization pol, const Wavenumber& w,
                                 int n_terms)
    : circles_(std::move(circles)), pol_(pol), w_(w) {
    if (circles_.empty()) throw std::invalid_argument("scene has no circles");
    int needed = 0;
    for (const Circle& c : circles_) {
        validate(PecTarget{c});
        needed = std::max(needed, min_series_terms(c, w));
    }
    for (std::size_t i = 0; i < circles_.size(); ++i)
        for (std::size_t j = i + 1; j < circles_.size(); ++j)
            if ((circles_[i].center - circles_[j].center).norm() <= circles_[i].radius + circles_[j].radius)
                throw std::invalid_argument("circular targets overlap");
    n_terms_ = n_terms > 0 ? n_terms : needed;
    if (n_terms_ < needed) throw std::invalid_argument("series truncation below ceil(ka) + 15");

    const int m_count = static_cast<int>(circles_.size());
    const int block = 2 * n_terms_ + 1;
    regular_.resize(m_count * block);
    outgoing_.resize(m_count * block);
    for (int m = 0; m < m_count; ++m) {
        const double ka = w.k * circles_[m].radius;
        const BesselTable t = bessel_jy(n_terms_ + 1, ka);
        for (int n = -n_terms_; n <= n_terms_; ++n) {
            const int i = m * block + n + n_terms_;
            regular_(i) = pol_ == Polarization::TM ? cd(j_from(t, n)) : cd(j_prime(t, n, ka));
            outgoing_(i) = pol_ == Polarization::TM ? h2_from(t, n) : h2_prime(t, n, ka);
        }
    }

    // Unknowns are boundary amplitudes beta_n = b_n Z_n(ka), Z = H (TM) or
    // H' (TE), which keeps the system well scaled at high orders:
    //   beta_m,l + W_l(ka_m) sum_{j != m} sum_n T_mj[l, n] beta_j,n / Z_n(ka_j) = -W_l(ka_m) a_m,l
    // with W = J or J' and the Graf translation
    //   T_mj[l, n] = H_{n-l}(k d) e^{i (n-l) theta}, (d, theta) = polar(c_m - c_j).
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Identity(m_count * block, m_count * block);
    for (int m = 0; m < m_count; ++m) {
        for (int j = 0; j < m_count; ++j) {
            if (j == m) continue;
            const Polar d = polar(circles_[m].center, circles_[j].center);
            const BesselTable t = bessel_jy(2 * n_terms_, w.k * d.rho);
            for (int l = -n_terms_; l <= n_terms_; ++l) {
                const cd wl = regular_(m * block + l + n_terms_);
                for (int n = -n_terms_; n <= n_terms_; ++n) {
                    a(m * block + l + n_terms_, j * block + n + n_terms_) =
                        wl * h2_from(t, n - l) * std::exp(kI * ((n - l) * d.phi)) / outgoing_(j * block + n + n_terms_);
                }
            }
        }
    }
    if (!a.allFinite()) throw NumericalError("multiple-scattering system overflowed; reduce n_terms");
    lu_.compute(a);
    if (!std::isfinite(lu_.rcond()) || lu_.rcond() < 1e-12)
        throw NumericalError("multiple-scattering system is singular");
}

Eigen::VectorXcd CircleScatterer::coefficients(const Point& tx) const {
    const int block = 2 * n_terms_ + 1;
    const int m_count = static_cast<int>(circles_.size());
    const double amp = incident_amplitude(pol_, w_);
    Eigen::VectorXcd rhs(m_count * block);
    for (int m = 0; m < m_count; ++m) {
        check_outside(circles_[m], tx, "transmitter");
        const Polar pt = polar(tx, circles_[m].center);
        const BesselTable t = bessel_jy(n_terms_, w_.k * pt.rho);
        for (int l = -n_terms_; l <= n_terms_; ++l) {
            const cd a_l = amp * h2_from(t, l) * std::exp(-kI * (l * pt.phi));
            rhs(m * block + l + n_terms_) = -regular_(m * block + l + n_terms_) * a_l;
        }
    }
    const Eigen::VectorXcd beta = lu_.solve(rhs);
    return beta.cwiseQuotient(outgoing_);
}

Eigen::VectorXcd CircleScatterer::scattered(const Point& tx, const std::vector<Point>& rx) const {
    const Eigen::VectorXcd b = coefficients(tx);
    const int block = 2 * n_terms_ + 1;
    const int rows = pol_ == Polarization::TM ? 1 : 2;
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(rows * static_cast<int>(rx.size()));
    for (std::size_t q = 0; q < rx.size(); ++q) {
        for (std::size_t m = 0; m < circles_.size(); ++m) {
            const Circle& c = circles_[m];
            check_outside(c, rx[q], "receiver");
            const auto bm = b.segment(static_cast<int>(m) * block, block);
            if (pol_ == Polarization::TM) {
                const Polar p = polar(rx[q], c.center);
                const BesselTable t = bessel_jy(n_terms_, w_.k * p.rho);
                cd sum = 0.0;
                for (int n = -n_terms_; n <= n_terms_; ++n)
                    sum += bm(n + n_terms_) * h2_from(t, n) * std::exp(kI * (n * p.phi));
                out(q) += sum;
            } else {
                out.segment<2>(2 * q) += te_field_from_expansion(bm, n_terms_, c.center, rx[q], w_);
            }
        }
    }
    if (!out.allFinite()) throw NumericalError("non-finite scattered field");
    return out;
}

MomSolverTm::MomSolverTm(const std::vector<Contour>& contours, const Wavenumber& w,
                         int segments_per_wavelength)
    : w_(w) {
    if (contours.empty()) throw std::invalid_argument("no contour to discretize");
    if (segments_per_wavelength < 10)
        throw std::invalid_argument("MoM needs at least 10 segments per wavelength");
    const double lambda = w.wavelength();
    for (const Contour& c : contours) {
        if (c.vertices.size() < 3) throw std::invalid_argument("contour needs at least 3 vertices");
        const double perimeter = c.perimeter();
        const int n_seg = std::max(16, static_cast<int>(std::ceil(perimeter / lambda * segments_per_wavelength)));
        // Equal-length resampling of the closed polyline.
        const std::size_t nv = c.vertices.size();
        std::vector<double> cum(nv + 1, 0.0);
        for (std::size_t i = 0; i < nv; ++i)
            cum[i + 1] = cum[i] + (c.vertices[(i + 1) % nv] - c.vertices[i]).norm();
        auto at = [&](double s) {
            s = std::fmod(s, perimeter);
            const auto it = std::upper_bound(cum.begin(), cum.end(), s);
            const std::size_t i = std::min<std::size_t>(nv - 1, static_cast<std::size_t>(it - cum.begin()) - 1);
            const double len = cum[i + 1] - cum[i];
            const double t = len > 0.0 ? (s - cum[i]) / len : 0.0;
            return Point(c.vertices[i] + t * (c.vertices[(i + 1) % nv] - c.vertices[i]));
        };
        for (int i = 0; i < n_seg; ++i) {
            const Point a = at(perimeter * i / n_seg);
            const Point b = at(perimeter * (i + 1) / n_seg);
            start_.push_back(a);
            end_.push_back(b);
            mid_.push_back(0.5 * (a + b));
            length_.push_back((b - a).norm());
        }
    }

    const int n = segments();
    const double amp = 0.25 * w.omega * kMu0;
    constexpr double kGammaE = 0.57721566490153286;
    Eigen::MatrixXcd z(n, n);
    for (int m = 0; m < n; ++m) {
        for (int s = 0; s < n; ++s) {
            if (m == s) {
                // integral of -(omega mu0/4) H0^(2)(k|t|) over the segment,
                // small-argument closed form.
                const double kd = w.k * length_[s];
                const double log_term = std::log(std::exp(kGammaE) * kd / 4.0) - 1.0;
                z(m, s) = -amp * length_[s] * cd(1.0, -2.0 / kPi * log_term);
                continue;
            }
            cd acc = 0.0;
            for (std::size_t g = 0; g < kGaussX.size(); ++g) {
                const Point x = start_[s] + 0.5 * (1.0 + kGaussX[g]) * (end_[s] - start_[s]);
                acc += kGaussW[g] * dipole_field_tm(x, mid_[m], w);
            }
            z(m, s) = 0.5 * length_[s] * acc;
        }
    }
    lu_.compute(z);
    const double rc = lu_.rcond();
    condition_ = rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
    if (!(condition_ <= 1e12)) {
        std::ostringstream msg;
        msg << "MoM impedance matrix ill-conditioned (condition estimate " << condition_ << ")";
        throw NumericalError(msg.str());
    }
}

Eigen::VectorXcd MomSolverTm::currents(const Point& tx) const {
    Eigen::VectorXcd rhs(segments());
    for (int m = 0; m < segments(); ++m) rhs(m) = -incident_tm(tx, mid_[m], w_);
    return lu_.solve(rhs);
}

Eigen::VectorXcd MomSolverTm::scattered(const Point& tx, const std::vector<Point>& rx) const {
    const Eigen::VectorXcd current = currents(tx);
    Eigen::VectorXcd out(static_cast<int>(rx.size()));
    for (std::size_t q = 0; q < rx.size(); ++q) {
        cd sum = 0.0;
        for (int s = 0; s < segments(); ++s) {
            cd acc = 0.0;
            for (std::size_t g = 0; g < kGaussX.size(); ++g) {
                const Point x = start_[s] + 0.5 * (1.0 + kGaussX[g]) * (end_[s] - start_[s]);
                acc += kGaussW[g] * dipole_field_tm(x, rx[q], w_);
            }
            sum += current(s) * 0.5 * length_[s] * acc;
        }
        out(q) = sum;
    }
    if (!out.allFinite()) throw NumericalError("non-finite scattered field");
    return out;
}

Eigen::VectorXcd scatter_mom_tm(const Contour& target, const Point& tx,
                                const std::vector<Point>& rx, const Wavenumber& w, int segments) {
    if (segments < 3) throw std::invalid_argument("need at least 3 segments");
    const double per_wavelength = segments * w.wavelength() / target.perimeter();
    if (per_wavelength < 10.0 - 1e-9)
        throw std::invalid_argument("MoM needs at least 10 segments per wavelength of arc length");
    // Equivalent per-wavelength density reproducing `segments` after resampling.
    const MomSolverTm solver({target}, w, std::max(10, static_cast<int>(std::floor(per_wavelength))));
    return solver.scattered(tx, rx);
}

void add_noise(MeasurementSet& data, double snr_db, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(data.y.rows(), data.y.cols());
    double signal = 0.0, drawn = 0.0;
    // Column-major traversal keeps the draw order independent of scheduling.
    for (Eigen::Index p = 0; p < data.y.cols(); ++p) {
        for (Eigen::Index r = 0; r < data.y.rows(); ++r) {
            if (!data.mask(r, p)) continue;
            const double re = normal(rng);
            const double im = normal(rng);
            u(r, p) = cd(re, im);
            signal += std::norm(data.y(r, p));
            drawn += re * re + im * im;
        }
    }
    if (!(drawn > 0.0)) throw std::invalid_argument("no active entries to perturb");
    const double target = std::sqrt(signal) * std::pow(10.0, -snr_db / 20.0);
    u *= target / std::sqrt(drawn);
    data.y += u;
    data.noise.snr_db = snr_db;
    data.noise.seed = seed;
    data.noise_realization = u;
}

SynthResult synth_dataset(const Scene& scene, const TransceiverLayout& layout,
                          const PolarizationMode& mode, const Wavenumber& w,
                          std::optional<double> snr_db, std::uint64_t seed,
                          const SynthOptions& options) {
    if (scene.empty()) throw std::invalid_argument("scene has no targets");
    layout.validate();
    for (const PecTarget& t : scene) validate(t);

    const double orbit = std::min(
        std::min_element(layout.tx.begin(), layout.tx.end(), [](auto& a, auto& b) { return a.norm() < b.norm(); })->norm(),
        std::min_element(layout.rx.begin(), layout.rx.end(), [](auto& a, auto& b) { return a.norm() < b.norm(); })->norm());
    for (const PecTarget& t : scene) {
        if (const auto* c = std::get_if<Circle>(&t.shape)) {
            if (c->center.norm() + c->radius >= orbit) throw std::invalid_argument("target extends beyond the orbit");
        } else {
            for (const Point& v : std::get<Contour>(t.shape).vertices)
                if (v.norm() >= orbit) throw std::invalid_argument("target extends beyond the orbit");
        }
    }

    const bool all_circles = std::all_of(scene.begin(), scene.end(),
                                         [](const PecTarget& t) { return std::holds_alternative<Circle>(t.shape); });
    SynthResult result;
    MeasurementSet& data = result.data;
    data.mode = mode;
    data.frequency = w.frequency;
    data.layout = layout;
    data.mask = layout_row_mask(layout, mode);
    data.y = Eigen::MatrixXcd::Zero(mode.channels_per_receiver() * layout.num_rx(), layout.num_tx());

    auto store = [&](int p, const Eigen::VectorXcd& values) {
        if (mode.pol == Polarization::TE && mode.te_channels == TeChannels::Tangential) {
            for (int q = 0; q < layout.num_rx(); ++q)
                data.y(q, p) = orbit_tangent(layout.rx[q]).cast<cd>().dot(values.segment<2>(2 * q));
        } else {
            data.y.col(p) = values;
        }
    };

    if (all_circles) {
        std::vector<Circle> circles;
        for (const PecTarget& t : scene) circles.push_back(std::get<Circle>(t.shape));
        const CircleScatterer solver(circles, mode.pol, w, options.series_terms);
        for (int p = 0; p < layout.num_tx(); ++p) store(p, solver.scattered(layout.tx[p], layout.rx));
        result.engine = ForwardEngine::CircleSeries;
    } else {
        if (mode.pol != Polarization::TM)
            throw std::invalid_argument("TE synthesis supports circular targets only");
        std::vector<Contour> contours;
        const int circle_segments = std::max(32, static_cast<int>(std::ceil(
            options.mom_segments_per_wavelength * 2.0 * kPi / w.wavelength())));
        for (const PecTarget& t : scene) {
            if (const auto* c = std::get_if<Circle>(&t.shape))
                contours.push_back(circle_contour(*c, std::max(32, static_cast<int>(circle_segments * c->radius))));
            else
                contours.push_back(std::get<Contour>(t.shape));
        }
        const MomSolverTm solver(contours, w, options.mom_segments_per_wavelength);
        for (int p = 0; p < layout.num_tx(); ++p) store(p, solver.scattered(layout.tx[p], layout.rx));
        result.engine = ForwardEngine::MomTm;
    }
    data.y = data.mask.select(data.y, cd(0.0));
    if (snr_db) add_noise(data, *snr_db, seed);
    data.noise.seed = seed;
    return result;
}

Scene reference_scene(const std::string& name) {
    if (name == "sim1") {
        return {PecTarget{Circle{Point(-0.45, 0.6), 0.2}}, PecTarget{Circle{Point(0.45, 0.6), 0.2}}};
    }
    if (name == "sim2") {
        return {PecTarget{crescent_contour(Point(0.0, 0.0), Point(0.4, 0.0), 0.6, 256)}};
    }
    throw std::invalid_argument("unknown scene '" + name + "'");
}

} // namespace pecmmv
