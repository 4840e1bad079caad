#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "pecmmv/constants.hpp"
#include "pecmmv/geometry.hpp"
#include "pecmmv/measurement.hpp"

namespace pecmmv {

struct Circle {
    Point center;
    double radius = 0.0;
};

/// Closed polygon; the edge from the last vertex back to the first is implied.
struct Contour {
    std::vector<Point> vertices;

    double perimeter() const;
    /// Distance from p to the polygon boundary.
    double distance(const Point& p) const;
};

struct PecTarget {
    std::variant<Circle, Contour> shape;

    /// Distance from p to the target boundary.
    double boundary_distance(const Point& p) const;
    bool contains(const Point& p) const;
};

using Scene = std::vector<PecTarget>;

/// Checks radius > 0, or >= 16 vertices and no self-intersection for contours.
void validate(const PecTarget& target);

Contour circle_contour(const Circle& c, int segments);

/// Crescent: disc of radius r at c_outer minus disc of radius r at c_inner.
Contour crescent_contour(const Point& c_outer, const Point& c_inner, double radius, int segments);

// Incident fields of the synthetic sources.
//
// TM: z-directed electric line source, E3 = (1/4) omega mu0 H0^(1)(-kR).
// TE: z-directed magnetic line source, H3 = (1/4) omega eps0 H0^(1)(-kR),
//     in-plane E = (dH3/dx2, -dH3/dx1) / (i omega eps0).
cd incident_tm(const Point& tx, const Point& x, const Wavenumber& w);
cd incident_te_hz(const Point& tx, const Point& x, const Wavenumber& w);
Eigen::Vector2cd incident_te(const Point& tx, const Point& x, const Wavenumber& w);

/// Smallest admissible series truncation for a circle: ceil(ka) + 15.
int min_series_terms(const Circle& c, const Wavenumber& w);

/// Scattered E3 at rx from a PEC circle under TM line-source illumination,
/// cylindrical-harmonic series with orders |n| <= n_terms. Throws
/// NumericalError if the last retained term exceeds 1e-10 of the sum.
cd scatter_circle_tm(const Circle& c, const Point& tx, const Point& rx, const Wavenumber& w,
                     int n_terms);

/// Scattered in-plane (E1, E2) at rx from a PEC circle under TE magnetic
/// line-source illumination (Neumann condition on H3).
Eigen::Vector2cd scatter_circle_te(const Circle& c, const Point& tx, const Point& rx,
                                   const Wavenumber& w, int n_terms);

/// Multiple scattering between several PEC circles, solved exactly in the
/// truncated cylindrical-harmonic basis. The interaction matrix depends only
/// on the geometry and is factored once.
class CircleScatterer {
public:
    CircleScatterer(std::vector<Circle> circles, Polarization pol, const Wavenumber& w,
                    int n_terms = 0);

    /// Scattered field at every rx for one transmitter. TM: one value per
    /// receiver; TE: (E1, E2) interleaved per receiver.
    Eigen::VectorXcd scattered(const Point& tx, const std::vector<Point>& rx) const;

    int terms() const { return n_terms_; }

private:
    Eigen::VectorXcd coefficients(const Point& tx) const;

    std::vector<Circle> circles_;
    Polarization pol_;
    Wavenumber w_;
    int n_terms_ = 0;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
    Eigen::VectorXcd regular_;  // J_n(ka) or J'_n(ka), per circle and order
    Eigen::VectorXcd outgoing_; // H_n(ka) or H'_n(ka)
};

/// TM boundary-integral (EFIE) solver with pulse basis and point matching.
/// Each contour is resampled into equal-length segments.
class MomSolverTm {
public:
    MomSolverTm(const std::vector<Contour>& contours, const Wavenumber& w,
                int segments_per_wavelength = 20);

    /// Scattered E3 at each receiver for one transmitter.
    Eigen::VectorXcd scattered(const Point& tx, const std::vector<Point>& rx) const;

    /// Induced surface current for one transmitter.
    Eigen::VectorXcd currents(const Point& tx) const;

    int segments() const { return static_cast<int>(mid_.size()); }
    double condition_estimate() const { return condition_; }

private:
    Wavenumber w_;
    std::vector<Point> start_, end_, mid_;
    std::vector<double> length_;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
    double condition_ = 0.0;
};

/// Single-contour convenience wrapper around MomSolverTm. `segments` is the
/// total number of boundary segments; at least 10 per wavelength.
Eigen::VectorXcd scatter_mom_tm(const Contour& target, const Point& tx,
                                const std::vector<Point>& rx, const Wavenumber& w, int segments);

/// Which forward engine produced a data set (boundary methods only).
enum class ForwardEngine { CircleSeries, MomTm };

struct SynthOptions {
    int series_terms = 0;              // 0: automatic
    int mom_segments_per_wavelength = 20;
};

struct SynthResult {
    MeasurementSet data;
    ForwardEngine engine = ForwardEngine::CircleSeries;
};

/// Synthetic scattered-field data for a scene. Masked (dead-zone) entries are
/// zero. With `snr_db`, complex white Gaussian noise is added on the active
/// entries and scaled so that 10 log10(|Y|^2 / |U|^2) equals snr_db exactly.
SynthResult synth_dataset(const Scene& scene, const TransceiverLayout& layout,
                          const PolarizationMode& mode, const Wavenumber& w,
                          std::optional<double> snr_db, std::uint64_t seed,
                          const SynthOptions& options = {});

/// Add scaled complex Gaussian noise to the active entries of `data`.
void add_noise(MeasurementSet& data, double snr_db, std::uint64_t seed);

/// Named reference scenes: "sim1" (two circles) and "sim2" (crescent).
Scene reference_scene(const std::string& name);

} // namespace pecmmv
