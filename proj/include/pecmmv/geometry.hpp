#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pecmmv/constants.hpp"

namespace pecmmv {

/// Uniform square-pixel grid over a rectangular inversion domain.
///
/// Pixel n = row * nx + col; row indexes y (increasing), col indexes x.
struct ImagingGrid {
    double x_min = 0.0;
    double x_max = 0.0;
    double y_min = 0.0;
    double y_max = 0.0;
    double dx = 0.0;
    int nx = 0;
    int ny = 0;

    int size() const { return nx * ny; }
    int index(int row, int col) const { return row * nx + col; }
    int row_of(int n) const { return n / nx; }
    int col_of(int n) const { return n % nx; }
    Point center(int n) const {
        return {x_min + (col_of(n) + 0.5) * dx, y_min + (row_of(n) + 0.5) * dx};
    }
    bool contains(const Point& p) const {
        return p.x() >= x_min && p.x() <= x_max && p.y() >= y_min && p.y() <= y_max;
    }
};

/// Build a grid over [x_min, x_max] x [y_min, y_max] with spacing dx. Both
/// extents must be integer multiples of dx (within 1e-6 dx).
ImagingGrid build_grid(double x_min, double x_max, double y_min, double y_max, double dx);

enum class Polarization { TM, TE };

/// How TE receivers report the field: both in-plane components, or only the
/// component tangential to the receiver orbit (single-component measurements).
enum class TeChannels { Full, Tangential };

struct PolarizationMode {
    Polarization pol = Polarization::TM;
    TeChannels te_channels = TeChannels::Full;

    static PolarizationMode tm() { return {Polarization::TM, TeChannels::Full}; }
    static PolarizationMode te(TeChannels c = TeChannels::Full) { return {Polarization::TE, c}; }

    /// Rows of Y and Phi per receiver.
    int channels_per_receiver() const {
        return (pol == Polarization::TE && te_channels == TeChannels::Full) ? 2 : 1;
    }
    /// Rows of J per pixel.
    int group_size() const { return pol == Polarization::TE ? 2 : 1; }
    bool operator==(const PolarizationMode&) const = default;
};

std::string to_string(const PolarizationMode& mode);
PolarizationMode polarization_from_string(const std::string& text);

enum class ReceiverRole { Reconstruction, CrossValidation };

/// Transmitters and receivers on circular orbits around the origin.
///
/// `active(q, p)` is true when receiver q records data for transmitter p.
struct TransceiverLayout {
    std::vector<Point> tx;
    std::vector<Point> rx;
    std::vector<ReceiverRole> rx_role;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> active;

    int num_tx() const { return static_cast<int>(tx.size()); }
    int num_rx() const { return static_cast<int>(rx.size()); }
    int num_cv() const;
    std::vector<int> reconstruction_indices() const;
    std::vector<int> cv_indices() const;

    /// Throws std::invalid_argument when sizes disagree or a transmitter has
    /// no active receiver.
    void validate() const;
};

struct CircularLayoutSpec {
    double radius_tx = 3.0;      // m
    double radius_rx = 3.0;      // m
    int num_tx = 18;
    double rx_step = deg_to_rad(5.0); // rad; must divide the full turn
    double dead_zone = deg_to_rad(30.0); // rad
    double tx_offset = 0.0;      // rad, angle of transmitter 0
    double rx_offset = 0.0;      // rad, angle of receiver 0
};

/// Equally spaced transmitters and a full ring of receivers. Receivers closer
/// than `dead_zone` (angular distance, symmetric) to a transmitter are masked
/// out for that transmitter.
TransceiverLayout build_circular_layout(const CircularLayoutSpec& spec);

/// Number of contiguous receivers covering an arc of length `arc_len` on a
/// ring of receivers with the given angular step and radius.
int receivers_per_arc(double arc_len, double radius, double rx_step);

/// Mark contiguous arcs of receivers as cross-validation receivers.
///
/// The arcs are spread evenly around the ring, starting at `offset` (rad).
/// The number of arcs is round(cv_fraction * Q / per_arc), at least one.
TransceiverLayout split_cv(const TransceiverLayout& layout, double cv_fraction, double arc_len,
                           double offset = 0.0);

/// Angular distance in [0, pi].
double angular_distance(double a, double b);

} // namespace pecmmv
