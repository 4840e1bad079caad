#include "pecmmv/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace pecmmv {

namespace {

int checked_cells(double extent, double dx, const char* axis) {
    const double ratio = extent / dx;
    const double cells = std::round(ratio);
    if (cells < 1.0 || std::abs(ratio - cells) * dx > 1e-6 * dx) {
        std::ostringstream msg;
        msg << "grid extent along " << axis << " (" << extent << " m) is not a multiple of dx ("
            << dx << " m)";
        throw std::invalid_argument(msg.str());
    }
    return static_cast<int>(cells);
}

double wrap_angle(double a) {
    a = std::fmod(a, 2.0 * kPi);
    if (a < 0.0) a += 2.0 * kPi;
    return a;
}

} // namespace

ImagingGrid build_grid(double x_min, double x_max, double y_min, double y_max, double dx) {
    if (!(x_max > x_min) || !(y_max > y_min)) {
        throw std::invalid_argument("grid bounds must satisfy x_max > x_min and y_max > y_min");
    }
    if (!(dx > 0.0)) throw std::invalid_argument("grid spacing dx must be positive");
    ImagingGrid g;
    g.x_min = x_min;
    g.x_max = x_max;
    g.y_min = y_min;
    g.y_max = y_max;
    g.dx = dx;
    g.nx = checked_cells(x_max - x_min, dx, "x");
    g.ny = checked_cells(y_max - y_min, dx, "y");
    return g;
}

std::string to_string(const PolarizationMode& mode) {
    if (mode.pol == Polarization::TM) return "TM";
    return mode.te_channels == TeChannels::Full ? "TE" : "TE-tangential";
}

PolarizationMode polarization_from_string(const std::string& text) {
    if (text == "TM") return PolarizationMode::tm();
    if (text == "TE") return PolarizationMode::te();
    if (text == "TE-tangential") return PolarizationMode::te(TeChannels::Tangential);
    throw std::invalid_argument("unknown polarization '" + text + "'");
}

double angular_distance(double a, double b) {
    const double d = wrap_angle(a - b);
    return std::min(d, 2.0 * kPi - d);
}

int TransceiverLayout::num_cv() const {
    return static_cast<int>(
        std::count(rx_role.begin(), rx_role.end(), ReceiverRole::CrossValidation));
}

std::vector<int> TransceiverLayout::reconstruction_indices() const {
    std::vector<int> out;
    for (int q = 0; q < num_rx(); ++q)
        if (rx_role[q] == ReceiverRole::Reconstruction) out.push_back(q);
    return out;
}

std::vector<int> TransceiverLayout::cv_indices() const {
    std::vector<int> out;
    for (int q = 0; q < num_rx(); ++q)
        if (rx_role[q] == ReceiverRole::CrossValidation) out.push_back(q);
    return out;
}

void TransceiverLayout::validate() const {
    if (tx.empty() || rx.empty()) throw std::invalid_argument("layout needs at least one tx and one rx");
    if (rx_role.size() != rx.size()) throw std::invalid_argument("rx_role size does not match rx count");
    if (active.rows() != num_rx() || active.cols() != num_tx())
        throw std::invalid_argument("active mask must be Q x P");
    for (int p = 0; p < num_tx(); ++p) {
        if (!active.col(p).any()) {
            std::ostringstream msg;
            msg << "transmitter " << p << " has no active receiver";
            throw std::invalid_argument(msg.str());
        }
    }
}

TransceiverLayout build_circular_layout(const CircularLayoutSpec& spec) {
    if (!(spec.radius_tx > 0.0) || !(spec.radius_rx > 0.0))
        throw std::invalid_argument("orbit radii must be positive");
    if (spec.num_tx < 1) throw std::invalid_argument("need at least one transmitter");
    if (!(spec.dead_zone >= 0.0) || !(spec.dead_zone < kPi))
        throw std::invalid_argument("dead zone must lie in [0, 180) degrees");
    if (!(spec.rx_step > 0.0)) throw std::invalid_argument("receiver step must be positive");
    const double turns = 2.0 * kPi / spec.rx_step;
    const int num_rx = static_cast<int>(std::round(turns));
    if (num_rx < 1 || std::abs(turns - num_rx) > 1e-9 * turns)
        throw std::invalid_argument("receiver step must divide 360 degrees");

    TransceiverLayout layout;
    std::vector<double> tx_angle(spec.num_tx);
    std::vector<double> rx_angle(num_rx);
    for (int p = 0; p < spec.num_tx; ++p) {
        tx_angle[p] = spec.tx_offset + 2.0 * kPi * p / spec.num_tx;
        layout.tx.emplace_back(spec.radius_tx * std::cos(tx_angle[p]),
                               spec.radius_tx * std::sin(tx_angle[p]));
    }
    for (int q = 0; q < num_rx; ++q) {
        rx_angle[q] = spec.rx_offset + spec.rx_step * q;
        layout.rx.emplace_back(spec.radius_rx * std::cos(rx_angle[q]),
                               spec.radius_rx * std::sin(rx_angle[q]));
    }
    layout.rx_role.assign(num_rx, ReceiverRole::Reconstruction);
    layout.active.resize(num_rx, spec.num_tx);
    // The tolerance keeps receivers sitting exactly on the dead-zone edge.
    const double tol = 1e-9;
    for (int p = 0; p < spec.num_tx; ++p)
        for (int q = 0; q < num_rx; ++q)
            layout.active(q, p) = angular_distance(rx_angle[q], tx_angle[p]) >= spec.dead_zone - tol;
    layout.validate();
    return layout;
}

int receivers_per_arc(double arc_len, double radius, double rx_step) {
    if (!(arc_len > 0.0)) throw std::invalid_argument("CV arc length must be positive");
    const double spacing = radius * rx_step;
    return std::max(1, static_cast<int>(std::ceil(arc_len / spacing - 1e-9)));
}

TransceiverLayout split_cv(const TransceiverLayout& layout, double cv_fraction, double arc_len,
                           double offset) {
    if (!(cv_fraction > 0.0) || !(cv_fraction < 0.5))
        throw std::invalid_argument("cv_fraction must lie in (0, 0.5)");
    if (!(arc_len > 0.0)) throw std::invalid_argument("CV arc length must be positive");
    const int num_rx = layout.num_rx();
    if (num_rx < 2) throw std::invalid_argument("need at least two receivers to split");

    // Receivers in angular order around the origin.
    std::vector<int> order(num_rx);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> angle(num_rx);
    for (int q = 0; q < num_rx; ++q) angle[q] = wrap_angle(std::atan2(layout.rx[q].y(), layout.rx[q].x()));
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return angle[a] < angle[b]; });

    // Mean receiver spacing along the ring.
    double spacing = 0.0;
    for (int i = 0; i < num_rx; ++i) {
        const Point& a = layout.rx[order[i]];
        const Point& b = layout.rx[order[(i + 1) % num_rx]];
        spacing += (b - a).norm();
    }
    spacing /= num_rx;
    const int per_arc = std::max(1, static_cast<int>(std::ceil(arc_len / spacing - 1e-9)));
    if (per_arc >= num_rx) throw std::invalid_argument("CV arc is longer than the receiver arc");

    const int num_arcs =
        std::max(1, static_cast<int>(std::lround(cv_fraction * num_rx / per_arc)));
    if (num_arcs * per_arc >= num_rx)
        throw std::invalid_argument("CV arcs would cover every receiver");

    // First receiver at or after the requested offset.
    const double start_angle = wrap_angle(offset);
    int first = 0;
    while (first < num_rx && angle[order[first]] < start_angle - 1e-12) ++first;
    if (first == num_rx) first = 0;

    TransceiverLayout out = layout;
    out.rx_role.assign(num_rx, ReceiverRole::Reconstruction);
    for (int a = 0; a < num_arcs; ++a) {
        const int arc_start = first + static_cast<int>(std::floor(static_cast<double>(a) * num_rx / num_arcs));
        for (int i = 0; i < per_arc; ++i)
            out.rx_role[order[(arc_start + i) % num_rx]] = ReceiverRole::CrossValidation;
    }
    return out;
}

} // namespace pecmmv
