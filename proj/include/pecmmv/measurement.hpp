#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Core>

#include "pecmmv/geometry.hpp"

namespace pecmmv {

using MaskMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct NoiseRecord {
    std::optional<double> snr_db; // none for noiseless data
    std::uint64_t seed = 0;
};

/// Scattered-field measurements Y (channels * Q rows, P columns).
///
/// `mask(r, p)` is false for entries that carry no data (dead zone, missing
/// samples); those entries of Y are zero and excluded from every norm.
struct MeasurementSet {
    Eigen::MatrixXcd y;
    MaskMatrix mask;
    PolarizationMode mode;
    double frequency = 0.0; // Hz
    TransceiverLayout layout;
    NoiseRecord noise;

    /// Additive noise realization, kept in memory only when synthesized.
    Eigen::MatrixXcd noise_realization;

    int rows_per_receiver() const { return mode.channels_per_receiver(); }
};

/// Row mask implied by the layout's per-transmitter active receivers.
MaskMatrix layout_row_mask(const TransceiverLayout& layout, const PolarizationMode& mode);

/// Row indices of Y / Phi belonging to the given receivers.
std::vector<int> receiver_rows(const std::vector<int>& receivers, int rows_per_receiver);

/// Throws DataError when shapes disagree with the layout or entries are not finite.
void validate(const MeasurementSet& m);

} // namespace pecmmv
