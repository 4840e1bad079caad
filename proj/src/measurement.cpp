#include "pecmmv/measurement.hpp"

#include <cmath>
#include <sstream>

#include "pecmmv/errors.hpp"

namespace pecmmv {

MaskMatrix layout_row_mask(const TransceiverLayout& layout, const PolarizationMode& mode) {
    const int c = mode.channels_per_receiver();
    MaskMatrix mask(c * layout.num_rx(), layout.num_tx());
    for (int p = 0; p < layout.num_tx(); ++p)
        for (int q = 0; q < layout.num_rx(); ++q)
            for (int k = 0; k < c; ++k) mask(c * q + k, p) = layout.active(q, p);
    return mask;
}

std::vector<int> receiver_rows(const std::vector<int>& receivers, int rows_per_receiver) {
    std::vector<int> rows;
    rows.reserve(receivers.size() * rows_per_receiver);
    for (int q : receivers)
        for (int k = 0; k < rows_per_receiver; ++k) rows.push_back(rows_per_receiver * q + k);
    return rows;
}

void validate(const MeasurementSet& m) {
    try {
        m.layout.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("invalid layout: ") + e.what());
    }
    const int rows = m.rows_per_receiver() * m.layout.num_rx();
    if (m.y.rows() != rows || m.y.cols() != m.layout.num_tx()) {
        std::ostringstream msg;
        msg << "measurement matrix is " << m.y.rows() << " x " << m.y.cols() << ", expected "
            << rows << " x " << m.layout.num_tx();
        throw DataError(msg.str());
    }
    if (m.mask.rows() != m.y.rows() || m.mask.cols() != m.y.cols())
        throw DataError("measurement mask shape does not match Y");
    if (!m.y.allFinite()) throw DataError("measurement matrix has non-finite entries");
    if (!(m.frequency > 0.0)) throw DataError("measurement frequency must be positive");
}

} // namespace pecmmv
