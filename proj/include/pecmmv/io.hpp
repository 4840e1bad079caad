#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "pecmmv/imaging.hpp"
#include "pecmmv/measurement.hpp"
#include "pecmmv/solver.hpp"

namespace pecmmv {

inline constexpr int kDatasetVersion = 1;
inline constexpr int kRasterVersion = 1;

// Canonical dataset, line-oriented text:
//
//   pecmmv-dataset 1
//   frequency <Hz>
//   polarization TM | TE | TE-tangential
//   noise <snr_db | none> <seed>
//   tx <P>              then P lines "<x> <y>"
//   rx <Q>              then Q lines "<x> <y> <R | CV>"
//   active              then Q lines of P characters '0' / '1'
//   data <count>        then count lines "<tx> <rx> <comp> <re> <im> <mask>"
//
// Reals are written with 17 significant digits so that a round trip is
// bit-exact. Entries absent from the body are zero and masked.
void write_dataset(std::ostream& out, const MeasurementSet& data);
MeasurementSet read_dataset(std::istream& in);
void save_dataset(const std::string& path, const MeasurementSet& data);
MeasurementSet load_dataset(const std::string& path);

/// Column positions (0-based) of the Fresnel fields in a data row.
struct FresnelColumns {
    int tx_angle = 0;
    int rx_angle = 1;
    int frequency = 2;
    int re_total = 3;
    int im_total = 4;
    int re_incident = 5;
    int im_incident = 6;
};

/// Parse "tx,rx,freq,re_tot,im_tot,re_inc,im_inc" style maps: seven
/// comma-separated 0-based indices in that order.
FresnelColumns parse_column_map(const std::string& text);

struct FresnelOptions {
    FresnelColumns columns;
    double frequency = 0.0;        // Hz, slice to extract
    double frequency_unit = 1e9;   // file frequency column unit (GHz)
    double radius_tx = 0.720;      // m
    double radius_rx = 0.760;      // m
    bool rx_relative = true;       // receiver angles measured from the transmitter
    int tx_stride = 1;             // keep every tx_stride-th transmitter
    bool conjugate = false;        // file uses the opposite time convention
    PolarizationMode mode = PolarizationMode::tm();
};

struct FresnelImport {
    MeasurementSet data;
    int rows_used = 0;
    int rows_skipped = 0; // comment / non-numeric lines
    int flagged = 0;      // zero incident and zero total field
};

FresnelImport import_fresnel(std::istream& in, const FresnelOptions& options);
FresnelImport import_fresnel(const std::string& path, const FresnelOptions& options);

// Indicator raster: one header line
//   pecmmv-raster 1 <nx> <ny> <x_min> <x_max> <y_min> <y_max> <dx> <kind> <linear | db> <floor>
// followed by ny lines of nx values, first line = lowest row (y_min).
void write_raster(std::ostream& out, const IndicatorMap& map);
IndicatorMap read_raster(std::istream& in);
void save_raster(const std::string& path, const IndicatorMap& map);
IndicatorMap load_raster(const std::string& path);

/// Plain (text) portable graymap of the dB image clipped to [lo_db, hi_db],
/// top row = largest y.
void save_pgm(const std::string& path, const IndicatorMap& map, double lo_db = -30.0, double hi_db = 0.0);

/// Delimited iteration log: iteration tau r_rec r_cv gap step backtracks.
void write_trace(std::ostream& out, const SolveTrace& trace);
void save_trace(const std::string& path, const SolveTrace& trace);

/// key = value settings with a fixed key set. Unknown keys and malformed
/// values raise UsageError.
class Config {
public:
    Config() = default;
    explicit Config(std::vector<std::pair<std::string, std::string>> defaults);

    void set(const std::string& key, const std::string& value);
    /// Lines "key = value"; '#' starts a comment.
    void load(std::istream& in, const std::string& source = "config");
    void load_file(const std::string& path);

    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;
    double get_double(const std::string& key) const;
    int get_int(const std::string& key) const;
    std::uint64_t get_uint64(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    /// All settings, "key = value" per line, in declaration order.
    void dump(std::ostream& out) const;

private:
    std::vector<std::string> order_;
    std::map<std::string, std::string> values_;
};

/// Locale-independent number formatting and parsing.
std::string format_real(double v);
bool parse_real(const std::string& text, double& out);

} // namespace pecmmv
