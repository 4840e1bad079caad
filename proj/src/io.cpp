#include "pecmmv/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "pecmmv/errors.hpp"
#include "pecmmv/fields.hpp"

namespace pecmmv {

std::string format_real(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

bool parse_real(const std::string& text, double& out) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (first != last && *first == '+') ++first;
    const auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

template <typename Int>
bool parse_int(const std::string& text, Int& out) {
    const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

/// Reads lines and keeps the line number for diagnostics.
class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    std::vector<std::string> next(const char* expecting) {
        std::string line;
        if (!std::getline(in_, line)) fail(line_ + 1, std::string("unexpected end of file, expected ") + expecting);
        ++line_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return split_ws(line);
    }
    [[noreturn]] void fail(int line, const std::string& what) const {
        std::ostringstream msg;
        msg << "line " << line << ": " << what;
        throw DataError(msg.str());
    }
    [[noreturn]] void fail(const std::string& what) const { fail(line_, what); }
    int line() const { return line_; }

    double real(const std::string& tok) const {
        double v = 0;
        if (!parse_real(tok, v) || !std::isfinite(v)) fail("malformed number '" + tok + "'");
        return v;
    }
    long long integer(const std::string& tok) const {
        long long v = 0;
        if (!parse_int(tok, v)) fail("malformed integer '" + tok + "'");
        return v;
    }
    std::vector<std::string> keyed(const char* key, std::size_t fields) {
        auto toks = next(key);
        if (toks.empty() || toks[0] != key) fail(std::string("expected '") + key + "'");
        if (toks.size() != fields + 1) fail(std::string("wrong number of fields after '") + key + "'");
        return toks;
    }

private:
    std::istream& in_;
    int line_ = 0;
};

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return in;
}

} // namespace

void write_dataset(std::ostream& out, const MeasurementSet& data) {
    validate(data);
    const TransceiverLayout& l = data.layout;
    out << "pecmmv-dataset " << kDatasetVersion << '\n';
    out << "frequency " << format_real(data.frequency) << '\n';
    out << "polarization " << to_string(data.mode) << '\n';
    out << "noise " << (data.noise.snr_db ? format_real(*data.noise.snr_db) : std::string("none")) << ' '
        << data.noise.seed << '\n';
    out << "tx " << l.num_tx() << '\n';
    for (const Point& p : l.tx) out << format_real(p.x()) << ' ' << format_real(p.y()) << '\n';
    out << "rx " << l.num_rx() << '\n';
    for (int q = 0; q < l.num_rx(); ++q)
        out << format_real(l.rx[q].x()) << ' ' << format_real(l.rx[q].y()) << ' '
            << (l.rx_role[q] == ReceiverRole::CrossValidation ? "CV" : "R") << '\n';
    out << "active\n";
    for (int q = 0; q < l.num_rx(); ++q) {
        for (int p = 0; p < l.num_tx(); ++p) out << (l.active(q, p) ? '1' : '0');
        out << '\n';
    }
    const int c = data.rows_per_receiver();
    out << "data " << data.y.size() << '\n';
    for (int p = 0; p < data.y.cols(); ++p)
        for (int q = 0; q < l.num_rx(); ++q)
            for (int k = 0; k < c; ++k) {
                const cd v = data.y(c * q + k, p);
                out << p << ' ' << q << ' ' << k << ' ' << format_real(v.real()) << ' ' << format_real(v.imag())
                    << ' ' << (data.mask(c * q + k, p) ? 1 : 0) << '\n';
            }
}

MeasurementSet read_dataset(std::istream& in) {
    LineReader r(in);
    MeasurementSet d;
    {
        auto t = r.next("header");
        if (t.size() != 2 || t[0] != "pecmmv-dataset") r.fail("not a pecmmv dataset");
        if (r.integer(t[1]) != kDatasetVersion) r.fail("unsupported dataset version " + t[1]);
    }
    d.frequency = r.real(r.keyed("frequency", 1)[1]);
    if (!(d.frequency > 0)) r.fail("frequency must be positive");
    {
        auto t = r.keyed("polarization", 1);
        try {
            d.mode = polarization_from_string(t[1]);
        } catch (const std::invalid_argument& e) {
            r.fail(e.what());
        }
    }
    {
        auto t = r.keyed("noise", 2);
        if (t[1] != "none") d.noise.snr_db = r.real(t[1]);
        if (!parse_int(t[2], d.noise.seed)) r.fail("malformed seed '" + t[2] + "'");
    }
    const long long p_count = r.integer(r.keyed("tx", 1)[1]);
    if (p_count < 1) r.fail("need at least one transmitter");
    for (long long p = 0; p < p_count; ++p) {
        auto t = r.next("transmitter coordinates");
        if (t.size() != 2) r.fail("expected '<x> <y>'");
        d.layout.tx.emplace_back(r.real(t[0]), r.real(t[1]));
    }
    const long long q_count = r.integer(r.keyed("rx", 1)[1]);
    if (q_count < 1) r.fail("need at least one receiver");
    for (long long q = 0; q < q_count; ++q) {
        auto t = r.next("receiver coordinates");
        if (t.size() != 3) r.fail("expected '<x> <y> <R|CV>'");
        d.layout.rx.emplace_back(r.real(t[0]), r.real(t[1]));
        if (t[2] == "R") d.layout.rx_role.push_back(ReceiverRole::Reconstruction);
        else if (t[2] == "CV") d.layout.rx_role.push_back(ReceiverRole::CrossValidation);
        else r.fail("receiver role must be R or CV");
    }
    r.keyed("active", 0);
    d.layout.active.resize(q_count, p_count);
    for (long long q = 0; q < q_count; ++q) {
        auto t = r.next("active-mask row");
        if (t.size() != 1 || static_cast<long long>(t[0].size()) != p_count) r.fail("active-mask row has wrong length");
        for (long long p = 0; p < p_count; ++p) {
            if (t[0][p] != '0' && t[0][p] != '1') r.fail("active-mask entries must be 0 or 1");
            d.layout.active(q, p) = t[0][p] == '1';
        }
    }
    const int c = d.mode.channels_per_receiver();
    d.y = Eigen::MatrixXcd::Zero(c * q_count, p_count);
    d.mask = MaskMatrix::Constant(c * q_count, p_count, false);
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> seen = MaskMatrix::Constant(c * q_count, p_count, false);
    const long long count = r.integer(r.keyed("data", 1)[1]);
    if (count < 0 || count > c * q_count * p_count) r.fail("invalid data row count");
    for (long long i = 0; i < count; ++i) {
        auto t = r.next("data row");
        if (t.size() != 6) r.fail("data row needs 6 fields");
        const long long p = r.integer(t[0]), q = r.integer(t[1]), k = r.integer(t[2]);
        if (p < 0 || p >= p_count || q < 0 || q >= q_count || k < 0 || k >= c) r.fail("index out of range");
        const long long row = c * q + k;
        if (seen(row, p)) r.fail("duplicate entry for (tx, rx, component)");
        seen(row, p) = true;
        d.y(row, p) = cd(r.real(t[3]), r.real(t[4]));
        if (t[5] != "0" && t[5] != "1") r.fail("mask flag must be 0 or 1");
        d.mask(row, p) = t[5] == "1";
    }
    std::string rest;
    while (std::getline(in, rest)) {
        if (!split_ws(rest).empty()) r.fail(r.line() + 1, "trailing content after data block");
    }
    try {
        d.layout.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("invalid layout: ") + e.what());
    }
    validate(d);
    return d;
}

void save_dataset(const std::string& path, const MeasurementSet& data) {
    auto out = open_out(path);
    write_dataset(out, data);
    if (!out) throw DataError("failed writing '" + path + "'");
}

MeasurementSet load_dataset(const std::string& path) {
    auto in = open_in(path);
    try {
        return read_dataset(in);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

FresnelColumns parse_column_map(const std::string& text) {
    std::vector<int> idx;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        int v = -1;
        if (!parse_int(tok, v) || v < 0) throw UsageError("column map entries must be non-negative integers");
        idx.push_back(v);
    }
    if (idx.size() != 7) throw UsageError("column map needs 7 indices: tx,rx,freq,re_tot,im_tot,re_inc,im_inc");
    if (std::set<int>(idx.begin(), idx.end()).size() != idx.size()) throw UsageError("column map indices must differ");
    return {idx[0], idx[1], idx[2], idx[3], idx[4], idx[5], idx[6]};
}

namespace {

// Angles in degrees snapped to 1e-6 deg to merge round-off duplicates.
long long angle_key(double deg) {
    double a = std::fmod(deg, 360.0);
    if (a < 0) a += 360.0;
    long long key = std::llround(a * 1e6);
    return key % 360000000LL;
}

} // namespace

FresnelImport import_fresnel(std::istream& in, const FresnelOptions& o) {
    if (!(o.frequency > 0)) throw UsageError("import needs a positive frequency");
    if (o.tx_stride < 1) throw UsageError("tx_stride must be >= 1");
    if (o.mode.pol == Polarization::TE && o.mode.te_channels != TeChannels::Tangential)
        throw UsageError("measured TE data carries one component; use TE-tangential");
    const FresnelColumns& c = o.columns;
    const int need = std::max({c.tx_angle, c.rx_angle, c.frequency, c.re_total, c.im_total, c.re_incident, c.im_incident}) + 1;

    struct Sample {
        long long tx, rx;
        cd value;
        bool flagged;
        int line;
    };
    FresnelImport result;
    std::vector<Sample> samples;
    std::set<double> freqs;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto toks = split_ws(line);
        if (static_cast<int>(toks.size()) < need) {
            ++result.rows_skipped;
            continue;
        }
        double v[7];
        const int cols[7] = {c.tx_angle, c.rx_angle, c.frequency, c.re_total, c.im_total, c.re_incident, c.im_incident};
        bool numeric = true;
        for (int i = 0; i < 7 && numeric; ++i) numeric = parse_real(toks[cols[i]], v[i]) && std::isfinite(v[i]);
        if (!numeric) {
            ++result.rows_skipped;
            continue;
        }
        const double f = v[2] * o.frequency_unit;
        freqs.insert(f);
        if (std::abs(f - o.frequency) > 1e-6 * o.frequency) continue;
        const double rx_abs = o.rx_relative ? v[0] + v[1] : v[1];
        const cd total(v[3], v[4]), incident(v[5], v[6]);
        Sample s{angle_key(v[0]), angle_key(rx_abs), total - incident, false, line_no};
        if (total == cd(0.0) && incident == cd(0.0)) {
            s.flagged = true;
            ++result.flagged;
        }
        if (o.conjugate) s.value = std::conj(s.value);
        samples.push_back(s);
    }
    if (samples.empty()) {
        std::ostringstream msg;
        msg << "frequency " << o.frequency << " Hz not present (" << freqs.size() << " distinct frequencies found)";
        throw DataError(msg.str());
    }

    std::set<long long> tx_all;
    for (const Sample& s : samples) tx_all.insert(s.tx);
    std::vector<long long> tx_sorted(tx_all.begin(), tx_all.end());
    if (tx_sorted.size() > 1) {
        const long long step = tx_sorted[1] - tx_sorted[0];
        for (std::size_t i = 1; i < tx_sorted.size(); ++i)
            if (std::llabs(tx_sorted[i] - tx_sorted[i - 1] - step) > 10)
                throw DataError("transmitter angles are not equally spaced");
    }
    std::vector<long long> tx_keep;
    for (std::size_t i = 0; i < tx_sorted.size(); i += static_cast<std::size_t>(o.tx_stride)) tx_keep.push_back(tx_sorted[i]);

    std::set<long long> rx_all;
    std::map<long long, int> per_tx;
    for (const Sample& s : samples) {
        if (!std::binary_search(tx_keep.begin(), tx_keep.end(), s.tx)) continue;
        rx_all.insert(s.rx);
        ++per_tx[s.tx];
    }
    const int first_count = per_tx.begin()->second;
    for (const auto& [tx, n] : per_tx)
        if (n != first_count) throw DataError("transmitters have different receiver counts; angular grid is inconsistent");
    std::vector<long long> rx_sorted(rx_all.begin(), rx_all.end());

    MeasurementSet& d = result.data;
    d.frequency = o.frequency;
    d.mode = o.mode;
    auto pos = [](double radius, long long key) {
        const double a = deg_to_rad(static_cast<double>(key) * 1e-6);
        return Point(radius * std::cos(a), radius * std::sin(a));
    };
    for (long long t : tx_keep) d.layout.tx.push_back(pos(o.radius_tx, t));
    for (long long r : rx_sorted) d.layout.rx.push_back(pos(o.radius_rx, r));
    d.layout.rx_role.assign(rx_sorted.size(), ReceiverRole::Reconstruction);
    const auto p_count = static_cast<Eigen::Index>(tx_keep.size());
    const auto q_count = static_cast<Eigen::Index>(rx_sorted.size());
    d.layout.active = MaskMatrix::Constant(q_count, p_count, false);
    d.y = Eigen::MatrixXcd::Zero(q_count, p_count);
    d.mask = MaskMatrix::Constant(q_count, p_count, false);
    for (const Sample& s : samples) {
        const auto pt = std::lower_bound(tx_keep.begin(), tx_keep.end(), s.tx);
        if (pt == tx_keep.end() || *pt != s.tx) continue;
        const auto p = pt - tx_keep.begin();
        const auto q = std::lower_bound(rx_sorted.begin(), rx_sorted.end(), s.rx) - rx_sorted.begin();
        if (d.layout.active(q, p)) {
            std::ostringstream msg;
            msg << "line " << s.line << ": duplicate (tx, rx) sample";
            throw DataError(msg.str());
        }
        d.layout.active(q, p) = true;
        d.y(q, p) = s.flagged ? cd(0.0) : s.value;
        d.mask(q, p) = !s.flagged;
        ++result.rows_used;
    }
    try {
        d.layout.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("imported layout invalid: ") + e.what());
    }
    validate(d);
    return result;
}

FresnelImport import_fresnel(const std::string& path, const FresnelOptions& options) {
    auto in = open_in(path);
    return import_fresnel(in, options);
}

void write_raster(std::ostream& out, const IndicatorMap& map) {
    const ImagingGrid& g = map.grid;
    if (map.values.size() != g.size()) throw std::invalid_argument("raster size does not match grid");
    out << "pecmmv-raster " << kRasterVersion << ' ' << g.nx << ' ' << g.ny << ' ' << format_real(g.x_min) << ' '
        << format_real(g.x_max) << ' ' << format_real(g.y_min) << ' ' << format_real(g.y_max) << ' '
        << format_real(g.dx) << ' ' << to_string(map.kind) << ' ' << (map.in_db ? "db" : "linear") << ' '
        << format_real(map.db_floor) << '\n';
    for (int r = 0; r < g.ny; ++r) {
        for (int col = 0; col < g.nx; ++col) {
            if (col) out << ' ';
            out << format_real(map.values(g.index(r, col)));
        }
        out << '\n';
    }
}

IndicatorMap read_raster(std::istream& in) {
    LineReader r(in);
    auto h = r.next("raster header");
    if (h.size() != 12 || h[0] != "pecmmv-raster") r.fail("not a pecmmv raster");
    if (r.integer(h[1]) != kRasterVersion) r.fail("unsupported raster version " + h[1]);
    IndicatorMap map;
    ImagingGrid& g = map.grid;
    g.nx = static_cast<int>(r.integer(h[2]));
    g.ny = static_cast<int>(r.integer(h[3]));
    g.x_min = r.real(h[4]);
    g.x_max = r.real(h[5]);
    g.y_min = r.real(h[6]);
    g.y_max = r.real(h[7]);
    g.dx = r.real(h[8]);
    if (g.nx < 1 || g.ny < 1 || !(g.dx > 0)) r.fail("invalid raster grid");
    try {
        map.kind = indicator_kind_from_string(h[9]);
    } catch (const std::invalid_argument& e) {
        r.fail(e.what());
    }
    if (h[10] != "db" && h[10] != "linear") r.fail("scale must be 'db' or 'linear'");
    map.in_db = h[10] == "db";
    map.db_floor = r.real(h[11]);
    map.values.resize(g.size());
    for (int row = 0; row < g.ny; ++row) {
        auto t = r.next("raster row");
        if (static_cast<int>(t.size()) != g.nx) r.fail("raster row has wrong length");
        for (int col = 0; col < g.nx; ++col) map.values(g.index(row, col)) = r.real(t[col]);
    }
    return map;
}

void save_raster(const std::string& path, const IndicatorMap& map) {
    auto out = open_out(path);
    write_raster(out, map);
}

IndicatorMap load_raster(const std::string& path) {
    auto in = open_in(path);
    try {
        return read_raster(in);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

void save_pgm(const std::string& path, const IndicatorMap& map, double lo_db, double hi_db) {
    if (!(lo_db < hi_db)) throw UsageError("display range needs lo < hi");
    const IndicatorMap db = db_scale(map, std::min(-60.0, lo_db));
    const ImagingGrid& g = map.grid;
    auto out = open_out(path);
    out << "P2\n" << g.nx << ' ' << g.ny << "\n255\n";
    for (int r = g.ny - 1; r >= 0; --r) {
        for (int col = 0; col < g.nx; ++col) {
            const double t = std::clamp((db.values(g.index(r, col)) - lo_db) / (hi_db - lo_db), 0.0, 1.0);
            if (col) out << ' ';
            out << static_cast<int>(std::lround(255.0 * t));
        }
        out << '\n';
    }
}

void write_trace(std::ostream& out, const SolveTrace& trace) {
    out << "iteration tau r_rec r_cv gap step backtracks\n";
    for (const IterationRecord& rec : trace.records)
        out << rec.iteration << ' ' << format_real(rec.tau) << ' ' << format_real(rec.r_rec) << ' '
            << (std::isnan(rec.r_cv) ? std::string("nan") : format_real(rec.r_cv)) << ' ' << format_real(rec.gap)
            << ' ' << format_real(rec.step) << ' ' << rec.backtracks << '\n';
}

void save_trace(const std::string& path, const SolveTrace& trace) {
    auto out = open_out(path);
    write_trace(out, trace);
}

Config::Config(std::vector<std::pair<std::string, std::string>> defaults) {
    for (auto& [k, v] : defaults) {
        if (values_.count(k)) throw std::invalid_argument("duplicate config key " + k);
        order_.push_back(k);
        values_[k] = v;
    }
}

void Config::set(const std::string& key, const std::string& value) {
    const auto it = values_.find(key);
    if (it == values_.end()) throw UsageError("unknown configuration key '" + key + "'");
    it->second = value;
}

void Config::load(std::istream& in, const std::string& source) {
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError(source + ":" + std::to_string(n) + ": expected 'key = value'");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        try {
            set(key, trim(line.substr(eq + 1)));
        } catch (const UsageError& e) {
            throw UsageError(source + ":" + std::to_string(n) + ": " + e.what());
        }
    }
}

void Config::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    load(in, path);
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

const std::string& Config::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw std::logic_error("config key not declared: " + key);
    return it->second;
}

double Config::get_double(const std::string& key) const {
    double v = 0;
    if (!parse_real(get(key), v) || !std::isfinite(v)) throw UsageError("'" + key + "' must be a number, got '" + get(key) + "'");
    return v;
}

int Config::get_int(const std::string& key) const {
    int v = 0;
    if (!parse_int(get(key), v)) throw UsageError("'" + key + "' must be an integer, got '" + get(key) + "'");
    return v;
}

std::uint64_t Config::get_uint64(const std::string& key) const {
    std::uint64_t v = 0;
    if (!parse_int(get(key), v)) throw UsageError("'" + key + "' must be a non-negative integer, got '" + get(key) + "'");
    return v;
}

bool Config::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw UsageError("'" + key + "' must be true or false, got '" + v + "'");
}

void Config::dump(std::ostream& out) const {
    for (const auto& k : order_) out << k << " = " << values_.at(k) << '\n';
}

} // namespace pecmmv
