#include "flowclass/features.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "flowclass/errors.hpp"
#include "flowclass/ingest.hpp"

namespace flowclass {

namespace {

const std::vector<std::string>& counted_protocols() {
    static const std::vector<std::string> protocols = {"TCP", "UDP", "HTTP", "DNS",
                                                       "ARP", "NTP", "ICMP"};
    return protocols;
}

const std::vector<std::string>& population_names() {
    static const std::vector<std::string> populations = {"all", "user", "control", "received",
                                                         "transmitted"};
    return populations;
}

const std::vector<std::string>& stat_names() {
    static const std::vector<std::string> stats = {"max", "min", "mean", "sum",
                                                   "std", "var",  "skew", "kurt"};
    return stats;
}

std::string lower_words(std::string_view name) {
    std::string out;
    out.reserve(name.size());
    for (char c : name) {
        if (c == ' ' || c == '-' || c == '.') c = '_';
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    // collapse repeated underscores and trim them from both ends
    std::string collapsed;
    for (char c : out) {
        if (c == '_' && (collapsed.empty() || collapsed.back() == '_')) continue;
        collapsed.push_back(c);
    }
    while (!collapsed.empty() && collapsed.back() == '_') collapsed.pop_back();
    return collapsed;
}

// Spread moments of one population of packet lengths. Population (biased)
// definitions; all-zero when fewer than two values or when the variance
// vanishes, keeping every feature finite.
struct LengthStats {
    double max = 0, min = 0, mean = 0, sum = 0;
    double std_dev = 0, variance = 0, skewness = 0, kurtosis = 0;
};

LengthStats length_stats(const std::vector<double>& lengths) {
    LengthStats s;
    const std::size_t n = lengths.size();
    if (n == 0) return s;
    s.max = *std::max_element(lengths.begin(), lengths.end());
    s.min = *std::min_element(lengths.begin(), lengths.end());
    for (double v : lengths) s.sum += v;
    s.mean = s.sum / static_cast<double>(n);
    double m2 = 0, m3 = 0, m4 = 0;
    for (double v : lengths) {
        const double d = v - s.mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);
    s.variance = m2;
    s.std_dev = std::sqrt(m2);
    if (m2 > 0) {
        s.skewness = m3 / (m2 * s.std_dev);
        s.kurtosis = m4 / (m2 * m2);
    }
    return s;
}

std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

FeatureSchema::FeatureSchema(std::vector<std::string> names) : names_(std::move(names)) {}

std::size_t FeatureSchema::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return i;
    throw SchemaError("unknown feature name '" + std::string(name) + "'");
}

SchemaPtr full_schema() {
    static const SchemaPtr schema = [] {
        std::vector<std::string> names = {"total_packets", "user_packets", "control_packets",
                                          "received_packets", "transmitted_packets"};
        for (const auto& proto : counted_protocols()) {
            std::string lower;
            for (char c : proto)
                lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
            names.push_back(lower + "_count");
        }
        for (const auto& pop : population_names())
            for (const auto& stat : stat_names()) names.push_back(pop + "_len_" + stat);
        return std::make_shared<const FeatureSchema>(std::move(names));
    }();
    return schema;
}

std::vector<std::string> default_six_features() {
    return {"user_packets",    "user_len_mean",    "user_len_max",
            "control_packets", "control_len_mean", "control_len_max"};
}

std::string resolve_feature_name(std::string_view name) {
    static const std::map<std::string, std::string> aliases = {
        {"user_packet_number", "user_packets"},
        {"user_packet_count", "user_packets"},
        {"user_packet_length_average", "user_len_mean"},
        {"user_packet_average", "user_len_mean"},
        {"user_packet_length_peak", "user_len_max"},
        {"user_packet_peak", "user_len_max"},
        {"control_packet_number", "control_packets"},
        {"control_packet_count", "control_packets"},
        {"control_packet_length_average", "control_len_mean"},
        {"control_packet_average", "control_len_mean"},
        {"control_packet_length_peak", "control_len_max"},
        {"control_packet_peak", "control_len_max"},
        {"total_packet_number", "total_packets"},
        {"received_packet_number", "received_packets"},
        {"transmitted_packet_number", "transmitted_packets"},
    };
    const std::string key = lower_words(name);
    if (const auto it = aliases.find(key); it != aliases.end()) return it->second;
    const auto& names = full_schema()->names();
    if (std::find(names.begin(), names.end(), key) != names.end()) return key;
    throw SchemaError("unknown feature name '" + std::string(name) + "'");
}

std::vector<Segment> segment_stream(const DeviceStream& stream, double interval_secs) {
    if (!(interval_secs > 0))
        throw ParamError("segment_stream: interval must be positive, got " +
                         std::to_string(interval_secs));
    std::vector<Segment> segments;
    if (stream.records.empty()) return segments;

    std::int64_t lo = 0, hi = 0;
    bool first = true;
    for (const auto& record : stream.records) {
        const auto idx = static_cast<std::int64_t>(std::floor(record.timestamp / interval_secs));
        lo = first ? idx : std::min(lo, idx);
        hi = first ? idx : std::max(hi, idx);
        first = false;
    }
    segments.resize(static_cast<std::size_t>(hi - lo + 1));
    for (std::int64_t i = lo; i <= hi; ++i) {
        auto& seg = segments[static_cast<std::size_t>(i - lo)];
        seg.device_mac = stream.device_mac;
        seg.interval_index = i;
    }
    for (const auto& record : stream.records) {
        const auto idx = static_cast<std::int64_t>(std::floor(record.timestamp / interval_secs));
        segments[static_cast<std::size_t>(idx - lo)].records.push_back(record);
    }
    return segments;
}

FeatureVector extract_features(const Segment& segment, const MacAddress& device_mac,
                               const ControlProtocolSet& control) {
    const auto& protocols = counted_protocols();
    std::vector<double> proto_counts(protocols.size(), 0.0);
    double user = 0, ctrl = 0, received = 0, transmitted = 0;

    // 0 all, 1 user, 2 control, 3 received, 4 transmitted
    std::array<std::vector<double>, 5> lengths;
    for (auto& v : lengths) v.reserve(segment.records.size());

    for (const auto& record : segment.records) {
        const PacketClass cls = classify_packet(record, device_mac, control);
        const auto len = static_cast<double>(record.length);
        lengths[0].push_back(len);
        if (cls.kind == PacketKind::User) {
            ++user;
            lengths[1].push_back(len);
        } else {
            ++ctrl;
            lengths[2].push_back(len);
        }
        if (cls.direction == Direction::Received) {
            ++received;
            lengths[3].push_back(len);
        } else {
            ++transmitted;
            lengths[4].push_back(len);
        }
        const std::string proto = canonical_protocol(record.protocol);
        for (std::size_t i = 0; i < protocols.size(); ++i)
            if (proto == protocols[i]) ++proto_counts[i];
    }

    FeatureVector out;
    out.schema = full_schema();
    out.values.reserve(out.schema->size());
    out.values.push_back(static_cast<double>(segment.records.size()));
    out.values.push_back(user);
    out.values.push_back(ctrl);
    out.values.push_back(received);
    out.values.push_back(transmitted);
    for (double c : proto_counts) out.values.push_back(c);
    for (const auto& pop : lengths) {
        const LengthStats s = length_stats(pop);
        out.values.push_back(s.max);
        out.values.push_back(s.min);
        out.values.push_back(s.mean);
        out.values.push_back(s.sum);
        out.values.push_back(s.std_dev);
        out.values.push_back(s.variance);
        out.values.push_back(s.skewness);
        out.values.push_back(s.kurtosis);
    }
    return out;
}

FeatureVector select_schema(const FeatureVector& full, const std::vector<std::string>& names) {
    if (!full.schema) throw SchemaError("select_schema: input vector has no schema");
    FeatureVector out;
    std::vector<std::string> resolved;
    resolved.reserve(names.size());
    out.values.reserve(names.size());
    for (const auto& name : names) {
        const std::string canonical = resolve_feature_name(name);
        out.values.push_back(full.values[full.schema->index_of(canonical)]);
        resolved.push_back(canonical);
    }
    out.schema = std::make_shared<const FeatureSchema>(std::move(resolved));
    return out;
}

bool operator==(const ScaleParams& a, const ScaleParams& b) {
    const bool schemas_match =
        a.schema == b.schema ||
        (a.schema && b.schema && a.schema->names() == b.schema->names());
    return schemas_match && a.offset == b.offset && a.range == b.range;
}

ScaleParams fit_minmax(const std::vector<FeatureVector>& training) {
    if (training.empty()) throw ParamError("fit_minmax: empty training set");
    const std::size_t width = training.front().values.size();
    ScaleParams params;
    params.schema = training.front().schema;
    params.offset.assign(width, 0.0);
    params.range.assign(width, 0.0);
    std::vector<double> maxima(width, 0.0);
    for (std::size_t j = 0; j < width; ++j) {
        params.offset[j] = training.front().values[j];
        maxima[j] = training.front().values[j];
    }
    for (const auto& v : training) {
        if (v.values.size() != width)
            throw ShapeError("fit_minmax: inconsistent feature vector width");
        for (std::size_t j = 0; j < width; ++j) {
            params.offset[j] = std::min(params.offset[j], v.values[j]);
            maxima[j] = std::max(maxima[j], v.values[j]);
        }
    }
    for (std::size_t j = 0; j < width; ++j) {
        const double range = maxima[j] - params.offset[j];
        params.range[j] = range > 0 ? range : 0.0;  // 0 marks a constant column
    }
    return params;
}

FeatureVector apply_scale(const ScaleParams& params, const FeatureVector& v) {
    if (v.values.size() != params.offset.size())
        throw ShapeError("apply_scale: vector width " + std::to_string(v.values.size()) +
                         " != parameter width " + std::to_string(params.offset.size()));
    FeatureVector out;
    out.schema = v.schema;
    out.values.resize(v.values.size());
    for (std::size_t j = 0; j < v.values.size(); ++j)
        out.values[j] =
            params.range[j] == 0 ? 0.0 : (v.values[j] - params.offset[j]) / params.range[j];
    return out;
}

WindowedSample apply_scale(const ScaleParams& params, const WindowedSample& sample) {
    WindowedSample out = sample;
    for (auto& v : out.features) v = apply_scale(params, v);
    return out;
}

FeatureVector invert_scale(const ScaleParams& params, const FeatureVector& v) {
    if (v.values.size() != params.offset.size())
        throw ShapeError("invert_scale: vector width mismatch");
    FeatureVector out;
    out.schema = v.schema;
    out.values.resize(v.values.size());
    for (std::size_t j = 0; j < v.values.size(); ++j)
        out.values[j] = params.range[j] == 0 ? params.offset[j]
                                             : v.values[j] * params.range[j] + params.offset[j];
    return out;
}

std::pair<std::vector<FeatureVector>, ScaleParams> normalize(
    const std::vector<FeatureVector>& dataset) {
    const ScaleParams params = fit_minmax(dataset);
    std::vector<FeatureVector> scaled;
    scaled.reserve(dataset.size());
    for (const auto& v : dataset) scaled.push_back(apply_scale(params, v));
    return {std::move(scaled), params};
}

std::vector<WindowedSample> make_windows(const std::vector<FeatureVector>& sequence, int label,
                                         const MacAddress& device_mac, std::size_t window,
                                         std::size_t overlap, std::int64_t first_interval) {
    if (window == 0) throw ParamError("make_windows: window size must be positive");
    if (overlap >= window)
        throw ParamError("make_windows: overlap " + std::to_string(overlap) +
                         " must be smaller than window " + std::to_string(window));
    const std::size_t stride = window - overlap;
    std::vector<WindowedSample> samples;
    for (std::size_t start = 0; start + window <= sequence.size(); start += stride) {
        WindowedSample sample;
        sample.features.assign(sequence.begin() + static_cast<std::ptrdiff_t>(start),
                               sequence.begin() + static_cast<std::ptrdiff_t>(start + window));
        sample.label = label;
        sample.device_mac = device_mac;
        sample.start_interval = first_interval + static_cast<std::int64_t>(start);
        samples.push_back(std::move(sample));
    }
    return samples;
}

void write_dataset(const std::vector<WindowedSample>& samples, std::ostream& out) {
    if (samples.empty()) throw ParamError("write_dataset: no samples");
    const auto& first = samples.front();
    const SchemaPtr schema = first.features.front().schema;
    out << "device_mac,label";
    for (std::size_t k = 0; k < first.features.size(); ++k)
        for (const auto& name : schema->names()) out << ',' << name << '@' << k;
    out << '\n';
    for (const auto& sample : samples) {
        out << sample.device_mac.to_string() << ',' << sample.label;
        for (const auto& v : sample.features)
            for (double x : v.values) out << ',' << format_value(x);
        out << '\n';
    }
}

void write_dataset(const std::vector<WindowedSample>& samples,
                   const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write dataset file: " + path.string());
    write_dataset(samples, out);
    if (!out) throw IoError("failed while writing dataset file: " + path.string());
}

std::vector<WindowedSample> read_dataset(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("dataset file is empty");
    const std::vector<std::string> header = split_csv_row(line);
    if (header.size() < 3 || header[0] != "device_mac" || header[1] != "label")
        throw FormatError("dataset header must start with device_mac,label");

    std::vector<std::string> names;
    std::size_t window = 0;
    for (std::size_t i = 2; i < header.size(); ++i) {
        const auto at = header[i].rfind('@');
        if (at == std::string::npos)
            throw FormatError("dataset header column '" + header[i] + "' lacks @index suffix");
        std::size_t k = 0;
        const std::string suffix = header[i].substr(at + 1);
        auto [ptr, ec] = std::from_chars(suffix.data(), suffix.data() + suffix.size(), k);
        if (ec != std::errc() || ptr != suffix.data() + suffix.size())
            throw FormatError("dataset header column '" + header[i] + "' has bad window index");
        if (k == 0) names.push_back(header[i].substr(0, at));
        window = std::max(window, k + 1);
    }
    if (names.empty() || window == 0) throw FormatError("dataset header has no feature columns");
    if (header.size() != 2 + names.size() * window)
        throw FormatError("dataset header column count does not match schema x window");
    const auto schema = std::make_shared<const FeatureSchema>(names);

    std::vector<WindowedSample> samples;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        const std::vector<std::string> fields = split_csv_row(line);
        if (fields.size() != header.size())
            throw FormatError("dataset line " + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " fields, got " +
                              std::to_string(fields.size()));
        const auto mac = MacAddress::parse(fields[0]);
        if (!mac)
            throw FormatError("dataset line " + std::to_string(line_no) + ": bad MAC '" +
                              fields[0] + "'");
        WindowedSample sample;
        sample.device_mac = *mac;
        int label = 0;
        auto [p1, e1] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(),
                                        label);
        if (e1 != std::errc() || p1 != fields[1].data() + fields[1].size() || label < 1)
            throw FormatError("dataset line " + std::to_string(line_no) + ": bad label '" +
                              fields[1] + "'");
        sample.label = label;
        std::size_t col = 2;
        for (std::size_t k = 0; k < window; ++k) {
            FeatureVector v;
            v.schema = schema;
            v.values.resize(names.size());
            for (std::size_t j = 0; j < names.size(); ++j, ++col) {
                const std::string& cell = fields[col];
                const char* b = cell.data();
                const char* e = cell.data() + cell.size();
                auto [ptr, ec] = std::from_chars(b, e, v.values[j]);
                if (ec != std::errc() || ptr != e)
                    throw FormatError("dataset line " + std::to_string(line_no) +
                                      ": bad value '" + cell + "'");
            }
            sample.features.push_back(std::move(v));
        }
        samples.push_back(std::move(sample));
    }
    return samples;
}

std::vector<WindowedSample> read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file: " + path.string());
    return read_dataset(in);
}

} // namespace flowclass
