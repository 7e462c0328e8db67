#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "flowclass/traffic_model.hpp"

namespace flowclass {

// Ordered, immutable feature-name list shared by every vector of a dataset.
class FeatureSchema {
public:
    explicit FeatureSchema(std::vector<std::string> names);

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(std::size_t i) const { return names_[i]; }
    std::size_t index_of(std::string_view name) const;  // throws SchemaError

    bool operator==(const FeatureSchema& other) const { return names_ == other.names_; }

private:
    std::vector<std::string> names_;
};

using SchemaPtr = std::shared_ptr<const FeatureSchema>;

// The full per-segment schema: 12 packet/protocol counts followed by eight
// length statistics (max, min, mean, sum, std, var, skew, kurt) for each of
// the populations {all, user, control, received, transmitted}.
SchemaPtr full_schema();

// The six-feature selection used as the classifier default: user/control
// packet counts plus mean and peak user/control packet lengths.
std::vector<std::string> default_six_features();

// Maps spelled-out feature names ("user packet length peak") onto schema
// names; "peak" resolves to max and "average" to mean. Canonical names pass
// through. Throws SchemaError for anything unknown.
std::string resolve_feature_name(std::string_view name);

struct FeatureVector {
    std::vector<double> values;
    SchemaPtr schema;

    bool operator==(const FeatureVector& other) const {
        return values == other.values &&
               (schema == other.schema || (schema && other.schema && *schema == *other.schema));
    }
};

// All of one device's packets inside [iT, (i+1)T).
struct Segment {
    MacAddress device_mac;
    std::int64_t interval_index = 0;
    std::vector<PacketRecord> records;
};

// A window of `t` consecutive segment feature vectors plus the device label;
// the classifier's input unit.
struct WindowedSample {
    std::vector<FeatureVector> features;
    int label = 0;
    MacAddress device_mac;
    std::int64_t start_interval = 0;
};

// Partitions a stream into half-open intervals [iT, (i+1)T) keyed by
// floor(timestamp / T); empty intervals between the first and last non-empty
// one are materialized so indices track real time. Throws ParamError for
// interval_secs <= 0.
std::vector<Segment> segment_stream(const DeviceStream& stream, double interval_secs);

// Emits the full schema for one segment. Every statistic of an empty
// population is 0; single-element populations have zero spread moments.
FeatureVector extract_features(const Segment& segment, const MacAddress& device_mac,
                               const ControlProtocolSet& control = ControlProtocolSet());

// Projects a full vector onto the requested (resolved) names, in order.
FeatureVector select_schema(const FeatureVector& full, const std::vector<std::string>& names);

// Per-feature affine map: scaled = (value - offset) / range, with range == 0
// marking a feature constant on the training set (such features map to 0).
struct ScaleParams {
    SchemaPtr schema;
    std::vector<double> offset;
    std::vector<double> range;
};

bool operator==(const ScaleParams& a, const ScaleParams& b);

// Min-max fit over the given (training) vectors; apply reuses the stored
// parameters verbatim, so out-of-range test values land outside [0,1].
ScaleParams fit_minmax(const std::vector<FeatureVector>& training);
FeatureVector apply_scale(const ScaleParams& params, const FeatureVector& v);
WindowedSample apply_scale(const ScaleParams& params, const WindowedSample& sample);
FeatureVector invert_scale(const ScaleParams& params, const FeatureVector& v);

// Spec'd convenience: fit on the dataset and return the scaled copy plus the
// parameters for later reuse on held-out data. Throws ParamError when empty.
std::pair<std::vector<FeatureVector>, ScaleParams> normalize(
    const std::vector<FeatureVector>& dataset);

// Slices a single device's consecutive feature-vector sequence into windows
// of length `window` starting every window-overlap positions; a trailing
// remainder shorter than a full window is discarded.
// Throws ParamError unless 0 <= overlap < window.
std::vector<WindowedSample> make_windows(const std::vector<FeatureVector>& sequence, int label,
                                         const MacAddress& device_mac, std::size_t window,
                                         std::size_t overlap, std::int64_t first_interval = 0);

// Dataset file: CSV whose header is device_mac,label,<name>@0,...,<name>@{t-1}
// (window-major), one row per WindowedSample.
void write_dataset(const std::vector<WindowedSample>& samples, std::ostream& out);
void write_dataset(const std::vector<WindowedSample>& samples, const std::filesystem::path& path);
std::vector<WindowedSample> read_dataset(std::istream& in);
std::vector<WindowedSample> read_dataset(const std::filesystem::path& path);

} // namespace flowclass
