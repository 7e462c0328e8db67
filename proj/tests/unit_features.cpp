#include <doctest.h>

#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

#include "flowclass/errors.hpp"
#include "flowclass/features.hpp"
#include "flowclass/rng.hpp"
#include "oracles.hpp"

using namespace flowclass;

namespace {

MacAddress mac(const char* text) { return *MacAddress::parse(text); }

const MacAddress kDevice = mac("aa:bb:cc:dd:ee:ff");
const MacAddress kGateway = mac("11:22:33:44:55:66");

PacketRecord packet(double t, std::uint64_t len, const char* proto, bool transmitted) {
    PacketRecord r;
    r.timestamp = t;
    r.length = len;
    r.protocol = proto;
    r.eth_src = transmitted ? kDevice : kGateway;
    r.eth_dst = transmitted ? kGateway : kDevice;
    return r;
}

DeviceStream stream_of(std::vector<double> timestamps) {
    DeviceStream stream;
    stream.device_mac = kDevice;
    for (double t : timestamps) stream.records.push_back(packet(t, 100, "TCP", true));
    return stream;
}

double feature(const FeatureVector& v, const std::string& name) {
    return v.values[v.schema->index_of(name)];
}

} // namespace

TEST_SUITE("features") {

TEST_CASE("segment_stream honors half-open boundaries") {
    const auto segments = segment_stream(stream_of({0, 100, 299, 300}), 300);
    REQUIRE(segments.size() == 2);
    CHECK(segments[0].interval_index == 0);
    CHECK(segments[0].records.size() == 3);
    CHECK(segments[1].interval_index == 1);
    CHECK(segments[1].records.size() == 1);
    CHECK(segments[1].records[0].timestamp == 300);
}

TEST_CASE("segment_stream edge cases") {
    CHECK(segment_stream(DeviceStream{kDevice, {}}, 300).empty());
    CHECK_THROWS_AS(segment_stream(stream_of({1}), 0), ParamError);
    CHECK_THROWS_AS(segment_stream(stream_of({1}), -5), ParamError);

    // empty intervals between the first and last non-empty segment materialize
    const auto segments = segment_stream(stream_of({150, 1050}), 100);
    REQUIRE(segments.size() == 10);
    CHECK(segments.front().interval_index == 1);
    CHECK(segments.back().interval_index == 10);
    for (std::size_t i = 1; i + 1 < segments.size(); ++i) CHECK(segments[i].records.empty());
}

TEST_CASE("segmentation is a partition matching the floor oracle") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const double interval = rng.uniform(0.5, 900.0);
        std::vector<double> times;
        double t = rng.uniform(0, 100);
        for (int i = 0; i < 10000 / 20; ++i) {
            times.push_back(t);
            t += rng.exponential(0.05);
        }
        const DeviceStream stream = stream_of(times);
        const auto segments = segment_stream(stream, interval);

        std::size_t total = 0;
        std::vector<PacketRecord> glued;
        for (const auto& segment : segments) {
            for (const auto& record : segment.records) {
                const auto oracle_idx =
                    static_cast<std::int64_t>(std::floor(record.timestamp / interval));
                CHECK(oracle_idx == segment.interval_index);
                glued.push_back(record);
            }
            total += segment.records.size();
        }
        CHECK(total == stream.records.size());   // each record in exactly one segment
        CHECK(glued == stream.records);          // concatenation reproduces the stream
    }
}

TEST_CASE("empty segment yields the all-zero vector") {
    Segment segment;
    segment.device_mac = kDevice;
    const FeatureVector v = extract_features(segment, kDevice);
    CHECK(v.values.size() == full_schema()->size());
    CHECK(v.values.size() == 52);
    for (double x : v.values) CHECK(x == 0.0);
}

TEST_CASE("single user packet populates counts and degenerate moments") {
    Segment segment;
    segment.device_mac = kDevice;
    segment.records.push_back(packet(10, 100, "TCP", true));
    const FeatureVector v = extract_features(segment, kDevice);
    CHECK(feature(v, "total_packets") == 1);
    CHECK(feature(v, "user_packets") == 1);
    CHECK(feature(v, "control_packets") == 0);
    CHECK(feature(v, "transmitted_packets") == 1);
    CHECK(feature(v, "received_packets") == 0);
    CHECK(feature(v, "tcp_count") == 1);
    CHECK(feature(v, "user_len_mean") == 100);
    CHECK(feature(v, "user_len_max") == 100);
    CHECK(feature(v, "user_len_min") == 100);
    CHECK(feature(v, "user_len_sum") == 100);
    CHECK(feature(v, "user_len_std") == 0);
    CHECK(feature(v, "user_len_var") == 0);
    CHECK(feature(v, "user_len_skew") == 0);
    CHECK(feature(v, "user_len_kurt") == 0);
}

TEST_CASE("random segments match the two-pass moment oracle") {
    Rng rng(17);
    const char* protos[] = {"TCP", "UDP", "HTTP", "DNS", "ARP", "NTP", "ICMP", "TLSv1.2"};
    const ControlProtocolSet control;
    const auto& stats = std::vector<std::string>{"max", "min",  "mean", "sum",
                                                 "std", "var", "skew", "kurt"};

    for (int trial = 0; trial < 50; ++trial) {
        Segment segment;
        segment.device_mac = kDevice;
        const std::size_t n = rng.uniform_index(50) + 1;
        for (std::size_t i = 0; i < n; ++i)
            segment.records.push_back(packet(rng.uniform(0, 300),
                                             42 + rng.uniform_index(1472),
                                             protos[rng.uniform_index(8)],
                                             rng.bernoulli(0.5)));
        const FeatureVector v = extract_features(segment, kDevice);

        // oracle populations
        std::vector<double> all, user, ctrl, rx, tx;
        std::map<std::string, double> proto_counts;
        for (const auto& record : segment.records) {
            const double len = static_cast<double>(record.length);
            all.push_back(len);
            const bool is_control = control.contains(record.protocol);
            (is_control ? ctrl : user).push_back(len);
            const bool transmitted = record.eth_src == kDevice;
            (transmitted ? tx : rx).push_back(len);
            proto_counts[canonical_protocol(record.protocol)] += 1;
        }
        CHECK(feature(v, "total_packets") == static_cast<double>(all.size()));
        CHECK(feature(v, "user_packets") == static_cast<double>(user.size()));
        CHECK(feature(v, "control_packets") == static_cast<double>(ctrl.size()));
        CHECK(feature(v, "received_packets") == static_cast<double>(rx.size()));
        CHECK(feature(v, "transmitted_packets") == static_cast<double>(tx.size()));
        for (const char* proto : {"TCP", "UDP", "HTTP", "DNS", "ARP", "NTP", "ICMP"}) {
            std::string lower;
            for (const char* p = proto; *p; ++p)
                lower.push_back(static_cast<char>(std::tolower(*p)));
            CHECK(feature(v, lower + "_count") == proto_counts[proto]);
        }

        const std::pair<const char*, std::vector<double>*> pops[] = {
            {"all", &all}, {"user", &user}, {"control", &ctrl},
            {"received", &rx}, {"transmitted", &tx}};
        for (const auto& [pop, values] : pops) {
            const oracle::Moments m = oracle::moments(*values);
            const double expected[] = {m.max, m.min,     m.mean,     m.sum,
                                       m.std_dev, m.variance, m.skewness, m.kurtosis};
            for (std::size_t s = 0; s < stats.size(); ++s) {
                const double got = feature(v, std::string(pop) + "_len_" + stats[s]);
                CHECK_MESSAGE(oracle::close(got, expected[s], 1e-9, 1e-12),
                              pop << "_len_" << stats[s] << ": " << got << " vs "
                                  << expected[s]);
            }
        }
    }
}

TEST_CASE("moment identities hold") {
    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        Segment segment;
        segment.device_mac = kDevice;
        const std::size_t n = rng.uniform_index(40) + 2;
        for (std::size_t i = 0; i < n; ++i)
            segment.records.push_back(packet(i, 42 + rng.uniform_index(1400), "TCP",
                                             rng.bernoulli(0.5)));
        const FeatureVector v = extract_features(segment, kDevice);
        const double count = feature(v, "total_packets");
        CHECK(feature(v, "all_len_var") ==
              doctest::Approx(feature(v, "all_len_std") * feature(v, "all_len_std")));
        CHECK(feature(v, "all_len_min") <= feature(v, "all_len_mean"));
        CHECK(feature(v, "all_len_mean") <= feature(v, "all_len_max"));
        CHECK(feature(v, "all_len_sum") ==
              doctest::Approx(feature(v, "all_len_mean") * count));
    }
}

TEST_CASE("skewness of a symmetric sample is zero") {
    const double m = 400, a = 120, b = 310;
    Segment segment;
    segment.device_mac = kDevice;
    for (double len : {a, b, 2 * m - b, 2 * m - a})
        segment.records.push_back(packet(1, static_cast<std::uint64_t>(len), "TCP", true));
    const FeatureVector v = extract_features(segment, kDevice);
    CHECK(std::abs(feature(v, "all_len_skew")) < 1e-9);
}

TEST_CASE("select_schema resolves the six spelled-out names") {
    Segment segment;
    segment.device_mac = kDevice;
    segment.records.push_back(packet(0, 100, "TCP", true));
    segment.records.push_back(packet(1, 300, "TCP", true));
    segment.records.push_back(packet(2, 60, "DNS", false));
    const FeatureVector full = extract_features(segment, kDevice);

    const std::vector<std::string> spelled = {
        "user packet number",         "user packet length average", "user packet length peak",
        "control packet number",      "control packet average",     "control packet peak"};
    const FeatureVector six = select_schema(full, spelled);
    REQUIRE(six.values.size() == 6);
    CHECK(six.values[0] == 2);    // user packets
    CHECK(six.values[1] == 200);  // user mean
    CHECK(six.values[2] == 300);  // user peak
    CHECK(six.values[3] == 1);    // control packets
    CHECK(six.values[4] == 60);   // control mean
    CHECK(six.values[5] == 60);   // control peak
    CHECK(six.schema->names() == default_six_features());

    CHECK(select_schema(full, {}).values.empty());
    const FeatureVector identity = select_schema(full, full.schema->names());
    CHECK(identity.values == full.values);
    CHECK_THROWS_AS(select_schema(full, {"no_such_feature"}), SchemaError);
    CHECK_THROWS_WITH_AS(select_schema(full, {"bogus"}), doctest::Contains("bogus"),
                         SchemaError);
}

TEST_CASE("min-max normalization and its inverse") {
    auto fv = [](std::vector<double> values) {
        FeatureVector v;
        v.values = std::move(values);
        return v;
    };
    const std::vector<FeatureVector> data = {fv({0, 7}), fv({5, 7}), fv({10, 7})};
    const auto [scaled, params] = normalize(data);
    CHECK(scaled[0].values[0] == 0.0);
    CHECK(scaled[1].values[0] == 0.5);
    CHECK(scaled[2].values[0] == 1.0);
    for (const auto& v : scaled) CHECK(v.values[1] == 0.0);  // constant column maps to 0

    // stored parameters reapply verbatim; out-of-range values stay unclamped
    const FeatureVector outside = apply_scale(params, fv({20, 9}));
    CHECK(outside.values[0] == 2.0);
    CHECK(outside.values[1] == 0.0);  // constant on train -> 0 everywhere

    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const FeatureVector original = fv({rng.uniform(-3, 13), rng.uniform(0, 1)});
        const FeatureVector recovered = invert_scale(params, apply_scale(params, original));
        CHECK(std::abs(recovered.values[0] - original.values[0]) < 1e-12);
    }
    CHECK_THROWS_AS(normalize({}), ParamError);
}

TEST_CASE("make_windows split points and remainder discard") {
    std::vector<FeatureVector> sequence(12);
    for (auto& v : sequence) v.values = {1.0};

    const auto windows = make_windows(sequence, 2, kDevice, 6, 3, 100);
    REQUIRE(windows.size() == 3);
    CHECK(windows[0].start_interval == 100);
    CHECK(windows[1].start_interval == 103);
    CHECK(windows[2].start_interval == 106);
    for (const auto& w : windows) {
        CHECK(w.features.size() == 6);
        CHECK(w.label == 2);
        CHECK(w.device_mac == kDevice);
    }

    CHECK(make_windows(std::vector<FeatureVector>(5), 1, kDevice, 6, 3).empty());
    CHECK(make_windows(std::vector<FeatureVector>(100), 1, kDevice, 8, 0).size() == 12);
    CHECK_THROWS_AS(make_windows(sequence, 1, kDevice, 6, 6), ParamError);
    CHECK_THROWS_AS(make_windows(sequence, 1, kDevice, 6, 7), ParamError);
}

TEST_CASE("window count matches the closed form") {
    Rng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t window = 2 + rng.uniform_index(9);
        const std::size_t overlap = rng.uniform_index(window);
        const std::size_t n = rng.uniform_index(60);
        const auto windows =
            make_windows(std::vector<FeatureVector>(n), 1, kDevice, window, overlap);
        const std::size_t expected =
            n < window ? 0 : (n - window) / (window - overlap) + 1;
        CHECK(windows.size() == expected);
    }
}

TEST_CASE("dataset file round trip is exact") {
    Rng rng(31);
    const auto schema = std::make_shared<const FeatureSchema>(default_six_features());
    std::vector<WindowedSample> samples;
    for (int i = 0; i < 25; ++i) {
        WindowedSample sample;
        sample.device_mac = kDevice;
        sample.label = 1 + static_cast<int>(rng.uniform_index(4));
        sample.start_interval = i;
        for (int k = 0; k < 6; ++k) {
            FeatureVector v;
            v.schema = schema;
            for (int j = 0; j < 6; ++j) v.values.push_back(rng.uniform(-10, 2000));
            sample.features.push_back(std::move(v));
        }
        samples.push_back(std::move(sample));
    }
    std::ostringstream out;
    write_dataset(samples, out);
    std::istringstream in(out.str());
    const auto loaded = read_dataset(in);
    REQUIRE(loaded.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(loaded[i].device_mac == samples[i].device_mac);
        CHECK(loaded[i].label == samples[i].label);
        REQUIRE(loaded[i].features.size() == samples[i].features.size());
        for (std::size_t k = 0; k < samples[i].features.size(); ++k)
            CHECK(loaded[i].features[k].values == samples[i].features[k].values);
    }
    CHECK(loaded.front().features.front().schema->names() == default_six_features());
}

} // TEST_SUITE

