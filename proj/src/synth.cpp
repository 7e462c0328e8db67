#include "flowclass/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "flowclass/errors.hpp"
#include "flowclass/rng.hpp"

namespace flowclass {

namespace {

constexpr double kSecondsPerDay = 86400.0;
constexpr double kMinLength = 42.0;
constexpr double kMaxLength = 1514.0;

MacAddress gateway_mac() {
    return *MacAddress::parse("02:ff:ff:ff:ff:fe");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct RawPacket {
    double t = 0;
    bool control = false;
};

// Two-state burst modulator walked in candidate-time order. Multipliers are
// balanced so the stationary mean rate equals the configured base rate.
class BurstModulator {
public:
    BurstModulator(const CategoryArchetype& a, Rng& rng)
        : rng_(rng),
          active_mean_(a.burst_active_secs),
          idle_mean_(a.burst_idle_secs),
          active_mult_(a.burstiness) {
        const double p_active = active_mean_ / (active_mean_ + idle_mean_);
        idle_mult_ = active_mult_ <= 1.0
                         ? 1.0
                         : (1.0 - p_active * active_mult_) / (1.0 - p_active);
        active_ = rng_.bernoulli(p_active);
        end_ = rng_.exponential(1.0 / (active_ ? active_mean_ : idle_mean_));
    }

    double multiplier_at(double t) {
        while (t >= end_) {
            active_ = !active_;
            end_ += rng_.exponential(1.0 / (active_ ? active_mean_ : idle_mean_));
        }
        return active_ ? active_mult_ : idle_mult_;
    }

    double max_multiplier() const { return std::max(active_mult_, idle_mult_); }

private:
    Rng& rng_;
    double active_mean_, idle_mean_;
    double active_mult_, idle_mult_ = 1.0;
    bool active_ = false;
    double end_ = 0;
};

double diurnal_factor(double amplitude, double t) {
    return 1.0 + amplitude * std::sin(2.0 * M_PI * t / kSecondsPerDay);
}

// Thinned Poisson arrivals for one modulated process.
std::vector<double> sample_arrivals(double rate_per_sec, double amplitude,
                                    BurstModulator* bursts, double duration, Rng& rng) {
    std::vector<double> times;
    if (rate_per_sec <= 0) return times;
    const double envelope =
        rate_per_sec * (1.0 + amplitude) * (bursts ? bursts->max_multiplier() : 1.0);
    double t = 0;
    while (true) {
        t += rng.exponential(envelope);
        if (t >= duration) break;
        double rate = rate_per_sec * diurnal_factor(amplitude, t);
        if (bursts) rate *= bursts->multiplier_at(t);
        if (rng.uniform01() < rate / envelope) times.push_back(t);
    }
    return times;
}

double sample_length(const std::vector<LengthComponent>& mix, Rng& rng) {
    double pick = rng.uniform01();
    const LengthComponent* chosen = &mix.back();
    for (const auto& component : mix) {
        if (pick < component.weight) {
            chosen = &component;
            break;
        }
        pick -= component.weight;
    }
    const double raw = rng.normal(chosen->mean, chosen->stddev);
    return std::round(std::clamp(raw, kMinLength, kMaxLength));
}

std::string sample_protocol(const std::vector<std::pair<std::string, double>>& mix,
                            const ControlProtocolSet& control, bool want_control, Rng& rng) {
    double total = 0;
    for (const auto& [label, weight] : mix)
        if (control.contains(label) == want_control) total += weight;
    if (total <= 0) return want_control ? "DNS" : "TCP";
    double pick = rng.uniform01() * total;
    for (const auto& [label, weight] : mix) {
        if (control.contains(label) != want_control) continue;
        if (pick < weight) return label;
        pick -= weight;
    }
    return want_control ? "DNS" : "TCP";
}

} // namespace

CategoryArchetype jittered_archetype(const CategoryArchetype& base, std::uint64_t jitter_seed) {
    Rng rng(jitter_seed);
    CategoryArchetype out = base;
    out.user_rate_per_min = std::max(0.0, base.user_rate_per_min * rng.uniform(0.8, 1.2));
    out.control_rate_per_min = std::max(0.0, base.control_rate_per_min * rng.uniform(0.8, 1.2));
    out.burstiness = 1.0 + std::max(0.0, (base.burstiness - 1.0) * rng.uniform(0.8, 1.2));
    for (auto& component : out.length_mix)
        component.mean = std::max(kMinLength, component.mean * rng.uniform(0.8, 1.2));
    return out;
}

void CategoryArchetype::validate() const {
    if (name.empty()) throw ParamError("archetype: empty name");
    if (user_rate_per_min < 0 || control_rate_per_min < 0)
        throw ParamError("archetype '" + name + "': rates must be non-negative");
    if (burstiness < 1.0)
        throw ParamError("archetype '" + name + "': burstiness must be >= 1");
    if (burst_active_secs <= 0 || burst_idle_secs <= 0)
        throw ParamError("archetype '" + name + "': burst holding times must be positive");
    const double p_active = burst_active_secs / (burst_active_secs + burst_idle_secs);
    if (p_active * burstiness * 1.2 >= 1.0)
        throw ParamError("archetype '" + name +
                         "': burst duty cycle too high for the configured burstiness");
    if (diurnal_amplitude < 0 || diurnal_amplitude > 1)
        throw ParamError("archetype '" + name + "': diurnal amplitude must lie in [0,1]");
    if (!(tx_fraction >= 0 && tx_fraction <= 1))
        throw ParamError("archetype '" + name + "': tx_fraction must lie in [0,1]");
    if (length_mix.empty())
        throw ParamError("archetype '" + name + "': length mixture is empty");
    double weight_sum = 0;
    for (const auto& component : length_mix) {
        if (component.weight < 0 || component.stddev < 0)
            throw ParamError("archetype '" + name + "': bad length component");
        weight_sum += component.weight;
    }
    if (std::abs(weight_sum - 1.0) > 1e-9)
        throw ParamError("archetype '" + name + "': length mixture weights must sum to 1");
    if (protocol_mix.empty())
        throw ParamError("archetype '" + name + "': protocol mix is empty");
    for (const auto& [label, weight] : protocol_mix)
        if (label.empty() || weight < 0)
            throw ParamError("archetype '" + name + "': bad protocol mix entry");
}

const CategoryArchetype& Scenario::archetype(const std::string& name) const {
    for (const auto& a : archetypes)
        if (a.name == name) return a;
    throw ParamError("scenario: unknown archetype '" + name + "'");
}

DeviceTable Scenario::device_table() const {
    std::vector<DeviceEntry> entries;
    for (const auto& device : devices)
        entries.push_back({device.mac, device.category_id, device.device_name});
    return DeviceTable(std::move(entries));
}

void Scenario::validate() const {
    if (devices.empty()) throw ParamError("scenario: no devices");
    for (const auto& a : archetypes) a.validate();
    for (const auto& device : devices) {
        archetype(device.archetype);
        if (device.category_id < 1)
            throw ParamError("scenario: device " + device.mac.to_string() +
                             " has bad category id");
    }
}

GeneratedCapture generate_capture(const Scenario& scenario, double duration_secs,
                                  std::uint64_t seed) {
    if (!(duration_secs > 0)) throw ParamError("generate_capture: duration must be positive");
    scenario.validate();

    const ControlProtocolSet control;
    const MacAddress gateway = gateway_mac();

    GeneratedCapture out;
    out.devices = scenario.device_table();

    for (std::size_t index = 0; index < scenario.devices.size(); ++index) {
        const SyntheticDeviceSpec& spec = scenario.devices[index];
        const CategoryArchetype params =
            jittered_archetype(scenario.archetype(spec.archetype), spec.jitter_seed);
        Rng rng(mix_seed(seed, index));

        BurstModulator bursts(params, rng);
        const std::vector<double> user_times = sample_arrivals(
            params.user_rate_per_min / 60.0, params.diurnal_amplitude, &bursts, duration_secs,
            rng);
        const std::vector<double> control_times =
            sample_arrivals(params.control_rate_per_min / 60.0, params.diurnal_amplitude,
                            nullptr, duration_secs, rng);

        std::vector<RawPacket> merged;
        merged.reserve(user_times.size() + control_times.size());
        std::size_t ui = 0, ci = 0;
        while (ui < user_times.size() || ci < control_times.size()) {
            const bool take_user =
                ci == control_times.size() ||
                (ui < user_times.size() && user_times[ui] <= control_times[ci]);
            if (take_user)
                merged.push_back({user_times[ui++], false});
            else
                merged.push_back({control_times[ci++], true});
        }

        for (const RawPacket& raw : merged) {
            PacketRecord record;
            record.timestamp = raw.t;
            const bool transmitted = rng.bernoulli(params.tx_fraction);
            record.eth_src = transmitted ? spec.mac : gateway;
            record.eth_dst = transmitted ? gateway : spec.mac;
            record.protocol = sample_protocol(params.protocol_mix, control, raw.control, rng);
            record.length = static_cast<std::uint64_t>(sample_length(params.length_mix, rng));
            out.capture.records.push_back(std::move(record));
        }
    }

    std::stable_sort(out.capture.records.begin(), out.capture.records.end(),
                     [](const PacketRecord& a, const PacketRecord& b) {
                         return a.timestamp < b.timestamp;
                     });
    return out;
}

// ---------------------------------------------------------------------------
// Built-in scenarios
// ---------------------------------------------------------------------------

namespace {

CategoryArchetype hubs_archetype() {
    CategoryArchetype a;
    a.name = "Hubs";
    a.user_rate_per_min = 2.5;
    a.burstiness = 3.0;
    a.burst_active_secs = 180;
    a.burst_idle_secs = 1200;
    a.control_rate_per_min = 1.0;
    a.diurnal_amplitude = 0.15;
    a.length_mix = {{320, 50, 0.75}, {140, 25, 0.25}};
    a.protocol_mix = {{"TCP", 0.60}, {"UDP", 0.10}, {"HTTP", 0.05},
                      {"DNS", 0.15}, {"NTP", 0.06}, {"ARP", 0.04}};
    a.tx_fraction = 0.55;
    return a;
}

CategoryArchetype electronics_archetype() {
    CategoryArchetype a;
    a.name = "Electronics";
    a.user_rate_per_min = 0.6;
    a.burstiness = 1.8;
    a.burst_active_secs = 120;
    a.burst_idle_secs = 900;
    a.control_rate_per_min = 0.3;
    a.diurnal_amplitude = 0.5;
    a.length_mix = {{540, 80, 0.6}, {210, 45, 0.4}};
    a.protocol_mix = {{"TCP", 0.50}, {"HTTP", 0.15}, {"UDP", 0.12},
                      {"DNS", 0.12}, {"NTP", 0.06},  {"ARP", 0.05}};
    a.tx_fraction = 0.45;
    return a;
}

CategoryArchetype cameras_archetype() {
    CategoryArchetype a;
    a.name = "Cameras";
    a.user_rate_per_min = 4.0;
    a.burstiness = 6.0;
    a.burst_active_secs = 60;
    a.burst_idle_secs = 600;
    a.control_rate_per_min = 1.2;
    a.diurnal_amplitude = 0.35;
    a.length_mix = {{1050, 140, 0.7}, {430, 90, 0.3}};
    a.protocol_mix = {{"TCP", 0.68}, {"UDP", 0.20}, {"DNS", 0.06},
                      {"NTP", 0.03}, {"ICMP", 0.03}};
    a.tx_fraction = 0.7;
    return a;
}

CategoryArchetype switches_archetype() {
    CategoryArchetype a;
    a.name = "SwitchesTriggers";
    a.user_rate_per_min = 0.5;
    a.burstiness = 10.0;
    a.burst_active_secs = 30;
    a.burst_idle_secs = 1500;
    a.control_rate_per_min = 0.35;
    a.diurnal_amplitude = 0.1;
    a.length_mix = {{130, 25, 0.8}, {420, 80, 0.2}};
    a.protocol_mix = {{"TCP", 0.40}, {"UDP", 0.30}, {"DNS", 0.17},
                      {"ARP", 0.08}, {"NTP", 0.05}};
    a.tx_fraction = 0.4;
    return a;
}

MacAddress device_mac(int category, int index) {
    std::array<std::uint8_t, 6> bytes = {0x02, 0x00, 0x00, 0x00,
                                         static_cast<std::uint8_t>(category),
                                         static_cast<std::uint8_t>(index)};
    return MacAddress(bytes);
}

void add_devices(Scenario& scenario, int category, const std::string& archetype,
                 const std::string& stem, int count) {
    for (int i = 1; i <= count; ++i) {
        SyntheticDeviceSpec spec;
        spec.mac = device_mac(category, i);
        spec.category_id = category;
        spec.archetype = archetype;
        spec.jitter_seed = static_cast<std::uint64_t>(category * 100 + i);
        spec.device_name = stem + "-" + std::to_string(i);
        scenario.devices.push_back(std::move(spec));
    }
}

} // namespace

Scenario default_scenario() {
    Scenario scenario;
    scenario.categories = {{1, "Hubs"}, {2, "Electronics"}, {3, "Cameras"},
                           {4, "SwitchesTriggers"}};
    scenario.archetypes = {hubs_archetype(), electronics_archetype(), cameras_archetype(),
                           switches_archetype()};
    add_devices(scenario, 1, "Hubs", "hub", 2);
    add_devices(scenario, 2, "Electronics", "elec", 3);
    add_devices(scenario, 3, "Cameras", "cam", 6);
    add_devices(scenario, 4, "SwitchesTriggers", "switch", 4);
    return scenario;
}

Scenario binary_scenario() {
    Scenario scenario;
    scenario.categories = {{1, "Cameras"}, {2, "SwitchesTriggers"}};
    scenario.archetypes = {cameras_archetype(), switches_archetype()};
    add_devices(scenario, 1, "Cameras", "cam", 6);
    add_devices(scenario, 2, "SwitchesTriggers", "switch", 4);
    return scenario;
}

// ---------------------------------------------------------------------------
// Scenario files
// ---------------------------------------------------------------------------

void write_scenario(const Scenario& scenario, std::ostream& out) {
    out << "# flowclass scenario\n";
    for (const auto& category : scenario.categories)
        out << "category " << category.id << ' ' << category.name << '\n';
    for (const auto& a : scenario.archetypes) {
        out << "archetype " << a.name << '\n';
        out << "  user_rate_per_min " << format_double(a.user_rate_per_min) << '\n';
        out << "  burstiness " << format_double(a.burstiness) << '\n';
        out << "  burst_active_secs " << format_double(a.burst_active_secs) << '\n';
        out << "  burst_idle_secs " << format_double(a.burst_idle_secs) << '\n';
        out << "  control_rate_per_min " << format_double(a.control_rate_per_min) << '\n';
        out << "  diurnal_amplitude " << format_double(a.diurnal_amplitude) << '\n';
        out << "  tx_fraction " << format_double(a.tx_fraction) << '\n';
        for (const auto& component : a.length_mix)
            out << "  length " << format_double(component.mean) << ' '
                << format_double(component.stddev) << ' ' << format_double(component.weight)
                << '\n';
        for (const auto& [label, weight] : a.protocol_mix)
            out << "  protocol " << label << ' ' << format_double(weight) << '\n';
        out << "end\n";
    }
    for (const auto& device : scenario.devices)
        out << "device " << device.mac.to_string() << ' ' << device.category_id << ' '
            << device.archetype << ' ' << device.jitter_seed << ' ' << device.device_name
            << '\n';
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write scenario file: " + path.string());
    write_scenario(scenario, out);
    if (!out) throw IoError("failed while writing scenario file: " + path.string());
}

Scenario parse_scenario(std::istream& in) {
    Scenario scenario;
    CategoryArchetype* current = nullptr;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream row(line);
        std::string keyword;
        if (!(row >> keyword) || keyword[0] == '#') continue;
        const auto fail = [&](const std::string& what) {
            throw FormatError("scenario line " + std::to_string(line_no) + ": " + what);
        };
        if (keyword == "category") {
            DeviceCategory category;
            if (!(row >> category.id >> category.name)) fail("expected 'category <id> <name>'");
            scenario.categories.push_back(std::move(category));
        } else if (keyword == "archetype") {
            CategoryArchetype a;
            if (!(row >> a.name)) fail("expected 'archetype <name>'");
            a.length_mix.clear();
            a.protocol_mix.clear();
            scenario.archetypes.push_back(std::move(a));
            current = &scenario.archetypes.back();
        } else if (keyword == "end") {
            current = nullptr;
        } else if (keyword == "device") {
            SyntheticDeviceSpec device;
            std::string mac_text;
            if (!(row >> mac_text >> device.category_id >> device.archetype >>
                  device.jitter_seed))
                fail("expected 'device <mac> <category> <archetype> <seed> <name>'");
            const auto mac = MacAddress::parse(mac_text);
            if (!mac) fail("bad MAC '" + mac_text + "'");
            device.mac = *mac;
            row >> device.device_name;
            scenario.devices.push_back(std::move(device));
        } else if (current) {
            auto& a = *current;
            bool ok = true;
            if (keyword == "user_rate_per_min") ok = bool(row >> a.user_rate_per_min);
            else if (keyword == "burstiness") ok = bool(row >> a.burstiness);
            else if (keyword == "burst_active_secs") ok = bool(row >> a.burst_active_secs);
            else if (keyword == "burst_idle_secs") ok = bool(row >> a.burst_idle_secs);
            else if (keyword == "control_rate_per_min") ok = bool(row >> a.control_rate_per_min);
            else if (keyword == "diurnal_amplitude") ok = bool(row >> a.diurnal_amplitude);
            else if (keyword == "tx_fraction") ok = bool(row >> a.tx_fraction);
            else if (keyword == "length") {
                LengthComponent component;
                ok = bool(row >> component.mean >> component.stddev >> component.weight);
                if (ok) a.length_mix.push_back(component);
            } else if (keyword == "protocol") {
                std::string label;
                double weight = 0;
                ok = bool(row >> label >> weight);
                if (ok) a.protocol_mix.emplace_back(label, weight);
            } else {
                fail("unknown archetype key '" + keyword + "'");
            }
            if (!ok) fail("bad value for '" + keyword + "'");
        } else {
            fail("unknown keyword '" + keyword + "'");
        }
    }
    scenario.validate();
    return scenario;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario file: " + path.string());
    return parse_scenario(in);
}

} // namespace flowclass
