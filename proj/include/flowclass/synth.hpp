#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "flowclass/ingest.hpp"
#include "flowclass/traffic_model.hpp"

namespace flowclass {

struct LengthComponent {
    double mean = 0;    // bytes
    double stddev = 0;  // bytes
    double weight = 0;  // mixture weights sum to 1
};

// Statistical profile of one device category. User packets follow a Poisson
// process whose rate is modulated by a diurnal sine and a two-state
// (idle/active) burst process; control packets follow a diurnally modulated
// Poisson process. The burst multipliers are balanced so the long-run mean
// rate equals user_rate_per_min.
struct CategoryArchetype {
    std::string name;
    double user_rate_per_min = 1.0;
    double burstiness = 1.0;  // active-state rate multiplier, >= 1
    double burst_active_secs = 60.0;
    double burst_idle_secs = 600.0;
    double control_rate_per_min = 0.5;
    std::vector<LengthComponent> length_mix;
    double diurnal_amplitude = 0.0;  // in [0,1]
    std::vector<std::pair<std::string, double>> protocol_mix;  // user + control labels
    double tx_fraction = 0.5;  // probability a packet is transmitted by the device

    void validate() const;  // throws ParamError
};

// One synthetic device: an archetype instance whose numeric parameters are
// jittered by up to +/-20% (seeded), so devices within a category differ the
// way units from different manufacturers do.
struct SyntheticDeviceSpec {
    MacAddress mac;
    int category_id = 0;
    std::string archetype;
    std::uint64_t jitter_seed = 0;
    std::string device_name;
};

struct Scenario {
    std::vector<DeviceCategory> categories;
    std::vector<CategoryArchetype> archetypes;
    std::vector<SyntheticDeviceSpec> devices;

    const CategoryArchetype& archetype(const std::string& name) const;  // throws ParamError
    DeviceTable device_table() const;
    void validate() const;
};

// The archetype a given device actually follows once its +/-20% parameter
// jitter is applied. Depends only on the jitter seed, not the capture seed.
CategoryArchetype jittered_archetype(const CategoryArchetype& base, std::uint64_t jitter_seed);

// The calibrated four-category scenario (2 Hubs, 3 Electronics, 6 Cameras,
// 4 Switches&Triggers) the end-to-end experiments run on.
Scenario default_scenario();

// Cameras vs Switches&Triggers subset used by the train-ratio experiment.
Scenario binary_scenario();

Scenario load_scenario(const std::filesystem::path& path);
Scenario parse_scenario(std::istream& in);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);
void write_scenario(const Scenario& scenario, std::ostream& out);

struct GeneratedCapture {
    CaptureFile capture;   // merged, time-sorted records of every device
    DeviceTable devices;   // ground-truth label map
};

// Deterministic for a given (scenario, duration, seed). Timestamps lie in
// [0, duration_secs); every record parses back through ingest cleanly.
GeneratedCapture generate_capture(const Scenario& scenario, double duration_secs,
                                  std::uint64_t seed);

} // namespace flowclass
