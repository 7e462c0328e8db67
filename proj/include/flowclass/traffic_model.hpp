#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "flowclass/mac_address.hpp"

namespace flowclass {

// One captured packet's header metadata. `info` carries whatever extra
// columns the capture export had; it is kept verbatim and never interpreted.
struct PacketRecord {
    double timestamp = 0.0;    // seconds since capture epoch, >= 0
    std::uint64_t length = 0;  // bytes
    std::string protocol;      // label as captured, e.g. "TCP", "DNS", "ARP"
    MacAddress eth_src;
    MacAddress eth_dst;
    std::string info;

    bool operator==(const PacketRecord&) const = default;
};

// Time-ordered packets whose source or destination MAC is device_mac.
// Timestamps are non-decreasing; equal stamps keep original capture order.
struct DeviceStream {
    MacAddress device_mac;
    std::vector<PacketRecord> records;
};

struct DeviceCategory {
    int id = 0;        // contiguous ids starting at 1 within a label set
    std::string name;  // e.g. "Hubs", "Cameras"

    bool operator==(const DeviceCategory&) const = default;
};

enum class PacketKind { User, Control };
enum class Direction { Received, Transmitted };

struct PacketClass {
    PacketKind kind = PacketKind::User;
    Direction direction = Direction::Received;

    bool operator==(const PacketClass&) const = default;
};

// Uppercases and trims a protocol label; all label matching goes through this.
std::string canonical_protocol(std::string_view raw);

// Protocol labels classified as control traffic. The default set covers the
// usual infrastructure protocols; a custom set can be loaded from a
// one-label-per-line text file (blank lines and '#' comments skipped).
class ControlProtocolSet {
public:
    ControlProtocolSet();  // ICMP, ARP, DNS, NTP, DHCP, MDNS, ICMPv6, IGMP

    static ControlProtocolSet from_labels(const std::vector<std::string>& labels);
    static ControlProtocolSet from_file(const std::filesystem::path& path);

    bool contains(std::string_view protocol) const;
    const std::set<std::string>& labels() const { return labels_; }

private:
    explicit ControlProtocolSet(std::set<std::string> labels) : labels_(std::move(labels)) {}
    std::set<std::string> labels_;  // canonicalized
};

// Assigns the (kind, direction) pair for a record of the given device.
// Throws DataError when neither MAC of the record matches device_mac.
PacketClass classify_packet(const PacketRecord& record, const MacAddress& device_mac,
                            const ControlProtocolSet& control = ControlProtocolSet());

} // namespace flowclass
