#include "flowclass/traffic_model.hpp"

#include <cctype>
#include <fstream>

#include "flowclass/errors.hpp"

namespace flowclass {

std::string canonical_protocol(std::string_view raw) {
    std::size_t begin = 0, end = raw.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(raw[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(raw[end - 1]))) --end;
    std::string out;
    out.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i)
        out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(raw[i]))));
    return out;
}

ControlProtocolSet::ControlProtocolSet()
    : labels_{"ICMP", "ARP", "DNS", "NTP", "DHCP", "MDNS", "ICMPV6", "IGMP"} {}

ControlProtocolSet ControlProtocolSet::from_labels(const std::vector<std::string>& labels) {
    std::set<std::string> canon;
    for (const auto& label : labels) {
        std::string c = canonical_protocol(label);
        if (!c.empty()) canon.insert(std::move(c));
    }
    return ControlProtocolSet(std::move(canon));
}

ControlProtocolSet ControlProtocolSet::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open control protocol set file: " + path.string());
    std::vector<std::string> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        labels.push_back(line);
    }
    return from_labels(labels);
}

bool ControlProtocolSet::contains(std::string_view protocol) const {
    return labels_.count(canonical_protocol(protocol)) > 0;
}

PacketClass classify_packet(const PacketRecord& record, const MacAddress& device_mac,
                            const ControlProtocolSet& control) {
    if (record.eth_src != device_mac && record.eth_dst != device_mac)
        throw DataError("packet record does not belong to device " + device_mac.to_string());
    PacketClass cls;
    cls.direction = record.eth_src == device_mac ? Direction::Transmitted : Direction::Received;
    cls.kind = control.contains(record.protocol) ? PacketKind::Control : PacketKind::User;
    return cls;
}

} // namespace flowclass
