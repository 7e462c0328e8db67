#include "flowclass/mac_address.hpp"

#include <cctype>

namespace flowclass {

namespace {

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

std::string_view trimmed(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

} // namespace

std::optional<MacAddress> MacAddress::parse(std::string_view text) {
    text = trimmed(text);
    if (text.size() != 17) return std::nullopt;
    std::array<std::uint8_t, 6> bytes{};
    for (int i = 0; i < 6; ++i) {
        const int hi = hex_value(text[static_cast<std::size_t>(i) * 3]);
        const int lo = hex_value(text[static_cast<std::size_t>(i) * 3 + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        bytes[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(hi * 16 + lo);
        if (i < 5) {
            const char sep = text[static_cast<std::size_t>(i) * 3 + 2];
            if (sep != ':' && sep != '-') return std::nullopt;
        }
    }
    return MacAddress(bytes);
}

std::string MacAddress::to_string() const {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(17);
    for (int i = 0; i < 6; ++i) {
        if (i) out.push_back(':');
        out.push_back(digits[bytes_[static_cast<std::size_t>(i)] >> 4]);
        out.push_back(digits[bytes_[static_cast<std::size_t>(i)] & 0x0f]);
    }
    return out;
}

} // namespace flowclass
