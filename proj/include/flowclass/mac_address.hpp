#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace flowclass {

// 6-byte link-layer identifier. parse() accepts colon- or dash-separated hex
// pairs, case-insensitive, surrounding whitespace ignored. to_string() emits
// the lowercase colon-separated normal form.
class MacAddress {
public:
    MacAddress() = default;
    explicit MacAddress(const std::array<std::uint8_t, 6>& bytes) : bytes_(bytes) {}

    static std::optional<MacAddress> parse(std::string_view text);

    std::string to_string() const;
    const std::array<std::uint8_t, 6>& bytes() const { return bytes_; }

    auto operator<=>(const MacAddress&) const = default;

private:
    std::array<std::uint8_t, 6> bytes_{};
};

} // namespace flowclass
