#include "gridbox/dicom/tag.hpp"

#include <cstdio>

namespace gridbox::dicom {

std::string tag::str() const {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%04X%04X", group, element);
    return std::string(buf, 8);
}

std::optional<tag> tag::parse(std::string_view text) noexcept {
    if (text.size() != 8) return std::nullopt;
    std::uint32_t v = 0;
    for (char c : text) {
        std::uint32_t d;
        if (c >= '0' && c <= '9') d = static_cast<std::uint32_t>(c - '0');
        else if (c >= 'A' && c <= 'F') d = static_cast<std::uint32_t>(c - 'A' + 10);
        else if (c >= 'a' && c <= 'f') d = static_cast<std::uint32_t>(c - 'a' + 10);
        else return std::nullopt;
        v = (v << 4) | d;
    }
    return tag(static_cast<std::uint16_t>(v >> 16), static_cast<std::uint16_t>(v & 0xFFFF));
}

}  // namespace gridbox::dicom
