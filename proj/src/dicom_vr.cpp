#include "gridbox/dicom/vr.hpp"

#include <array>

namespace gridbox::dicom {

namespace {

constexpr std::array<std::string_view, 22> codes{
    "AE", "AS", "CS", "DA", "DS", "DT", "IS", "LO", "LT", "OB", "OW",
    "PN", "SH", "SL", "SQ", "SS", "ST", "TM", "UI", "UL", "US", "UN",
};

}  // namespace

std::string_view to_string(vr v) noexcept { return codes[static_cast<std::size_t>(v)]; }

std::optional<vr> parse_vr(std::string_view code) noexcept {
    for (std::size_t i = 0; i < codes.size(); ++i) {
        if (codes[i] == code) return static_cast<vr>(i);
    }
    return std::nullopt;
}

value_kind kind_of(vr v) noexcept {
    switch (v) {
        case vr::SL:
        case vr::SS:
        case vr::UL:
        case vr::US:
            return value_kind::integers;
        case vr::OB:
        case vr::OW:
        case vr::UN:
            return value_kind::bytes;
        case vr::SQ:
            return value_kind::sequence;
        default:
            return value_kind::text;
    }
}

bool has_long_length(vr v) noexcept {
    return v == vr::OB || v == vr::OW || v == vr::SQ || v == vr::UN;
}

std::size_t integer_width(vr v) noexcept {
    return (v == vr::US || v == vr::SS) ? 2 : 4;
}

bool integer_signed(vr v) noexcept { return v == vr::SS || v == vr::SL; }

std::size_t max_text_length(vr v) noexcept {
    switch (v) {
        case vr::AE: return 16;
        case vr::AS: return 4;
        case vr::CS: return 16;
        case vr::DA: return 8;
        case vr::DS: return 16;
        case vr::DT: return 26;
        case vr::IS: return 12;
        case vr::LO: return 64;
        case vr::LT: return 10240;
        case vr::PN: return 324;
        case vr::SH: return 16;
        case vr::ST: return 1024;
        case vr::TM: return 16;
        case vr::UI: return 64;
        default: return 0;
    }
}

char padding_byte(vr v) noexcept {
    switch (kind_of(v)) {
        case value_kind::text: return v == vr::UI ? '\0' : ' ';
        default: return '\0';
    }
}

bool multi_valued_text(vr v) noexcept { return v != vr::LT && v != vr::ST; }

}  // namespace gridbox::dicom
