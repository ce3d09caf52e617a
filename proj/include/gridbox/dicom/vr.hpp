/**
 * @file vr.hpp
 * @brief Supported value representations
 *
 * Only the VRs needed by mammography metadata are supported; explicit-VR
 * input carrying any other code fails with VrMismatch.
 */

#ifndef GRIDBOX_DICOM_VR_HPP
#define GRIDBOX_DICOM_VR_HPP

#include <cstddef>
#include <optional>
#include <string_view>

namespace gridbox::dicom {

enum class vr {
    AE, AS, CS, DA, DS, DT, IS, LO, LT, OB, OW, PN, SH, SL, SQ, SS, ST, TM, UI, UL, US, UN,
};

enum class value_kind { text, integers, bytes, sequence };

[[nodiscard]] std::string_view to_string(vr v) noexcept;
[[nodiscard]] std::optional<vr> parse_vr(std::string_view code) noexcept;

[[nodiscard]] value_kind kind_of(vr v) noexcept;

/// Explicit VR encodes these with 2 reserved bytes and a 32-bit length.
[[nodiscard]] bool has_long_length(vr v) noexcept;

/// Width in bytes of one binary integer value (US/SS = 2, UL/SL = 4).
[[nodiscard]] std::size_t integer_width(vr v) noexcept;

[[nodiscard]] bool integer_signed(vr v) noexcept;

/// Maximum value length in characters for text VRs (whole value for
/// LT/ST, per value otherwise); 0 when unbounded by this check.
[[nodiscard]] std::size_t max_text_length(vr v) noexcept;

/// Byte used to pad a value to even length.
[[nodiscard]] char padding_byte(vr v) noexcept;

/// LT and ST are single-valued; backslash is ordinary text there.
[[nodiscard]] bool multi_valued_text(vr v) noexcept;

}  // namespace gridbox::dicom

#endif  // GRIDBOX_DICOM_VR_HPP
