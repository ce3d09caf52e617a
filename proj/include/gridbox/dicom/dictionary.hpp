/**
 * @file dictionary.hpp
 * @brief Built-in tag dictionary used to resolve VRs in implicit-VR input
 *
 * Covers the command group, the file meta group and the attributes the
 * metadata schema and the corpus generator rely on. Unknown tags resolve to
 * VR UN and an empty keyword.
 */

#ifndef GRIDBOX_DICOM_DICTIONARY_HPP
#define GRIDBOX_DICOM_DICTIONARY_HPP

#include "gridbox/dicom/tag.hpp"
#include "gridbox/dicom/vr.hpp"

#include <optional>
#include <span>
#include <string_view>

namespace gridbox::dicom {

struct dictionary_entry {
    tag key;
    vr value_representation;
    std::string_view keyword;
};

[[nodiscard]] const dictionary_entry* lookup(tag t) noexcept;
[[nodiscard]] const dictionary_entry* lookup(std::string_view keyword) noexcept;

/// VR to use for `t` in implicit-VR streams.
[[nodiscard]] vr implicit_vr(tag t) noexcept;

[[nodiscard]] std::string_view keyword_of(tag t) noexcept;

[[nodiscard]] std::span<const dictionary_entry> dictionary_entries() noexcept;

}  // namespace gridbox::dicom

#endif  // GRIDBOX_DICOM_DICTIONARY_HPP
