/**
 * @file codec.hpp
 * @brief DICOM Part-10 file and raw dataset encoding/decoding
 *
 * Two transfer syntaxes are supported: Explicit VR Little Endian and
 * Implicit VR Little Endian. The file meta group (0002) is consumed on read
 * and regenerated on write; it never appears in the returned dataset.
 */

#ifndef GRIDBOX_DICOM_CODEC_HPP
#define GRIDBOX_DICOM_CODEC_HPP

#include "gridbox/dicom/dataset.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace gridbox::dicom {

namespace transfer_syntax {
inline constexpr std::string_view implicit_vr_little_endian = "1.2.840.10008.1.2";
inline constexpr std::string_view explicit_vr_little_endian = "1.2.840.10008.1.2.1";
}  // namespace transfer_syntax

inline constexpr std::string_view implementation_class_uid = "2.25.193837441728361937284615592011846203117";
inline constexpr std::string_view implementation_version_name = "GRIDBOX_1_0";

/// Sequences may nest this deep; one level more is rejected.
inline constexpr int max_sequence_depth = 4;

[[nodiscard]] bool is_supported_transfer_syntax(std::string_view uid) noexcept;

/// Parses a Part-10 file: 128-byte preamble, "DICM", meta group, dataset.
[[nodiscard]] dataset parse_file(std::span<const std::uint8_t> bytes);

/// Writes preamble, regenerated meta group and the dataset encoded in
/// `transfer_syntax_uid`.
[[nodiscard]] std::vector<std::uint8_t> serialize_file(const dataset& ds, std::string_view transfer_syntax_uid);

/// Prepends preamble and a regenerated meta group to data set bytes that are
/// already encoded in `transfer_syntax_uid`. serialize_file is this applied to
/// encode_dataset's output.
[[nodiscard]] std::vector<std::uint8_t> wrap_part10(std::string_view sop_class_uid, std::string_view sop_instance_uid,
                                                    std::string_view transfer_syntax_uid,
                                                    std::span<const std::uint8_t> dataset_bytes);

/// Raw dataset without preamble or meta, as carried in DIMSE messages.
[[nodiscard]] dataset decode_dataset(std::span<const std::uint8_t> bytes, std::string_view transfer_syntax_uid);
[[nodiscard]] std::vector<std::uint8_t> encode_dataset(const dataset& ds, std::string_view transfer_syntax_uid);

/// Byte offset where the dataset starts in a Part-10 file (after the meta
/// group). Throws like parse_file on a malformed header.
[[nodiscard]] std::size_t dataset_offset(std::span<const std::uint8_t> bytes);

}  // namespace gridbox::dicom

#endif  // GRIDBOX_DICOM_CODEC_HPP
