/**
 * @file tag.hpp
 * @brief DICOM attribute tag (group, element)
 */

#ifndef GRIDBOX_DICOM_TAG_HPP
#define GRIDBOX_DICOM_TAG_HPP

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace gridbox::dicom {

struct tag {
    std::uint16_t group = 0;
    std::uint16_t element = 0;

    constexpr tag() = default;
    constexpr tag(std::uint16_t g, std::uint16_t e) : group(g), element(e) {}

    [[nodiscard]] constexpr std::uint32_t value() const noexcept {
        return (static_cast<std::uint32_t>(group) << 16) | element;
    }

    /// Eight uppercase hex digits, "GGGGEEEE".
    [[nodiscard]] std::string str() const;

    /// Inverse of str(); accepts exactly eight hex digits (either case).
    [[nodiscard]] static std::optional<tag> parse(std::string_view text) noexcept;

    constexpr auto operator<=>(const tag&) const = default;
};

namespace tags {

inline constexpr tag item{0xFFFE, 0xE000};
inline constexpr tag item_delimitation{0xFFFE, 0xE00D};
inline constexpr tag sequence_delimitation{0xFFFE, 0xE0DD};

inline constexpr tag command_group_length{0x0000, 0x0000};
inline constexpr tag affected_sop_class_uid{0x0000, 0x0002};
inline constexpr tag command_field{0x0000, 0x0100};
inline constexpr tag message_id{0x0000, 0x0110};
inline constexpr tag message_id_being_responded_to{0x0000, 0x0120};
inline constexpr tag move_destination{0x0000, 0x0600};
inline constexpr tag priority{0x0000, 0x0700};
inline constexpr tag command_data_set_type{0x0000, 0x0800};
inline constexpr tag status{0x0000, 0x0900};
inline constexpr tag error_comment{0x0000, 0x0902};
inline constexpr tag affected_sop_instance_uid{0x0000, 0x1000};

inline constexpr tag file_meta_group_length{0x0002, 0x0000};
inline constexpr tag file_meta_version{0x0002, 0x0001};
inline constexpr tag media_storage_sop_class_uid{0x0002, 0x0002};
inline constexpr tag media_storage_sop_instance_uid{0x0002, 0x0003};
inline constexpr tag transfer_syntax_uid{0x0002, 0x0010};
inline constexpr tag implementation_class_uid{0x0002, 0x0012};
inline constexpr tag implementation_version_name{0x0002, 0x0013};

inline constexpr tag specific_character_set{0x0008, 0x0005};
inline constexpr tag image_type{0x0008, 0x0008};
inline constexpr tag sop_class_uid{0x0008, 0x0016};
inline constexpr tag sop_instance_uid{0x0008, 0x0018};
inline constexpr tag study_date{0x0008, 0x0020};
inline constexpr tag series_date{0x0008, 0x0021};
inline constexpr tag content_date{0x0008, 0x0023};
inline constexpr tag study_time{0x0008, 0x0030};
inline constexpr tag accession_number{0x0008, 0x0050};
inline constexpr tag modality{0x0008, 0x0060};
inline constexpr tag manufacturer{0x0008, 0x0070};
inline constexpr tag institution_name{0x0008, 0x0080};
inline constexpr tag referring_physician_name{0x0008, 0x0090};
inline constexpr tag study_description{0x0008, 0x1030};
inline constexpr tag series_description{0x0008, 0x103E};
inline constexpr tag operators_name{0x0008, 0x1070};
inline constexpr tag view_code_sequence{0x0054, 0x0220};
inline constexpr tag code_value{0x0008, 0x0100};
inline constexpr tag coding_scheme_designator{0x0008, 0x0102};
inline constexpr tag code_meaning{0x0008, 0x0104};

inline constexpr tag patient_name{0x0010, 0x0010};
inline constexpr tag patient_id{0x0010, 0x0020};
inline constexpr tag patient_birth_date{0x0010, 0x0030};
inline constexpr tag patient_sex{0x0010, 0x0040};
inline constexpr tag other_patient_ids{0x0010, 0x1000};
inline constexpr tag other_patient_names{0x0010, 0x1001};
inline constexpr tag patient_age{0x0010, 0x1010};
inline constexpr tag patient_address{0x0010, 0x1040};

inline constexpr tag body_part_examined{0x0018, 0x0015};
inline constexpr tag kvp{0x0018, 0x0060};
inline constexpr tag exposure_time{0x0018, 0x1150};
inline constexpr tag view_position{0x0018, 0x5101};

inline constexpr tag study_instance_uid{0x0020, 0x000D};
inline constexpr tag series_instance_uid{0x0020, 0x000E};
inline constexpr tag study_id{0x0020, 0x0010};
inline constexpr tag series_number{0x0020, 0x0011};
inline constexpr tag instance_number{0x0020, 0x0013};
inline constexpr tag patient_orientation{0x0020, 0x0020};
inline constexpr tag laterality{0x0020, 0x0060};
inline constexpr tag image_laterality{0x0020, 0x0062};

inline constexpr tag samples_per_pixel{0x0028, 0x0002};
inline constexpr tag photometric_interpretation{0x0028, 0x0004};
inline constexpr tag rows{0x0028, 0x0010};
inline constexpr tag columns{0x0028, 0x0011};
inline constexpr tag pixel_spacing{0x0028, 0x0030};
inline constexpr tag bits_allocated{0x0028, 0x0100};
inline constexpr tag bits_stored{0x0028, 0x0101};
inline constexpr tag high_bit{0x0028, 0x0102};
inline constexpr tag pixel_representation{0x0028, 0x0103};

inline constexpr tag pixel_data{0x7FE0, 0x0010};

}  // namespace tags

}  // namespace gridbox::dicom

#endif  // GRIDBOX_DICOM_TAG_HPP
