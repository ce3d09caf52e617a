/**
 * @file summary.hpp
 * @brief Fixed attribute set extracted from an image at ingestion
 */

#ifndef GRIDBOX_DICOM_SUMMARY_HPP
#define GRIDBOX_DICOM_SUMMARY_HPP

#include "gridbox/dicom/dataset.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace gridbox::dicom {

struct image_summary {
    std::optional<std::string> patient_id;
    std::optional<std::string> patient_sex;
    std::optional<std::string> patient_birth_date;  ///< DICOM DA form, YYYYMMDD
    std::optional<std::string> study_uid;
    std::optional<std::string> series_uid;
    std::string sop_uid;
    std::optional<std::string> study_date;          ///< ISO-8601, YYYY-MM-DD
    std::optional<std::string> study_description;
    std::optional<std::string> modality;
    std::optional<std::string> laterality;
    std::optional<std::string> view_code;
    std::optional<std::int64_t> rows;
    std::optional<std::int64_t> columns;
    std::optional<std::int64_t> bits_allocated;
    std::optional<std::string> pixel_spacing;       ///< "row\col" in mm

    bool operator==(const image_summary&) const = default;

    /// Birth year parsed from patient_birth_date.
    [[nodiscard]] std::optional<std::int64_t> birth_year() const;

    /// Name -> value, with every attribute present and nullopt for absent.
    [[nodiscard]] std::map<std::string, std::optional<std::string>> to_attribute_map() const;
};

/// Throws missing_sop_uid when (0008,0018) is absent.
[[nodiscard]] image_summary extract_summary(const dataset& ds);

/// "20030115" -> "2003-01-15"; other shapes returned unchanged.
[[nodiscard]] std::string iso_date(std::string_view dicom_date);

}  // namespace gridbox::dicom

#endif  // GRIDBOX_DICOM_SUMMARY_HPP
