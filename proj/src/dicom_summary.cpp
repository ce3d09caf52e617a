#include "gridbox/dicom/summary.hpp"

#include "gridbox/dicom/tag.hpp"
#include "gridbox/error.hpp"

#include <charconv>

namespace gridbox::dicom {

namespace {

std::optional<std::string> view_code_of(const dataset& ds) {
    if (auto v = ds.text(tags::view_position)) return v;
    // Fall back to the first code meaning of the view code sequence.
    const auto* seq = ds.find(tags::view_code_sequence);
    if (seq == nullptr || seq->value_representation() != vr::SQ || seq->items().empty()) return std::nullopt;
    return seq->items().front().content.text(tags::code_meaning);
}

std::optional<std::string> opt_int_text(const std::optional<std::int64_t>& v) {
    if (!v) return std::nullopt;
    return std::to_string(*v);
}

}  // namespace

std::string iso_date(std::string_view dicom_date) {
    if (dicom_date.size() == 8 && dicom_date.find_first_not_of("0123456789") == std::string_view::npos) {
        return std::string(dicom_date.substr(0, 4)) + "-" + std::string(dicom_date.substr(4, 2)) + "-" +
               std::string(dicom_date.substr(6, 2));
    }
    return std::string(dicom_date);
}

std::optional<std::int64_t> image_summary::birth_year() const {
    if (!patient_birth_date || patient_birth_date->size() < 4) return std::nullopt;
    std::int64_t year = 0;
    auto [p, ec] = std::from_chars(patient_birth_date->data(), patient_birth_date->data() + 4, year);
    if (ec != std::errc{} || p != patient_birth_date->data() + 4) return std::nullopt;
    return year;
}

std::map<std::string, std::optional<std::string>> image_summary::to_attribute_map() const {
    return {
        {"patient_id", patient_id},
        {"patient_sex", patient_sex},
        {"patient_birth_date", patient_birth_date},
        {"study_uid", study_uid},
        {"series_uid", series_uid},
        {"sop_uid", sop_uid},
        {"study_date", study_date},
        {"study_description", study_description},
        {"modality", modality},
        {"laterality", laterality},
        {"view_code", view_code},
        {"rows", opt_int_text(rows)},
        {"columns", opt_int_text(columns)},
        {"bits_allocated", opt_int_text(bits_allocated)},
        {"pixel_spacing", pixel_spacing},
    };
}

image_summary extract_summary(const dataset& ds) {
    auto sop = ds.text(tags::sop_instance_uid);
    if (!sop) throw error(error_code::missing_sop_uid, "dataset has no SOP Instance UID (0008,0018)");

    image_summary s;
    s.sop_uid = *sop;
    s.patient_id = ds.text(tags::patient_id);
    s.patient_sex = ds.text(tags::patient_sex);
    s.patient_birth_date = ds.text(tags::patient_birth_date);
    s.study_uid = ds.text(tags::study_instance_uid);
    s.series_uid = ds.text(tags::series_instance_uid);
    if (auto d = ds.text(tags::study_date)) s.study_date = iso_date(*d);
    s.study_description = ds.text(tags::study_description);
    s.modality = ds.text(tags::modality);
    s.laterality = ds.text(tags::image_laterality);
    if (!s.laterality) s.laterality = ds.text(tags::laterality);
    s.view_code = view_code_of(ds);
    s.rows = ds.integer(tags::rows);
    s.columns = ds.integer(tags::columns);
    s.bits_allocated = ds.integer(tags::bits_allocated);
    s.pixel_spacing = ds.text(tags::pixel_spacing);
    return s;
}

}  // namespace gridbox::dicom
