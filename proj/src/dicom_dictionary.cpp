#include "gridbox/dicom/dictionary.hpp"

#include <algorithm>
#include <array>

namespace gridbox::dicom {

namespace {

// Sorted by tag.
constexpr std::array<dictionary_entry, 68> entries{{
    {tags::command_group_length, vr::UL, "CommandGroupLength"},
    {tags::affected_sop_class_uid, vr::UI, "AffectedSOPClassUID"},
    {tags::command_field, vr::US, "CommandField"},
    {tags::message_id, vr::US, "MessageID"},
    {tags::message_id_being_responded_to, vr::US, "MessageIDBeingRespondedTo"},
    {tags::move_destination, vr::AE, "MoveDestination"},
    {tags::priority, vr::US, "Priority"},
    {tags::command_data_set_type, vr::US, "CommandDataSetType"},
    {tags::status, vr::US, "Status"},
    {tags::error_comment, vr::LO, "ErrorComment"},
    {tags::affected_sop_instance_uid, vr::UI, "AffectedSOPInstanceUID"},
    {tags::file_meta_group_length, vr::UL, "FileMetaInformationGroupLength"},
    {tags::file_meta_version, vr::OB, "FileMetaInformationVersion"},
    {tags::media_storage_sop_class_uid, vr::UI, "MediaStorageSOPClassUID"},
    {tags::media_storage_sop_instance_uid, vr::UI, "MediaStorageSOPInstanceUID"},
    {tags::transfer_syntax_uid, vr::UI, "TransferSyntaxUID"},
    {tags::implementation_class_uid, vr::UI, "ImplementationClassUID"},
    {tags::implementation_version_name, vr::SH, "ImplementationVersionName"},
    {tags::specific_character_set, vr::CS, "SpecificCharacterSet"},
    {tags::image_type, vr::CS, "ImageType"},
    {tags::sop_class_uid, vr::UI, "SOPClassUID"},
    {tags::sop_instance_uid, vr::UI, "SOPInstanceUID"},
    {tags::study_date, vr::DA, "StudyDate"},
    {tags::series_date, vr::DA, "SeriesDate"},
    {tags::content_date, vr::DA, "ContentDate"},
    {tags::study_time, vr::TM, "StudyTime"},
    {tags::accession_number, vr::SH, "AccessionNumber"},
    {tags::modality, vr::CS, "Modality"},
    {tags::manufacturer, vr::LO, "Manufacturer"},
    {tags::institution_name, vr::LO, "InstitutionName"},
    {tags::referring_physician_name, vr::PN, "ReferringPhysicianName"},
    {tags::code_value, vr::SH, "CodeValue"},
    {tags::coding_scheme_designator, vr::SH, "CodingSchemeDesignator"},
    {tags::code_meaning, vr::LO, "CodeMeaning"},
    {tags::study_description, vr::LO, "StudyDescription"},
    {tags::series_description, vr::LO, "SeriesDescription"},
    {tags::operators_name, vr::PN, "OperatorsName"},
    {tags::patient_name, vr::PN, "PatientName"},
    {tags::patient_id, vr::LO, "PatientID"},
    {tags::patient_birth_date, vr::DA, "PatientBirthDate"},
    {tags::patient_sex, vr::CS, "PatientSex"},
    {tags::other_patient_ids, vr::LO, "OtherPatientIDs"},
    {tags::other_patient_names, vr::PN, "OtherPatientNames"},
    {tags::patient_age, vr::AS, "PatientAge"},
    {tags::patient_address, vr::LO, "PatientAddress"},
    {tags::body_part_examined, vr::CS, "BodyPartExamined"},
    {tags::kvp, vr::DS, "KVP"},
    {tags::exposure_time, vr::IS, "ExposureTime"},
    {tags::view_position, vr::CS, "ViewPosition"},
    {tags::study_instance_uid, vr::UI, "StudyInstanceUID"},
    {tags::series_instance_uid, vr::UI, "SeriesInstanceUID"},
    {tags::study_id, vr::SH, "StudyID"},
    {tags::series_number, vr::IS, "SeriesNumber"},
    {tags::instance_number, vr::IS, "InstanceNumber"},
    {tags::patient_orientation, vr::CS, "PatientOrientation"},
    {tags::laterality, vr::CS, "Laterality"},
    {tags::image_laterality, vr::CS, "ImageLaterality"},
    {tags::samples_per_pixel, vr::US, "SamplesPerPixel"},
    {tags::photometric_interpretation, vr::CS, "PhotometricInterpretation"},
    {tags::rows, vr::US, "Rows"},
    {tags::columns, vr::US, "Columns"},
    {tags::pixel_spacing, vr::DS, "PixelSpacing"},
    {tags::bits_allocated, vr::US, "BitsAllocated"},
    {tags::bits_stored, vr::US, "BitsStored"},
    {tags::high_bit, vr::US, "HighBit"},
    {tags::pixel_representation, vr::US, "PixelRepresentation"},
    {tags::view_code_sequence, vr::SQ, "ViewCodeSequence"},
    {tags::pixel_data, vr::OW, "PixelData"},
}};

constexpr bool sorted() {
    for (std::size_t i = 1; i < entries.size(); ++i) {
        if (!(entries[i - 1].key < entries[i].key)) return false;
    }
    return true;
}
static_assert(sorted(), "dictionary entries must be sorted by tag");

}  // namespace

const dictionary_entry* lookup(tag t) noexcept {
    auto it = std::lower_bound(entries.begin(), entries.end(), t,
                               [](const dictionary_entry& e, tag k) { return e.key < k; });
    if (it == entries.end() || it->key != t) return nullptr;
    return &*it;
}

const dictionary_entry* lookup(std::string_view keyword) noexcept {
    for (const auto& e : entries) {
        if (e.keyword == keyword) return &e;
    }
    return nullptr;
}

vr implicit_vr(tag t) noexcept {
    // Group length elements are always UL.
    if (t.element == 0x0000) return vr::UL;
    const auto* e = lookup(t);
    return e != nullptr ? e->value_representation : vr::UN;
}

std::string_view keyword_of(tag t) noexcept {
    const auto* e = lookup(t);
    return e != nullptr ? e->keyword : std::string_view{};
}

std::span<const dictionary_entry> dictionary_entries() noexcept { return entries; }

}  // namespace gridbox::dicom
