#include "gridbox/anonymizer.hpp"

#include "gridbox/error.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>

namespace gridbox {

namespace {

constexpr std::array<dicom::tag, 7> removal_list{
    dicom::tags::accession_number,
    dicom::tags::institution_name,
    dicom::tags::referring_physician_name,
    dicom::tags::operators_name,
    dicom::tags::other_patient_ids,
    dicom::tags::other_patient_names,
    dicom::tags::patient_address,
};

}  // namespace

pseudonym_key pseudonym_key::from_hex(std::string_view hex) {
    if (hex.size() != size * 2) throw error(error_code::config_error, "pseudonym key must be 64 hex digits");
    std::array<std::uint8_t, size> bytes{};
    for (std::size_t i = 0; i < size; ++i) {
        unsigned value = 0;
        for (std::size_t k = 0; k < 2; ++k) {
            char c = hex[2 * i + k];
            unsigned d;
            if (c >= '0' && c <= '9') d = static_cast<unsigned>(c - '0');
            else if (c >= 'a' && c <= 'f') d = static_cast<unsigned>(c - 'a' + 10);
            else if (c >= 'A' && c <= 'F') d = static_cast<unsigned>(c - 'A' + 10);
            else throw error(error_code::config_error, "pseudonym key must be 64 hex digits");
            value = value * 16 + d;
        }
        bytes[i] = static_cast<std::uint8_t>(value);
    }
    return pseudonym_key(bytes);
}

std::span<const dicom::tag> removed_identifier_tags() noexcept { return removal_list; }

std::string compute_pseudonym(const pseudonym_key& key, std::string_view patient_id) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int digest_len = 0;
    auto key_bytes = key.bytes();
    if (HMAC(EVP_sha256(), key_bytes.data(), static_cast<int>(key_bytes.size()),
             reinterpret_cast<const unsigned char*>(patient_id.data()), patient_id.size(), digest,
             &digest_len) == nullptr) {
        throw error(error_code::io_error, "HMAC-SHA-256 failed");
    }
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    for (std::size_t i = 0; i < pseudonym_length / 2; ++i) {
        out.push_back(digits[digest[i] >> 4]);
        out.push_back(digits[digest[i] & 0xF]);
    }
    return out;
}

pseudonymized pseudonymize(const dicom::dataset& ds, const pseudonym_key& key) {
    const auto* id = ds.find(dicom::tags::patient_id);
    if (id == nullptr || id->value_representation() == dicom::vr::SQ || !ds.text(dicom::tags::patient_id)) {
        throw error(error_code::missing_identity, "dataset has no Patient ID (0010,0020)");
    }
    // Raw value, trailing padding already stripped by the codec.
    std::string pseudonym = compute_pseudonym(key, std::get<std::string>(id->value()));

    dicom::dataset out = ds;
    out.set_text(dicom::tags::patient_id, dicom::vr::LO, pseudonym);
    out.set_text(dicom::tags::patient_name, dicom::vr::PN, pseudonym);
    if (auto birth = ds.text(dicom::tags::patient_birth_date)) {
        if (birth->size() >= 4 && birth->find_first_not_of("0123456789") >= 4) {
            out.set_text(dicom::tags::patient_birth_date, dicom::vr::DA, birth->substr(0, 4) + "0101");
        } else {
            out.erase(dicom::tags::patient_birth_date);
        }
    }
    for (auto t : removal_list) out.erase(t);
    return {std::move(out), std::move(pseudonym)};
}

void pseudonym_map::record(const std::string& original, const std::string& pseudonym) {
    std::lock_guard lock(mutex_);
    by_pseudonym_[pseudonym] = original;
}

std::optional<std::string> pseudonym_map::original_for(const std::string& pseudonym) const {
    std::lock_guard lock(mutex_);
    auto it = by_pseudonym_.find(pseudonym);
    if (it == by_pseudonym_.end()) return std::nullopt;
    return it->second;
}

std::size_t pseudonym_map::size() const {
    std::lock_guard lock(mutex_);
    return by_pseudonym_.size();
}

}  // namespace gridbox
