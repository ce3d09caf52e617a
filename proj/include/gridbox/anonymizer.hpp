/**
 * @file anonymizer.hpp
 * @brief Keyed pseudonymization of patient identity
 *
 * The pseudonym is the first 16 lowercase hex characters of
 * HMAC-SHA-256(key, PatientID). PatientID and PatientName are replaced by it,
 * the birth date keeps only its year (YYYY0101), and a fixed list of direct
 * identifiers is removed. Study, series and SOP instance UIDs are kept as-is
 * because sites join on them; deployments should treat UIDs as linkable.
 */

#ifndef GRIDBOX_ANONYMIZER_HPP
#define GRIDBOX_ANONYMIZER_HPP

#include "gridbox/dicom/dataset.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace gridbox {

/// 32-byte secret. Deliberately has no serialization or printing support.
class pseudonym_key {
public:
    static constexpr std::size_t size = 32;

    pseudonym_key() = default;
    explicit pseudonym_key(const std::array<std::uint8_t, size>& bytes) : bytes_(bytes) {}

    /// Parses 64 hex digits; throws config_error otherwise.
    static pseudonym_key from_hex(std::string_view hex);

    [[nodiscard]] std::span<const std::uint8_t, size> bytes() const noexcept { return bytes_; }

    bool operator==(const pseudonym_key&) const = default;

private:
    std::array<std::uint8_t, size> bytes_{};
};

inline constexpr std::size_t pseudonym_length = 16;

/// Tags deleted by pseudonymize().
[[nodiscard]] std::span<const dicom::tag> removed_identifier_tags() noexcept;

[[nodiscard]] std::string compute_pseudonym(const pseudonym_key& key, std::string_view patient_id);

struct pseudonymized {
    dicom::dataset dataset;
    std::string pseudonym;
};

/// Throws missing_identity when PatientID is absent.
[[nodiscard]] pseudonymized pseudonymize(const dicom::dataset& ds, const pseudonym_key& key);

/// Optional re-identification table, kept in memory only.
class pseudonym_map {
public:
    void record(const std::string& original, const std::string& pseudonym);
    [[nodiscard]] std::optional<std::string> original_for(const std::string& pseudonym) const;
    [[nodiscard]] std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::string> by_pseudonym_;
};

}  // namespace gridbox

#endif  // GRIDBOX_ANONYMIZER_HPP
