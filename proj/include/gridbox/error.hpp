/**
 * @file error.hpp
 * @brief Error type shared by every gridbox module
 *
 * All fallible operations throw gridbox::error carrying a machine-readable
 * error_code. The code's text form doubles as the wire-level error code in
 * Error frames and XML error documents.
 */

#ifndef GRIDBOX_ERROR_HPP
#define GRIDBOX_ERROR_HPP

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gridbox {

enum class error_code {
    // dicom_core
    malformed_preamble,
    unsupported_transfer_syntax,
    truncated_element,
    vr_mismatch,
    value_too_long,
    bad_tag_attribute,
    bad_vr_attribute,
    value_parse_error,
    missing_sop_uid,
    // anonymizer
    missing_identity,
    // metadata_store
    duplicate_sop_uid,
    constraint_violation,
    sql_shape_error,
    store_fault,
    // file_catalogue
    lfn_exists,
    bad_lfn,
    bad_pattern,
    not_found,
    not_local,
    // formal_query
    xml_error,
    unknown_attribute,
    bad_comparison,
    bad_conjunction,
    empty_query,
    invalid_query,
    // federation
    unknown_format,
    // node_service
    auth_error,
    not_staged,
    bind_error,
    config_error,
    protocol_error,
    association_rejected,
    timeout,
    io_error,
};

/// Stable text form, e.g. "MalformedPreamble".
[[nodiscard]] std::string_view to_string(error_code code) noexcept;

[[nodiscard]] std::optional<error_code> parse_error_code(std::string_view text) noexcept;

class error : public std::runtime_error {
public:
    error(error_code code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    [[nodiscard]] error_code code() const noexcept { return code_; }

private:
    error_code code_;
};

}  // namespace gridbox

#endif  // GRIDBOX_ERROR_HPP
