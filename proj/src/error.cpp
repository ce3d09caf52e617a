#include "gridbox/error.hpp"

#include <array>
#include <utility>

namespace gridbox {

namespace {

constexpr std::array<std::pair<error_code, std::string_view>, 34> names{{
    {error_code::malformed_preamble, "MalformedPreamble"},
    {error_code::unsupported_transfer_syntax, "UnsupportedTransferSyntax"},
    {error_code::truncated_element, "TruncatedElement"},
    {error_code::vr_mismatch, "VrMismatch"},
    {error_code::value_too_long, "ValueTooLong"},
    {error_code::bad_tag_attribute, "BadTagAttribute"},
    {error_code::bad_vr_attribute, "BadVrAttribute"},
    {error_code::value_parse_error, "ValueParseError"},
    {error_code::missing_sop_uid, "MissingSopUid"},
    {error_code::missing_identity, "MissingIdentity"},
    {error_code::duplicate_sop_uid, "DuplicateSopUid"},
    {error_code::constraint_violation, "ConstraintViolation"},
    {error_code::sql_shape_error, "SqlShapeError"},
    {error_code::store_fault, "StoreFault"},
    {error_code::lfn_exists, "LfnExists"},
    {error_code::bad_lfn, "BadLfn"},
    {error_code::bad_pattern, "BadPattern"},
    {error_code::not_found, "NotFound"},
    {error_code::not_local, "NotLocal"},
    {error_code::xml_error, "XmlError"},
    {error_code::unknown_attribute, "UnknownAttribute"},
    {error_code::bad_comparison, "BadComparison"},
    {error_code::bad_conjunction, "BadConjunction"},
    {error_code::empty_query, "EmptyQuery"},
    {error_code::invalid_query, "InvalidQuery"},
    {error_code::unknown_format, "UnknownFormat"},
    {error_code::auth_error, "AuthError"},
    {error_code::not_staged, "NotStaged"},
    {error_code::bind_error, "BindError"},
    {error_code::config_error, "ConfigError"},
    {error_code::protocol_error, "ProtocolError"},
    {error_code::association_rejected, "AssociationRejected"},
    {error_code::timeout, "Timeout"},
    {error_code::io_error, "IoError"},
}};

}  // namespace

std::string_view to_string(error_code code) noexcept {
    for (const auto& [c, name] : names) {
        if (c == code) return name;
    }
    return "Unknown";
}

std::optional<error_code> parse_error_code(std::string_view text) noexcept {
    for (const auto& [c, name] : names) {
        if (name == text) return c;
    }
    return std::nullopt;
}

}  // namespace gridbox
