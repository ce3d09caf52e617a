/**
 * @file random_id.hpp
 * @brief 128-bit random identifiers from the system CSPRNG
 */

#ifndef GRIDBOX_RANDOM_ID_HPP
#define GRIDBOX_RANDOM_ID_HPP

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace gridbox {

using id128 = std::array<std::uint8_t, 16>;

[[nodiscard]] id128 random_id128();

/// 32 lowercase hex digits.
[[nodiscard]] std::string to_hex(const id128& id);

/// Inverse of to_hex; returns false on malformed input.
[[nodiscard]] bool from_hex(std::string_view hex, id128& out);

}  // namespace gridbox

#endif  // GRIDBOX_RANDOM_ID_HPP
