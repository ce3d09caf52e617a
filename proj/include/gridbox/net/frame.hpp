/**
 * @file frame.hpp
 * @brief Length-prefixed frames of the client API and peer protocol
 *
 * Layout: type (1 byte) | request id (16 bytes) | payload length (4 bytes,
 * big-endian) | payload. Payloads are UTF-8 XML except for FileChunk frames,
 * which carry raw file bytes. A file is sent as FileChunk frames of at most
 * 1 MiB each, terminated by an empty FileChunk.
 */

#ifndef GRIDBOX_NET_FRAME_HPP
#define GRIDBOX_NET_FRAME_HPP

#include "gridbox/error.hpp"
#include "gridbox/net/socket.hpp"
#include "gridbox/random_id.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gridbox::net {

enum class message_type : std::uint8_t {
    query_request = 0x01,
    query_response = 0x02,
    add_request = 0x03,
    add_response = 0x04,
    get_request = 0x05,
    file_chunk = 0x06,
    federated_query = 0x07,
    federated_response = 0x08,
    error = 0x7F,
};

inline constexpr std::size_t frame_header_size = 21;
inline constexpr std::size_t max_frame_payload = 16u * 1024 * 1024;
inline constexpr std::size_t max_chunk_size = 1024 * 1024;

struct frame {
    message_type type = message_type::error;
    id128 request_id{};
    std::vector<std::uint8_t> payload;

    [[nodiscard]] std::string_view text() const noexcept {
        return {reinterpret_cast<const char*>(payload.data()), payload.size()};
    }

    bool operator==(const frame&) const = default;
};

[[nodiscard]] frame make_frame(message_type type, const id128& request_id, std::string_view payload);

[[nodiscard]] std::vector<std::uint8_t> encode_frame(const frame& f);

/// Throws protocol_error for an unknown type or an oversized length, and the
/// socket's errors for I/O failures.
[[nodiscard]] frame read_frame(tcp_socket& s, deadline until);
void write_frame(tcp_socket& s, const frame& f, deadline until);

/// Writes `bytes` as FileChunk frames plus the empty terminator.
void write_file_chunks(tcp_socket& s, const id128& request_id, std::span<const std::uint8_t> bytes, deadline until);

/// Reads FileChunk frames up to the terminator. An Error frame in their place
/// is rethrown as the gridbox::error it carries.
[[nodiscard]] std::vector<std::uint8_t> read_file_chunks(tcp_socket& s, deadline until);

/// `<Error code="AuthError">message</Error>`
[[nodiscard]] std::string error_document(error_code code, std::string_view message);

/// Inverse of error_document; unknown codes map to protocol_error.
[[nodiscard]] error error_from_document(std::string_view document);

/// Throws the carried error when `f` is an Error frame, and protocol_error
/// when its type is not `expected`.
void expect_frame(const frame& f, message_type expected);

}  // namespace gridbox::net

#endif  // GRIDBOX_NET_FRAME_HPP
