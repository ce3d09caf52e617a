#include "gridbox/net/frame.hpp"

#include "gridbox/xml.hpp"

#include <algorithm>

namespace gridbox::net {

namespace {

bool known_type(std::uint8_t t) { return (t >= 0x01 && t <= 0x08) || t == 0x7F; }

}  // namespace

frame make_frame(message_type type, const id128& request_id, std::string_view payload) {
    return {type, request_id, std::vector<std::uint8_t>(payload.begin(), payload.end())};
}

std::vector<std::uint8_t> encode_frame(const frame& f) {
    if (f.payload.size() > max_frame_payload) throw error(error_code::protocol_error, "frame payload exceeds 16 MiB");
    std::vector<std::uint8_t> out;
    out.reserve(frame_header_size + f.payload.size());
    out.push_back(static_cast<std::uint8_t>(f.type));
    out.insert(out.end(), f.request_id.begin(), f.request_id.end());
    auto n = static_cast<std::uint32_t>(f.payload.size());
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(n >> shift));
    out.insert(out.end(), f.payload.begin(), f.payload.end());
    return out;
}

frame read_frame(tcp_socket& s, deadline until) {
    std::uint8_t header[frame_header_size];
    s.read_exact(header, until);
    if (!known_type(header[0])) {
        throw error(error_code::protocol_error, "unknown frame type " + std::to_string(header[0]));
    }
    frame f;
    f.type = static_cast<message_type>(header[0]);
    std::copy(header + 1, header + 17, f.request_id.begin());
    std::uint32_t n = 0;
    for (int i = 17; i < 21; ++i) n = (n << 8) | header[i];
    if (n > max_frame_payload) throw error(error_code::protocol_error, "frame length " + std::to_string(n) + " exceeds 16 MiB");
    f.payload.resize(n);
    s.read_exact(f.payload, until);
    return f;
}

void write_frame(tcp_socket& s, const frame& f, deadline until) { s.write_all(encode_frame(f), until); }

void write_file_chunks(tcp_socket& s, const id128& request_id, std::span<const std::uint8_t> bytes, deadline until) {
    for (std::size_t pos = 0; pos < bytes.size(); pos += max_chunk_size) {
        auto part = bytes.subspan(pos, std::min(max_chunk_size, bytes.size() - pos));
        write_frame(s, {message_type::file_chunk, request_id, {part.begin(), part.end()}}, until);
    }
    write_frame(s, {message_type::file_chunk, request_id, {}}, until);
}

std::vector<std::uint8_t> read_file_chunks(tcp_socket& s, deadline until) {
    std::vector<std::uint8_t> out;
    for (;;) {
        auto f = read_frame(s, until);
        expect_frame(f, message_type::file_chunk);
        if (f.payload.empty()) return out;
        if (f.payload.size() > max_chunk_size) throw error(error_code::protocol_error, "file chunk larger than 1 MiB");
        out.insert(out.end(), f.payload.begin(), f.payload.end());
    }
}

std::string error_document(error_code code, std::string_view message) {
    xml::node n("Error");
    n.set("code", std::string(to_string(code)));
    n.text = std::string(message);
    return xml::render(n);
}

error error_from_document(std::string_view document) {
    try {
        auto n = xml::parse(document);
        const auto* code = n.attribute("code");
        if (n.name == "Error" && code != nullptr) {
            if (auto c = parse_error_code(*code)) return error(*c, n.text);
            return error(error_code::protocol_error, *code + ": " + n.text);
        }
    } catch (const error&) {
    }
    return error(error_code::protocol_error, "malformed error document");
}

void expect_frame(const frame& f, message_type expected) {
    if (f.type == message_type::error) throw error_from_document(f.text());
    if (f.type != expected) {
        throw error(error_code::protocol_error, "unexpected frame type " + std::to_string(static_cast<int>(f.type)));
    }
}

}  // namespace gridbox::net
