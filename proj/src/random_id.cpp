#include "gridbox/random_id.hpp"

#include "gridbox/error.hpp"

#include <openssl/rand.h>

namespace gridbox {

id128 random_id128() {
    id128 id{};
    if (RAND_bytes(id.data(), static_cast<int>(id.size())) != 1) {
        throw error(error_code::io_error, "system random source failed");
    }
    return id;
}

std::string to_hex(const id128& id) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(32);
    for (auto b : id) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xF]);
    }
    return out;
}

bool from_hex(std::string_view hex, id128& out) {
    if (hex.size() != 32) return false;
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    for (std::size_t i = 0; i < 16; ++i) {
        int hi = nibble(hex[2 * i]), lo = nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) return false;
        out[i] = static_cast<std::uint8_t>(hi * 16 + lo);
    }
    return true;
}

}  // namespace gridbox
