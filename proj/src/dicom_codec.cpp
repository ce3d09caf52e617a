#include "gridbox/dicom/codec.hpp"

#include "gridbox/dicom/dictionary.hpp"
#include "gridbox/error.hpp"

#include <cstring>

namespace gridbox::dicom {

namespace {

constexpr std::uint32_t undefined_length = 0xFFFFFFFF;
constexpr std::size_t preamble_size = 128;

[[noreturn]] void truncated(const std::string& what) { throw error(error_code::truncated_element, what); }

bool explicit_for(std::string_view uid) {
    if (uid == transfer_syntax::explicit_vr_little_endian) return true;
    if (uid == transfer_syntax::implicit_vr_little_endian) return false;
    throw error(error_code::unsupported_transfer_syntax, "unsupported transfer syntax '" + std::string(uid) + "'");
}

std::string strip_padding(std::string s) {
    while (!s.empty() && (s.back() == ' ' || s.back() == '\0')) s.pop_back();
    return s;
}

class decoder {
public:
    decoder(std::span<const std::uint8_t> buf, bool explicit_vr, std::size_t pos = 0)
        : buf_(buf), pos_(pos), explicit_vr_(explicit_vr) {}

    [[nodiscard]] std::size_t position() const noexcept { return pos_; }

    dataset read_dataset(std::size_t end, int depth, bool until_item_delimiter) {
        dataset ds;
        for (;;) {
            if (pos_ >= end) {
                if (until_item_delimiter) truncated("item without delimiter");
                break;
            }
            tag t = peek_tag(end);
            if (t == tags::item_delimitation) {
                if (!until_item_delimiter) truncated("unexpected item delimiter");
                pos_ += 8;
                break;
            }
            data_element e = read_element(end, depth);
            // Group lengths outside the command and meta groups are retired.
            if (e.key().element == 0x0000 && e.key().group > 0x0002) continue;
            ds.set(std::move(e));
        }
        return ds;
    }

    // Reads consecutive group-0002 elements in explicit VR.
    dataset read_meta() {
        dataset meta;
        while (buf_.size() - pos_ >= 4 && peek_tag(buf_.size()).group == 0x0002) {
            meta.set(read_element(buf_.size(), 0));
        }
        return meta;
    }

    data_element read_element(std::size_t end, int depth) {
        if (end - pos_ < 8) truncated("element header truncated at offset " + std::to_string(pos_));
        tag t = read_tag();
        if (t.group == 0xFFFE) truncated("unexpected item tag " + t.str());

        vr v;
        std::uint32_t length;
        if (explicit_vr_) {
            char code[2] = {static_cast<char>(buf_[pos_]), static_cast<char>(buf_[pos_ + 1])};
            auto parsed = parse_vr(std::string_view(code, 2));
            if (!parsed) {
                throw error(error_code::vr_mismatch,
                            "unsupported VR code at " + t.str() + " (offset " + std::to_string(pos_) + ")");
            }
            v = *parsed;
            pos_ += 2;
            if (has_long_length(v)) {
                if (end - pos_ < 6) truncated("element header truncated at " + t.str());
                pos_ += 2;
                length = read_u32();
            } else {
                length = read_u16();
            }
        } else {
            v = implicit_vr(t);
            length = read_u32();
        }

        if (length == undefined_length) {
            if (t == tags::pixel_data && (v == vr::OB || v == vr::OW)) return read_encapsulated(t, v, end);
            if (v == vr::SQ || (!explicit_vr_ && v == vr::UN)) {
                return data_element(t, vr::SQ, read_items(end, depth + 1, true), true);
            }
            truncated("undefined length not allowed for " + t.str());
        }
        if (length > end - pos_) {
            truncated("declared length " + std::to_string(length) + " of " + t.str() + " exceeds remaining " +
                      std::to_string(end - pos_) + " bytes");
        }
        if (v == vr::SQ) {
            std::size_t seq_end = pos_ + length;
            auto items = read_items(seq_end, depth + 1, false);
            return data_element(t, vr::SQ, std::move(items), false);
        }
        return data_element(t, v, read_value(v, length, t));
    }

private:
    std::span<const std::uint8_t> buf_;
    std::size_t pos_;
    bool explicit_vr_;

    std::uint16_t read_u16() {
        std::uint16_t v = static_cast<std::uint16_t>(buf_[pos_] | (buf_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }

    std::uint32_t read_u32() {
        std::uint32_t v = static_cast<std::uint32_t>(buf_[pos_]) | (static_cast<std::uint32_t>(buf_[pos_ + 1]) << 8) |
                          (static_cast<std::uint32_t>(buf_[pos_ + 2]) << 16) |
                          (static_cast<std::uint32_t>(buf_[pos_ + 3]) << 24);
        pos_ += 4;
        return v;
    }

    tag read_tag() {
        auto g = read_u16();
        auto e = read_u16();
        return {g, e};
    }

    tag peek_tag(std::size_t end) {
        if (end - pos_ < 4) truncated("tag truncated at offset " + std::to_string(pos_));
        auto saved = pos_;
        tag t = read_tag();
        pos_ = saved;
        return t;
    }

    item_list read_items(std::size_t end, int depth, bool undefined) {
        if (depth > max_sequence_depth) {
            truncated("sequence nesting deeper than " + std::to_string(max_sequence_depth));
        }
        item_list items;
        for (;;) {
            if (!undefined && pos_ >= end) break;
            if (end - pos_ < 8) truncated("item header truncated at offset " + std::to_string(pos_));
            tag t = read_tag();
            std::uint32_t length = read_u32();
            if (undefined && t == tags::sequence_delimitation) break;
            if (t != tags::item) truncated("expected item tag, found " + t.str());
            if (length == undefined_length) {
                items.push_back({read_dataset(end, depth, true), true});
            } else {
                if (length > end - pos_) truncated("item length exceeds remaining bytes");
                std::size_t item_end = pos_ + length;
                items.push_back({read_dataset(item_end, depth, false), false});
                pos_ = item_end;
            }
        }
        return items;
    }

    data_element read_encapsulated(tag t, vr v, std::size_t end) {
        std::size_t start = pos_;
        for (;;) {
            if (end - pos_ < 8) truncated("encapsulated pixel data without sequence delimiter");
            tag item = read_tag();
            std::uint32_t length = read_u32();
            if (item == tags::sequence_delimitation) {
                byte_vector raw(buf_.begin() + static_cast<std::ptrdiff_t>(start),
                                buf_.begin() + static_cast<std::ptrdiff_t>(pos_ - 8));
                return data_element(t, v, std::move(raw), true);
            }
            if (item != tags::item) truncated("expected fragment item, found " + item.str());
            if (length == undefined_length || length > end - pos_) truncated("fragment length exceeds remaining bytes");
            pos_ += length;
        }
    }

    element_value read_value(vr v, std::uint32_t length, tag t) {
        const std::uint8_t* p = buf_.data() + pos_;
        pos_ += length;
        switch (kind_of(v)) {
            case value_kind::text:
                return strip_padding(std::string(reinterpret_cast<const char*>(p), length));
            case value_kind::integers: {
                std::size_t w = integer_width(v);
                if (length % w != 0) truncated("length of " + t.str() + " is not a multiple of " + std::to_string(w));
                integer_list out;
                out.reserve(length / w);
                for (std::size_t i = 0; i < length; i += w) {
                    if (w == 2) {
                        std::uint16_t u = static_cast<std::uint16_t>(p[i] | (p[i + 1] << 8));
                        out.push_back(integer_signed(v) ? static_cast<std::int16_t>(u) : u);
                    } else {
                        std::uint32_t u = static_cast<std::uint32_t>(p[i]) | (static_cast<std::uint32_t>(p[i + 1]) << 8) |
                                          (static_cast<std::uint32_t>(p[i + 2]) << 16) |
                                          (static_cast<std::uint32_t>(p[i + 3]) << 24);
                        out.push_back(integer_signed(v) ? static_cast<std::int32_t>(u) : static_cast<std::int64_t>(u));
                    }
                }
                return out;
            }
            case value_kind::bytes:
                return byte_vector(p, p + length);
            case value_kind::sequence:
                break;
        }
        truncated("unreachable value kind");
    }
};

class encoder {
public:
    explicit encoder(bool explicit_vr) : explicit_vr_(explicit_vr) {}

    void write_dataset(std::vector<std::uint8_t>& out, const dataset& ds, int depth) const {
        for (const auto& [t, e] : ds) write_element(out, e, depth);
    }

    void write_element(std::vector<std::uint8_t>& out, const data_element& e, int depth) const {
        vr v = e.value_representation();
        if (v == vr::SQ) {
            write_sequence(out, e, depth + 1);
            return;
        }
        if (e.undefined_length() && e.key() == tags::pixel_data) {
            write_header(out, e.key(), v, undefined_length);
            const auto& raw = e.bytes();
            out.insert(out.end(), raw.begin(), raw.end());
            write_tag(out, tags::sequence_delimitation);
            put_u32(out, 0);
            return;
        }
        std::vector<std::uint8_t> value = encode_value(e);
        if (explicit_vr_ && !has_long_length(v) && value.size() > 0xFFFF) {
            throw error(error_code::value_too_long, e.key().str() + " value of " + std::to_string(value.size()) +
                                                        " bytes exceeds the 16-bit length field of VR " +
                                                        std::string(to_string(v)));
        }
        if (value.size() >= undefined_length) {
            throw error(error_code::value_too_long, e.key().str() + " value exceeds the 32-bit length field");
        }
        write_header(out, e.key(), v, static_cast<std::uint32_t>(value.size()));
        out.insert(out.end(), value.begin(), value.end());
    }

    static void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
        out.push_back(static_cast<std::uint8_t>(v & 0xFF));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
    }

    static void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
    }

private:
    bool explicit_vr_;

    static void write_tag(std::vector<std::uint8_t>& out, tag t) {
        put_u16(out, t.group);
        put_u16(out, t.element);
    }

    void write_header(std::vector<std::uint8_t>& out, tag t, vr v, std::uint32_t length) const {
        write_tag(out, t);
        if (explicit_vr_) {
            auto code = to_string(v);
            out.push_back(static_cast<std::uint8_t>(code[0]));
            out.push_back(static_cast<std::uint8_t>(code[1]));
            if (has_long_length(v)) {
                put_u16(out, 0);
                put_u32(out, length);
            } else {
                put_u16(out, static_cast<std::uint16_t>(length));
            }
        } else {
            put_u32(out, length);
        }
    }

    void write_sequence(std::vector<std::uint8_t>& out, const data_element& e, int depth) const {
        if (depth > max_sequence_depth) {
            throw error(error_code::truncated_element,
                        "sequence nesting deeper than " + std::to_string(max_sequence_depth) + " at " + e.key().str());
        }
        std::vector<std::uint8_t> body;
        for (const auto& item : e.items()) {
            std::vector<std::uint8_t> content;
            write_dataset(content, item.content, depth);
            write_tag(body, tags::item);
            if (item.undefined_length) {
                put_u32(body, undefined_length);
                body.insert(body.end(), content.begin(), content.end());
                write_tag(body, tags::item_delimitation);
                put_u32(body, 0);
            } else {
                put_u32(body, static_cast<std::uint32_t>(content.size()));
                body.insert(body.end(), content.begin(), content.end());
            }
        }
        if (e.undefined_length()) {
            write_header(out, e.key(), vr::SQ, undefined_length);
            out.insert(out.end(), body.begin(), body.end());
            write_tag(out, tags::sequence_delimitation);
            put_u32(out, 0);
        } else {
            if (body.size() >= undefined_length) throw error(error_code::value_too_long, "sequence too long");
            write_header(out, e.key(), vr::SQ, static_cast<std::uint32_t>(body.size()));
            out.insert(out.end(), body.begin(), body.end());
        }
    }

    static std::vector<std::uint8_t> encode_value(const data_element& e) {
        vr v = e.value_representation();
        std::vector<std::uint8_t> out;
        switch (kind_of(v)) {
            case value_kind::text: {
                const auto& s = e.text();
                out.assign(s.begin(), s.end());
                if (out.size() % 2 != 0) out.push_back(static_cast<std::uint8_t>(padding_byte(v)));
                break;
            }
            case value_kind::integers: {
                std::size_t w = integer_width(v);
                bool sign = integer_signed(v);
                std::int64_t lo = sign ? -(std::int64_t{1} << (8 * w - 1)) : 0;
                std::int64_t hi = sign ? (std::int64_t{1} << (8 * w - 1)) - 1 : (std::int64_t{1} << (8 * w)) - 1;
                for (auto x : e.integers()) {
                    if (x < lo || x > hi) {
                        throw error(error_code::value_too_long,
                                    e.key().str() + " value " + std::to_string(x) + " does not fit VR " +
                                        std::string(to_string(v)));
                    }
                    auto u = static_cast<std::uint32_t>(x);
                    if (w == 2) put_u16(out, static_cast<std::uint16_t>(u));
                    else put_u32(out, u);
                }
                break;
            }
            case value_kind::bytes: {
                const auto& b = e.bytes();
                out.assign(b.begin(), b.end());
                if (out.size() % 2 != 0) out.push_back(0);
                break;
            }
            case value_kind::sequence:
                break;
        }
        return out;
    }
};

void check_preamble(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < preamble_size + 4 || std::memcmp(bytes.data() + preamble_size, "DICM", 4) != 0) {
        throw error(error_code::malformed_preamble, "missing 128-byte preamble and DICM magic");
    }
}

struct file_header {
    std::string transfer_syntax;
    std::size_t dataset_start = 0;
};

file_header read_header(std::span<const std::uint8_t> bytes) {
    check_preamble(bytes);
    decoder meta_reader(bytes, true, preamble_size + 4);
    dataset meta = meta_reader.read_meta();
    auto ts = meta.text(tags::transfer_syntax_uid);
    if (!ts) throw error(error_code::unsupported_transfer_syntax, "file meta does not declare a transfer syntax");
    if (!is_supported_transfer_syntax(*ts)) {
        throw error(error_code::unsupported_transfer_syntax, "unsupported transfer syntax '" + *ts + "'");
    }
    return {*ts, meta_reader.position()};
}

}  // namespace

bool is_supported_transfer_syntax(std::string_view uid) noexcept {
    return uid == transfer_syntax::explicit_vr_little_endian || uid == transfer_syntax::implicit_vr_little_endian;
}

dataset decode_dataset(std::span<const std::uint8_t> bytes, std::string_view transfer_syntax_uid) {
    decoder d(bytes, explicit_for(transfer_syntax_uid));
    dataset ds = d.read_dataset(bytes.size(), 0, false);
    ds.set_transfer_syntax(std::string(transfer_syntax_uid));
    return ds;
}

std::vector<std::uint8_t> encode_dataset(const dataset& ds, std::string_view transfer_syntax_uid) {
    encoder enc(explicit_for(transfer_syntax_uid));
    std::vector<std::uint8_t> out;
    enc.write_dataset(out, ds, 0);
    return out;
}

std::size_t dataset_offset(std::span<const std::uint8_t> bytes) { return read_header(bytes).dataset_start; }

dataset parse_file(std::span<const std::uint8_t> bytes) {
    auto header = read_header(bytes);
    return decode_dataset(bytes.subspan(header.dataset_start), header.transfer_syntax);
}

std::vector<std::uint8_t> wrap_part10(std::string_view sop_class_uid, std::string_view sop_instance_uid,
                                      std::string_view transfer_syntax_uid, std::span<const std::uint8_t> dataset_bytes) {
    dataset meta;
    meta.set_bytes(tags::file_meta_version, vr::OB, {0x00, 0x01});
    meta.set_text(tags::media_storage_sop_class_uid, vr::UI, std::string(sop_class_uid));
    meta.set_text(tags::media_storage_sop_instance_uid, vr::UI, std::string(sop_instance_uid));
    meta.set_text(tags::transfer_syntax_uid, vr::UI, std::string(transfer_syntax_uid));
    meta.set_text(tags::implementation_class_uid, vr::UI, std::string(implementation_class_uid));
    meta.set_text(tags::implementation_version_name, vr::SH, std::string(implementation_version_name));

    encoder meta_encoder(true);
    std::vector<std::uint8_t> meta_body;
    meta_encoder.write_dataset(meta_body, meta, 0);

    std::vector<std::uint8_t> out(preamble_size + 4, 0);
    std::memcpy(out.data() + preamble_size, "DICM", 4);
    meta_encoder.write_element(
        out, data_element(tags::file_meta_group_length, vr::UL, integer_list{static_cast<std::int64_t>(meta_body.size())}),
        0);
    out.insert(out.end(), meta_body.begin(), meta_body.end());
    out.insert(out.end(), dataset_bytes.begin(), dataset_bytes.end());
    return out;
}

std::vector<std::uint8_t> serialize_file(const dataset& ds, std::string_view transfer_syntax_uid) {
    std::vector<std::uint8_t> body = encode_dataset(ds, transfer_syntax_uid);
    return wrap_part10(ds.text(tags::sop_class_uid).value_or(""), ds.text(tags::sop_instance_uid).value_or(""),
                       transfer_syntax_uid, body);
}

}  // namespace gridbox::dicom
