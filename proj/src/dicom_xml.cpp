#include "gridbox/dicom/xml_dataset.hpp"

#include "gridbox/dicom/dictionary.hpp"
#include "gridbox/error.hpp"
#include "gridbox/xml.hpp"

#include <charconv>

namespace gridbox::dicom {

namespace {

void append_code_point(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string bytes_to_text(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (char c : raw) {
        auto b = static_cast<unsigned char>(c);
        if (b >= 0x80) append_code_point(out, b);
        else if (b < 0x20 && b != '\t' && b != '\n') append_code_point(out, 0xE000u + b);
        else out.push_back(c);
    }
    return out;
}

std::string text_to_bytes(std::string_view utf8, tag t) {
    std::string out;
    std::size_t i = 0;
    while (i < utf8.size()) {
        auto b = static_cast<unsigned char>(utf8[i]);
        std::uint32_t cp;
        std::size_t n;
        if (b < 0x80) {
            cp = b;
            n = 1;
        } else if ((b & 0xE0) == 0xC0 && i + 1 < utf8.size()) {
            cp = ((b & 0x1Fu) << 6) | (static_cast<unsigned char>(utf8[i + 1]) & 0x3Fu);
            n = 2;
        } else if ((b & 0xF0) == 0xE0 && i + 2 < utf8.size()) {
            cp = ((b & 0x0Fu) << 12) | ((static_cast<unsigned char>(utf8[i + 1]) & 0x3Fu) << 6) |
                 (static_cast<unsigned char>(utf8[i + 2]) & 0x3Fu);
            n = 3;
        } else {
            throw error(error_code::value_parse_error, "character outside the supported repertoire in " + t.str());
        }
        if (cp <= 0xFF) out.push_back(static_cast<char>(cp));
        else if (cp >= 0xE000 && cp < 0xE020) out.push_back(static_cast<char>(cp - 0xE000));
        else throw error(error_code::value_parse_error, "character outside the supported repertoire in " + t.str());
        i += n;
    }
    return out;
}

std::string hex_encode(const byte_vector& bytes) {
    static constexpr char digits[] = "0123456789ABCDEF";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xF]);
    }
    return out;
}

byte_vector hex_decode(std::string_view text, tag t) {
    auto nibble = [&](char c) -> std::uint8_t {
        if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
        if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
        if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
        throw error(error_code::value_parse_error, "invalid hex digit in " + t.str());
    };
    if (text.size() % 2 != 0) throw error(error_code::value_parse_error, "odd hex length in " + t.str());
    byte_vector out;
    out.reserve(text.size() / 2);
    for (std::size_t i = 0; i < text.size(); i += 2) {
        out.push_back(static_cast<std::uint8_t>((nibble(text[i]) << 4) | nibble(text[i + 1])));
    }
    return out;
}

xml::node render_dataset(const dataset& ds, const char* name);

xml::node render_element(const data_element& e) {
    xml::node n("element");
    n.set("tag", e.key().str());
    n.set("vr", std::string(to_string(e.value_representation())));
    n.set("keyword", std::string(keyword_of(e.key())));
    if (e.key() == tags::pixel_data) {
        std::size_t length = 0;
        if (const auto* b = std::get_if<byte_vector>(&e.value())) length = b->size();
        n.set("length", std::to_string(length));
        return n;
    }
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::string>) {
                n.text = bytes_to_text(v);
            } else if constexpr (std::is_same_v<T, integer_list>) {
                for (std::size_t i = 0; i < v.size(); ++i) {
                    if (i != 0) n.text.push_back('\\');
                    n.text += std::to_string(v[i]);
                }
            } else if constexpr (std::is_same_v<T, byte_vector>) {
                n.text = hex_encode(v);
            } else {
                for (const auto& item : v) n.add(render_dataset(item.content, "item"));
            }
        },
        e.value());
    return n;
}

xml::node render_dataset(const dataset& ds, const char* name) {
    xml::node n(name);
    for (const auto& [t, e] : ds) n.add(render_element(e));
    return n;
}

dataset read_dataset(const xml::node& n, int depth);

data_element read_element(const xml::node& n, int depth) {
    if (n.name != "element") throw error(error_code::xml_error, "unexpected <" + n.name + "> in dataset");
    const auto* tag_attr = n.attribute("tag");
    if (tag_attr == nullptr) throw error(error_code::bad_tag_attribute, "element without tag attribute");
    auto t = tag::parse(*tag_attr);
    if (!t) throw error(error_code::bad_tag_attribute, "invalid tag attribute '" + *tag_attr + "'");
    const auto* vr_attr = n.attribute("vr");
    if (vr_attr == nullptr) throw error(error_code::bad_vr_attribute, "element " + t->str() + " without vr attribute");
    auto v = parse_vr(*vr_attr);
    if (!v) throw error(error_code::bad_vr_attribute, "unsupported vr '" + *vr_attr + "' on " + t->str());

    if (*t == tags::pixel_data) {
        const auto* length_attr = n.attribute("length");
        std::size_t length = 0;
        if (length_attr != nullptr) {
            auto [p, ec] = std::from_chars(length_attr->data(), length_attr->data() + length_attr->size(), length);
            if (ec != std::errc{} || p != length_attr->data() + length_attr->size() || length > (64u << 20)) {
                throw error(error_code::value_parse_error, "invalid pixel data length");
            }
        }
        if (kind_of(*v) != value_kind::bytes) throw error(error_code::bad_vr_attribute, "pixel data must be OB or OW");
        return data_element(*t, *v, byte_vector(length, 0));
    }

    switch (kind_of(*v)) {
        case value_kind::sequence: {
            if (!n.text.empty()) throw error(error_code::value_parse_error, "text inside sequence " + t->str());
            if (depth + 1 > 4) throw error(error_code::value_parse_error, "sequence nesting too deep at " + t->str());
            item_list items;
            for (const auto& child : n.children) {
                if (child.name != "item") throw error(error_code::xml_error, "expected <item> in " + t->str());
                items.push_back({read_dataset(child, depth + 1), false});
            }
            return data_element(*t, vr::SQ, std::move(items));
        }
        case value_kind::text:
            if (!n.children.empty()) throw error(error_code::xml_error, "nested markup in " + t->str());
            return data_element(*t, *v, text_to_bytes(n.text, *t));
        case value_kind::integers: {
            if (!n.children.empty()) throw error(error_code::xml_error, "nested markup in " + t->str());
            integer_list values;
            std::string_view text = n.text;
            if (!text.empty()) {
                std::size_t start = 0;
                for (;;) {
                    auto pos = text.find('\\', start);
                    auto part = text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
                    std::int64_t x = 0;
                    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), x);
                    if (part.empty() || ec != std::errc{} || p != part.data() + part.size()) {
                        throw error(error_code::value_parse_error, "'" + std::string(part) + "' is not an integer in " + t->str());
                    }
                    values.push_back(x);
                    if (pos == std::string_view::npos) break;
                    start = pos + 1;
                }
            }
            data_element e(*t, *v, std::move(values));
            if (auto problem = check_value(e)) throw error(error_code::value_parse_error, *problem + " in " + t->str());
            return e;
        }
        case value_kind::bytes:
            if (!n.children.empty()) throw error(error_code::xml_error, "nested markup in " + t->str());
            return data_element(*t, *v, hex_decode(n.text, *t));
    }
    throw error(error_code::bad_vr_attribute, "unsupported vr");
}

dataset read_dataset(const xml::node& n, int depth) {
    if (!n.text.empty()) throw error(error_code::xml_error, "unexpected text in <" + n.name + ">");
    dataset ds;
    for (const auto& child : n.children) {
        data_element e = read_element(child, depth);
        if (ds.contains(e.key())) throw error(error_code::bad_tag_attribute, "duplicate tag " + e.key().str());
        ds.set(std::move(e));
    }
    return ds;
}

}  // namespace

xml_dataset dataset_to_xml(const dataset& ds) { return {xml::render(render_dataset(ds, "dicom"))}; }

dataset xml_to_dataset(const xml_dataset& doc) {
    xml::node root = xml::parse(doc.document);
    if (root.name != "dicom") throw error(error_code::xml_error, "root element must be <dicom>");
    return read_dataset(root, 0);
}

}  // namespace gridbox::dicom
