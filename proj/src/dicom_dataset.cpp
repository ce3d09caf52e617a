#include "gridbox/dicom/dataset.hpp"

#include "gridbox/error.hpp"

#include <charconv>

namespace gridbox::dicom {

namespace {

bool value_matches_vr(vr v, const element_value& value) {
    switch (kind_of(v)) {
        case value_kind::text: return std::holds_alternative<std::string>(value);
        case value_kind::integers: return std::holds_alternative<integer_list>(value);
        case value_kind::bytes: return std::holds_alternative<byte_vector>(value);
        case value_kind::sequence: return std::holds_alternative<item_list>(value);
    }
    return false;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(' ');
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(' ');
    return std::string(s.substr(b, e - b + 1));
}

bool printable(char c) { return c >= 0x20 && c < 0x7F; }

}  // namespace

data_element::data_element(tag t, vr v, element_value value, bool undefined_length)
    : tag_(t), vr_(v), value_(std::move(value)), undefined_length_(undefined_length) {
    if (!value_matches_vr(v, value_)) {
        throw error(error_code::value_parse_error,
                    "value shape does not match VR " + std::string(to_string(v)) + " for " + t.str());
    }
}

const std::string& data_element::text() const {
    if (const auto* s = std::get_if<std::string>(&value_)) return *s;
    throw error(error_code::value_parse_error, tag_.str() + " is not a text element");
}

const integer_list& data_element::integers() const {
    if (const auto* v = std::get_if<integer_list>(&value_)) return *v;
    throw error(error_code::value_parse_error, tag_.str() + " is not an integer element");
}

const byte_vector& data_element::bytes() const {
    if (const auto* v = std::get_if<byte_vector>(&value_)) return *v;
    throw error(error_code::value_parse_error, tag_.str() + " is not a byte element");
}

const item_list& data_element::items() const {
    if (const auto* v = std::get_if<item_list>(&value_)) return *v;
    throw error(error_code::value_parse_error, tag_.str() + " is not a sequence");
}

std::vector<std::string> data_element::text_values() const {
    const std::string& raw = text();
    std::vector<std::string> out;
    if (raw.empty()) return out;
    if (!multi_valued_text(vr_)) {
        out.push_back(raw);
        return out;
    }
    std::size_t start = 0;
    for (;;) {
        auto pos = raw.find('\\', start);
        out.push_back(raw.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

bool operator==(const data_element& a, const data_element& b) {
    return a.tag_ == b.tag_ && a.vr_ == b.vr_ && a.value_ == b.value_;
}

void dataset::set(data_element element) {
    auto key = element.key();
    elements_.insert_or_assign(key, std::move(element));
}

void dataset::set_text(tag t, vr v, std::string value) { set(data_element(t, v, std::move(value))); }

void dataset::set_integers(tag t, vr v, integer_list values) {
    set(data_element(t, v, std::move(values)));
}

void dataset::set_bytes(tag t, vr v, byte_vector bytes) { set(data_element(t, v, std::move(bytes))); }

void dataset::set_items(tag t, item_list items, bool undefined_length) {
    set(data_element(t, vr::SQ, std::move(items), undefined_length));
}

bool dataset::erase(tag t) { return elements_.erase(t) > 0; }

const data_element* dataset::find(tag t) const {
    auto it = elements_.find(t);
    return it == elements_.end() ? nullptr : &it->second;
}

std::optional<std::string> dataset::text(tag t) const {
    const auto* e = find(t);
    if (e == nullptr) return std::nullopt;
    const auto* s = std::get_if<std::string>(&e->value());
    if (s == nullptr) return std::nullopt;
    auto trimmed = trim(*s);
    if (trimmed.empty()) return std::nullopt;
    return trimmed;
}

std::optional<std::int64_t> dataset::integer(tag t) const {
    const auto* e = find(t);
    if (e == nullptr) return std::nullopt;
    if (const auto* ints = std::get_if<integer_list>(&e->value())) {
        if (ints->empty()) return std::nullopt;
        return ints->front();
    }
    if (const auto* s = std::get_if<std::string>(&e->value())) {
        auto first = trim(s->substr(0, s->find('\\')));
        std::int64_t out = 0;
        if (!first.empty() && first.front() == '+') first.erase(0, 1);
        auto [ptr, ec] = std::from_chars(first.data(), first.data() + first.size(), out);
        if (ec == std::errc{} && ptr == first.data() + first.size() && !first.empty()) return out;
    }
    return std::nullopt;
}

std::optional<std::string> check_value(const data_element& element) {
    vr v = element.value_representation();
    if (kind_of(v) == value_kind::integers) {
        bool is_signed = integer_signed(v);
        std::int64_t lo = is_signed ? (integer_width(v) == 2 ? -32768 : INT32_MIN) : 0;
        std::int64_t hi = integer_width(v) == 2 ? (is_signed ? 32767 : 65535)
                                                : (is_signed ? INT32_MAX : static_cast<std::int64_t>(UINT32_MAX));
        for (auto x : element.integers()) {
            if (x < lo || x > hi) return "integer out of range for " + std::string(to_string(v));
        }
        return std::nullopt;
    }
    if (kind_of(v) != value_kind::text) return std::nullopt;

    const std::string& raw = element.text();
    std::size_t limit = max_text_length(v);
    std::vector<std::string> values =
        multi_valued_text(v) ? element.text_values() : std::vector<std::string>{raw};
    for (const auto& value : values) {
        if (limit != 0 && value.size() > limit) {
            return std::string(to_string(v)) + " value longer than " + std::to_string(limit);
        }
        for (char c : value) {
            bool ok = false;
            switch (v) {
                case vr::UI: ok = (c >= '0' && c <= '9') || c == '.'; break;
                case vr::CS: ok = (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == ' ' || c == '_'; break;
                case vr::DA: ok = (c >= '0' && c <= '9') || c == '-'; break;
                case vr::TM:
                case vr::DT: ok = (c >= '0' && c <= '9') || c == '.' || c == '-' || c == '+' || c == ':'; break;
                case vr::IS: ok = (c >= '0' && c <= '9') || c == '+' || c == '-' || c == ' '; break;
                case vr::DS:
                    ok = (c >= '0' && c <= '9') || c == '+' || c == '-' || c == '.' || c == 'e' || c == 'E' || c == ' ';
                    break;
                case vr::LT:
                case vr::ST: ok = printable(c) || c == '\r' || c == '\n' || c == '\t' || c == '\f'; break;
                default: ok = printable(c) && c != '\\'; break;
            }
            if (!ok) return std::string(to_string(v)) + " value contains an invalid character";
        }
    }
    return std::nullopt;
}

}  // namespace gridbox::dicom
