#include "gridbox/xml.hpp"

#include "gridbox/error.hpp"

#include <cstdint>

namespace gridbox::xml {

namespace {

constexpr int max_depth = 256;

[[noreturn]] void fail(const std::string& what, std::size_t pos) {
    throw error(error_code::xml_error, what + " at offset " + std::to_string(pos));
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

bool is_name_start(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_' || c == ':';
}

bool is_name_char(char c) {
    return is_name_start(c) || (c >= '0' && c <= '9') || c == '-' || c == '.';
}

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

class reader {
public:
    explicit reader(std::string_view doc) : doc_(doc) {}

    node document() {
        skip_misc();
        if (at_end() || peek() != '<') fail("expected root element", pos_);
        node root = element(0);
        skip_misc();
        if (!at_end()) fail("content after root element", pos_);
        return root;
    }

private:
    std::string_view doc_;
    std::size_t pos_ = 0;

    [[nodiscard]] bool at_end() const { return pos_ >= doc_.size(); }
    [[nodiscard]] char peek() const { return doc_[pos_]; }
    [[nodiscard]] bool starts_with(std::string_view s) const {
        return doc_.substr(pos_, s.size()) == s;
    }

    void skip_spaces() {
        while (!at_end() && is_space(peek())) ++pos_;
    }

    void skip_until(std::string_view terminator, const char* what) {
        auto found = doc_.find(terminator, pos_);
        if (found == std::string_view::npos) fail(std::string("unterminated ") + what, pos_);
        pos_ = found + terminator.size();
    }

    // Whitespace, comments and processing instructions outside the root.
    void skip_misc() {
        for (;;) {
            skip_spaces();
            if (starts_with("<?")) {
                skip_until("?>", "processing instruction");
            } else if (starts_with("<!--")) {
                skip_until("-->", "comment");
            } else if (starts_with("<!DOCTYPE") || starts_with("<!doctype")) {
                fail("DOCTYPE is not supported", pos_);
            } else {
                return;
            }
        }
    }

    std::string name() {
        std::size_t start = pos_;
        if (at_end() || !is_name_start(peek())) fail("expected name", pos_);
        while (!at_end() && is_name_char(peek())) ++pos_;
        return std::string(doc_.substr(start, pos_ - start));
    }

    void expect(char c) {
        if (at_end() || peek() != c) fail(std::string("expected '") + c + "'", pos_);
        ++pos_;
    }

    void reference(std::string& out) {
        std::size_t start = pos_;
        auto semi = doc_.find(';', pos_);
        if (semi == std::string_view::npos || semi - pos_ > 12) fail("bad entity reference", start);
        std::string_view ref = doc_.substr(pos_ + 1, semi - pos_ - 1);
        pos_ = semi + 1;
        if (ref == "lt") out.push_back('<');
        else if (ref == "gt") out.push_back('>');
        else if (ref == "amp") out.push_back('&');
        else if (ref == "quot") out.push_back('"');
        else if (ref == "apos") out.push_back('\'');
        else if (ref.size() > 1 && ref[0] == '#') {
            std::uint32_t cp = 0;
            bool hex = ref[1] == 'x';
            std::string_view digits = ref.substr(hex ? 2 : 1);
            if (digits.empty()) fail("empty character reference", start);
            for (char c : digits) {
                std::uint32_t d;
                if (c >= '0' && c <= '9') d = static_cast<std::uint32_t>(c - '0');
                else if (hex && c >= 'a' && c <= 'f') d = static_cast<std::uint32_t>(c - 'a' + 10);
                else if (hex && c >= 'A' && c <= 'F') d = static_cast<std::uint32_t>(c - 'A' + 10);
                else fail("bad character reference", start);
                cp = cp * (hex ? 16 : 10) + d;
                if (cp > 0x10FFFF) fail("character reference out of range", start);
            }
            if (cp == 0 || (cp >= 0xD800 && cp <= 0xDFFF)) fail("invalid character reference", start);
            append_utf8(out, cp);
        } else {
            fail("unknown entity", start);
        }
    }

    std::string attribute_value() {
        if (at_end()) fail("expected attribute value", pos_);
        char quote = peek();
        if (quote != '"' && quote != '\'') fail("expected quote", pos_);
        ++pos_;
        std::string value;
        for (;;) {
            if (at_end()) fail("unterminated attribute value", pos_);
            char c = peek();
            if (c == quote) {
                ++pos_;
                return value;
            }
            if (c == '<') fail("'<' in attribute value", pos_);
            if (c == '&') {
                reference(value);
            } else {
                value.push_back(c);
                ++pos_;
            }
        }
    }

    node element(int depth) {
        if (depth > max_depth) fail("nesting too deep", pos_);
        expect('<');
        node n(name());
        for (;;) {
            bool had_space = !at_end() && is_space(peek());
            skip_spaces();
            if (at_end()) fail("unterminated start tag", pos_);
            if (starts_with("/>")) {
                pos_ += 2;
                return n;
            }
            if (peek() == '>') {
                ++pos_;
                break;
            }
            if (!had_space) fail("expected whitespace before attribute", pos_);
            std::string key = name();
            skip_spaces();
            expect('=');
            skip_spaces();
            std::string value = attribute_value();
            if (n.attribute(key) != nullptr) fail("duplicate attribute " + key, pos_);
            n.attributes.emplace_back(std::move(key), std::move(value));
        }
        content(n, depth);
        return n;
    }

    void content(node& n, int depth) {
        for (;;) {
            if (at_end()) fail("unterminated element " + n.name, pos_);
            char c = peek();
            if (c == '<') {
                if (starts_with("</")) {
                    pos_ += 2;
                    std::string closing = name();
                    if (closing != n.name) fail("mismatched closing tag " + closing, pos_);
                    skip_spaces();
                    expect('>');
                    if (!n.children.empty()) {
                        bool blank = true;
                        for (char t : n.text) blank = blank && is_space(t);
                        if (blank) n.text.clear();
                    }
                    return;
                }
                if (starts_with("<!--")) {
                    skip_until("-->", "comment");
                } else if (starts_with("<![CDATA[")) {
                    pos_ += 9;
                    auto end = doc_.find("]]>", pos_);
                    if (end == std::string_view::npos) fail("unterminated CDATA", pos_);
                    n.text.append(doc_.substr(pos_, end - pos_));
                    pos_ = end + 3;
                } else if (starts_with("<?")) {
                    skip_until("?>", "processing instruction");
                } else if (starts_with("<!")) {
                    fail("unsupported markup declaration", pos_);
                } else {
                    n.children.push_back(element(depth + 1));
                }
            } else if (c == '&') {
                reference(n.text);
            } else {
                if (c == '>' && pos_ >= 2 && doc_.substr(pos_ - 2, 2) == "]]") fail("']]>' in content", pos_);
                n.text.push_back(c);
                ++pos_;
            }
        }
    }
};

void render_into(std::string& out, const node& n, int indent) {
    out.append(static_cast<std::size_t>(indent) * 2, ' ');
    out.push_back('<');
    out += n.name;
    for (const auto& [k, v] : n.attributes) {
        out.push_back(' ');
        out += k;
        out += "=\"";
        out += escape(v, true);
        out.push_back('"');
    }
    if (n.children.empty() && n.text.empty()) {
        out += "/>";
        return;
    }
    out.push_back('>');
    if (n.children.empty()) {
        out += escape(n.text, false);
    } else {
        for (const auto& child : n.children) {
            out.push_back('\n');
            render_into(out, child, indent + 1);
        }
        out.push_back('\n');
        out.append(static_cast<std::size_t>(indent) * 2, ' ');
    }
    out += "</";
    out += n.name;
    out.push_back('>');
}

}  // namespace

const std::string* node::attribute(std::string_view key) const {
    for (const auto& [k, v] : attributes) {
        if (k == key) return &v;
    }
    return nullptr;
}

const node* node::child(std::string_view child_name) const {
    for (const auto& c : children) {
        if (c.name == child_name) return &c;
    }
    return nullptr;
}

node& node::set(std::string key, std::string value) {
    for (auto& [k, v] : attributes) {
        if (k == key) {
            v = std::move(value);
            return *this;
        }
    }
    attributes.emplace_back(std::move(key), std::move(value));
    return *this;
}

node& node::add(node child_node) {
    children.push_back(std::move(child_node));
    return children.back();
}

bool valid_utf8(std::string_view bytes) noexcept {
    std::size_t i = 0;
    while (i < bytes.size()) {
        auto c = static_cast<unsigned char>(bytes[i]);
        std::size_t extra;
        std::uint32_t cp;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            extra = 1;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            extra = 2;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            extra = 3;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + extra >= bytes.size()) return false;
        for (std::size_t k = 1; k <= extra; ++k) {
            auto cc = static_cast<unsigned char>(bytes[i + k]);
            if ((cc & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        static constexpr std::uint32_t min_for[] = {0, 0x80, 0x800, 0x10000};
        if (cp < min_for[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
        i += extra + 1;
    }
    return true;
}

node parse(std::string_view document) {
    if (!valid_utf8(document)) throw error(error_code::xml_error, "document is not valid UTF-8");
    for (char c : document) {
        auto u = static_cast<unsigned char>(c);
        if (u < 0x20 && c != '\t' && c != '\n' && c != '\r') {
            throw error(error_code::xml_error, "control character in document");
        }
    }
    return reader(document).document();
}

std::string escape(std::string_view text, bool attribute) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += attribute ? "&quot;" : "\""; break;
            case '\r': out += "&#13;"; break;
            case '\n': out += attribute ? "&#10;" : "\n"; break;
            case '\t': out += attribute ? "&#9;" : "\t"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string render(const node& root) {
    std::string out;
    render_into(out, root, 0);
    return out;
}

}  // namespace gridbox::xml
