/**
 * @file xml.hpp
 * @brief Minimal strict XML document model used by every XML surface
 *
 * Covers the subset the node speaks: elements, attributes, character data,
 * CDATA, comments and processing instructions. DOCTYPE declarations are
 * rejected. Text is UTF-8 throughout.
 */

#ifndef GRIDBOX_XML_HPP
#define GRIDBOX_XML_HPP

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gridbox::xml {

struct node {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;
    std::vector<node> children;
    /// Character data directly inside this element. Whitespace-only text is
    /// dropped on parse when the element also has child elements.
    std::string text;

    node() = default;
    explicit node(std::string n) : name(std::move(n)) {}

    [[nodiscard]] const std::string* attribute(std::string_view key) const;
    [[nodiscard]] const node* child(std::string_view child_name) const;

    node& set(std::string key, std::string value);
    node& add(node child_node);

    bool operator==(const node&) const = default;
};

/// Throws gridbox::error(xml_error) on anything that is not well-formed.
[[nodiscard]] node parse(std::string_view document);

/// Deterministic rendering, two-space indentation, no XML declaration.
[[nodiscard]] std::string render(const node& root);

[[nodiscard]] std::string escape(std::string_view text, bool attribute);

/// True when `bytes` is well-formed UTF-8.
[[nodiscard]] bool valid_utf8(std::string_view bytes) noexcept;

}  // namespace gridbox::xml

#endif  // GRIDBOX_XML_HPP
