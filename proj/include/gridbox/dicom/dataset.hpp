/**
 * @file dataset.hpp
 * @brief In-memory DICOM dataset: tag-ordered data elements with typed values
 *
 * Values are held in one of four shapes depending on the VR:
 *   - text VRs keep the raw value string (backslash-separated for
 *     multi-valued VRs) with trailing padding removed;
 *   - US/SS/UL/SL keep a list of integers;
 *   - OB/OW/UN keep raw bytes;
 *   - SQ keeps a list of items, each itself a dataset.
 *
 * Whether an SQ, an item or the pixel data used an undefined length is kept
 * so that re-serialization reproduces the form it was read with, but it is
 * an encoding detail and does not take part in equality.
 */

#ifndef GRIDBOX_DICOM_DATASET_HPP
#define GRIDBOX_DICOM_DATASET_HPP

#include "gridbox/dicom/tag.hpp"
#include "gridbox/dicom/vr.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace gridbox::dicom {

struct sequence_item;

using byte_vector = std::vector<std::uint8_t>;
using integer_list = std::vector<std::int64_t>;
using item_list = std::vector<sequence_item>;
using element_value = std::variant<std::string, integer_list, byte_vector, item_list>;

class data_element {
public:
    data_element() = default;
    data_element(tag t, vr v, element_value value, bool undefined_length = false);

    [[nodiscard]] tag key() const noexcept { return tag_; }
    [[nodiscard]] vr value_representation() const noexcept { return vr_; }
    [[nodiscard]] const element_value& value() const noexcept { return value_; }
    [[nodiscard]] bool undefined_length() const noexcept { return undefined_length_; }

    /// Raw text value; throws value_parse_error when the VR is not textual.
    [[nodiscard]] const std::string& text() const;
    [[nodiscard]] const integer_list& integers() const;
    [[nodiscard]] const byte_vector& bytes() const;
    [[nodiscard]] const item_list& items() const;

    /// Text split on backslash for multi-valued VRs.
    [[nodiscard]] std::vector<std::string> text_values() const;

    friend bool operator==(const data_element& a, const data_element& b);

private:
    tag tag_{};
    vr vr_ = vr::UN;
    element_value value_;
    bool undefined_length_ = false;
};

class dataset {
public:
    using container = std::map<tag, data_element>;
    using const_iterator = container::const_iterator;

    dataset() = default;

    /// Inserts or replaces the element with the same tag.
    void set(data_element element);
    void set_text(tag t, vr v, std::string value);
    void set_integers(tag t, vr v, integer_list values);
    void set_bytes(tag t, vr v, byte_vector bytes);
    void set_items(tag t, item_list items, bool undefined_length = false);

    bool erase(tag t);

    [[nodiscard]] bool contains(tag t) const { return elements_.contains(t); }
    [[nodiscard]] const data_element* find(tag t) const;

    /// Text value with surrounding spaces trimmed; nullopt when the element is
    /// missing, non-textual or empty.
    [[nodiscard]] std::optional<std::string> text(tag t) const;

    /// First integer of a binary integer element, or the parsed value of an
    /// IS/DS text element when it is integral.
    [[nodiscard]] std::optional<std::int64_t> integer(tag t) const;

    [[nodiscard]] std::size_t size() const noexcept { return elements_.size(); }
    [[nodiscard]] bool empty() const noexcept { return elements_.empty(); }
    [[nodiscard]] const_iterator begin() const noexcept { return elements_.begin(); }
    [[nodiscard]] const_iterator end() const noexcept { return elements_.end(); }

    /// UID of the encoding this dataset was read from; absent when built in
    /// memory. Not part of equality.
    [[nodiscard]] const std::optional<std::string>& transfer_syntax() const noexcept {
        return transfer_syntax_;
    }
    void set_transfer_syntax(std::optional<std::string> uid) { transfer_syntax_ = std::move(uid); }

    friend bool operator==(const dataset& a, const dataset& b) { return a.elements_ == b.elements_; }

private:
    container elements_;
    std::optional<std::string> transfer_syntax_;
};

struct sequence_item {
    dataset content;
    bool undefined_length = false;

    friend bool operator==(const sequence_item& a, const sequence_item& b) {
        return a.content == b.content;
    }
};

/// Checks VR length and character-set rules for one element (not recursive).
/// Returns a description of the first violation, or nullopt.
[[nodiscard]] std::optional<std::string> check_value(const data_element& element);

}  // namespace gridbox::dicom

#endif  // GRIDBOX_DICOM_DATASET_HPP
