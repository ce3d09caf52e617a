/**
 * @file formal_query.hpp
 * @brief The Formal Query (FQ) language: types, XML codec, SQL translation
 *        and a brute-force reference evaluator
 *
 * Wire form (namespace-free):
 * @code
 * <Query>
 *   <Constraint>
 *     <Conjunction>and</Conjunction>
 *     <Attribute>Patient.Sex</Attribute>
 *     <Value>F</Value>
 *     <Comparison>EQUAL</Comparison>
 *   </Constraint>
 *   <QueryOrder>Study.StudyDate DESC</QueryOrder>
 *   <QueryLimit>10</QueryLimit>
 *   <QueryOffset>5</QueryOffset>
 *   <QueryNoData>false</QueryNoData>
 * </Query>
 * @endcode
 *
 * Each constraint's conjunction joins it to the preceding constraint; AND
 * binds tighter than OR. The first constraint's conjunction is ignored.
 */

#ifndef GRIDBOX_FORMAL_QUERY_HPP
#define GRIDBOX_FORMAL_QUERY_HPP

#include "gridbox/dicom/summary.hpp"
#include "gridbox/xml.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gridbox::fq {

enum class comparison { equal, like, greater, greater_or_equal, smaller, smaller_or_equal, not_equal };
enum class conjunction { and_, or_ };
enum class attribute_type { text, integer };

[[nodiscard]] std::string_view to_string(comparison c) noexcept;
[[nodiscard]] std::string_view to_string(conjunction c) noexcept;

/// One queryable column of the metadata schema.
struct attribute_info {
    std::string_view name;    ///< FQ spelling, e.g. "Patient.Sex"
    std::string_view table;   ///< SQL table
    std::string_view column;  ///< SQL column
    attribute_type type;

    [[nodiscard]] std::string qualified_column() const;
};

/// The 15 queryable attributes, in schema order.
[[nodiscard]] std::span<const attribute_info> schema_attributes() noexcept;
[[nodiscard]] const attribute_info* find_attribute(std::string_view name) noexcept;

/// Non-queryable metadata carried in result rows.
inline constexpr std::string_view pixel_spacing_attribute = "Image.PixelSpacing";

/// Literal spelling of SQL NULL in constraint values.
inline constexpr std::string_view null_literal = "NULL";

struct constraint {
    conjunction join = conjunction::and_;
    std::string attribute;
    comparison op = comparison::equal;
    std::string value;

    bool operator==(const constraint&) const = default;
};

struct order_key {
    std::string attribute;
    bool descending = false;

    bool operator==(const order_key&) const = default;
};

struct formal_query {
    std::vector<constraint> constraints;
    std::vector<order_key> order;
    std::optional<std::int64_t> limit;
    std::optional<std::int64_t> offset;
    bool no_data = false;

    bool operator==(const formal_query&) const = default;
};

/// Throws the matching error_code when the invariants do not hold: EmptyQuery,
/// UnknownAttribute, or InvalidQuery for bad literals and limit/offset misuse.
void validate(const formal_query& q);

/// Parses and validates. Errors: XmlError, UnknownAttribute, BadComparison,
/// BadConjunction, EmptyQuery, InvalidQuery.
[[nodiscard]] formal_query parse_fq(std::string_view xml);
[[nodiscard]] std::string serialize_fq(const formal_query& q);

/// Element-level forms of parse_fq/serialize_fq, for embedding a query in a
/// larger document.
[[nodiscard]] formal_query query_from_xml(const xml::node& root);
[[nodiscard]] xml::node query_to_xml(const formal_query& q);

/**
 * SQL text for a valid query. Grammar (the contract with the metadata store):
 *
 *   SELECT image.lfn{, <col>} FROM patient
 *     JOIN study ON study.patient_pseudo_id = patient.patient_pseudo_id
 *     JOIN series ON series.study_uid = study.study_uid
 *     JOIN image ON image.series_uid = series.series_uid
 *   WHERE <or-expr>
 *   [ORDER BY <col> ASC|DESC{, <col> ASC|DESC}] [LIMIT n [OFFSET m]]
 *
 *   or-expr  := and-run | "(" and-run {" OR " and-run} ")"
 *   and-run  := "(" pred {" AND " pred} ")"
 *   pred     := <col> op literal | <col> IS [NOT] NULL | <col> LIKE 'pattern'
 *
 * The projected columns after image.lfn are the QueryOrder columns in order.
 * ORDER BY is present whenever the query has a QueryOrder or a limit, and
 * always ends with image.lfn ASC so that ordering is total.
 */
[[nodiscard]] std::string translate(const formal_query& q);

/// Attribute name -> value (integers as decimal text, absent as nullopt).
using attribute_map = std::map<std::string, std::optional<std::string>, std::less<>>;

/// One ground-truth image: its LFN plus every schema attribute.
struct metadata_record {
    std::string lfn;
    attribute_map attributes;

    bool operator==(const metadata_record&) const = default;
};

/// Builds the record for an ingested image. The summary's patient_id is
/// expected to already be the pseudonym.
[[nodiscard]] metadata_record make_record(const dicom::image_summary& summary, const std::string& lfn);

/// SQL-compatible ordering of two attribute values: null sorts first, integer
/// attributes compare numerically, text compares bytewise.
[[nodiscard]] int compare_values(const attribute_info& attr, const std::optional<std::string>& a,
                                 const std::optional<std::string>& b);

/// Case-sensitive SQL LIKE: '%' any run, '_' one code point, no escape.
[[nodiscard]] bool like_match(std::string_view text, std::string_view pattern);

/// True when the record satisfies the query's predicate.
[[nodiscard]] bool matches(const formal_query& q, const metadata_record& record);

/// Brute-force evaluation: filter, order (LFN tie-break), offset, limit.
[[nodiscard]] std::vector<std::string> evaluate(const formal_query& q, std::span<const metadata_record> records);

}  // namespace gridbox::fq

#endif  // GRIDBOX_FORMAL_QUERY_HPP
