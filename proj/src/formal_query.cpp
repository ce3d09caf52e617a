#include "gridbox/formal_query.hpp"

#include "gridbox/error.hpp"
#include "gridbox/xml.hpp"

#include <algorithm>
#include <array>
#include <charconv>

namespace gridbox::fq {

namespace {

constexpr std::array<attribute_info, 15> attributes{{
    {"Patient.PatientID", "patient", "patient_pseudo_id", attribute_type::text},
    {"Patient.Sex", "patient", "sex", attribute_type::text},
    {"Patient.BirthYear", "patient", "birth_year", attribute_type::integer},
    {"Study.StudyInstanceUID", "study", "study_uid", attribute_type::text},
    {"Study.StudyDate", "study", "study_date", attribute_type::text},
    {"Study.StudyDescription", "study", "description", attribute_type::text},
    {"Series.SeriesInstanceUID", "series", "series_uid", attribute_type::text},
    {"Series.Modality", "series", "modality", attribute_type::text},
    {"Series.Laterality", "series", "laterality", attribute_type::text},
    {"Series.ViewCode", "series", "view_code", attribute_type::text},
    {"Image.SOPInstanceUID", "image", "sop_uid", attribute_type::text},
    {"Image.LFN", "image", "lfn", attribute_type::text},
    {"Image.Rows", "image", "rows", attribute_type::integer},
    {"Image.Columns", "image", "columns", attribute_type::integer},
    {"Image.BitsAllocated", "image", "bits_allocated", attribute_type::integer},
}};

constexpr std::string_view from_clause =
    " FROM patient"
    " JOIN study ON study.patient_pseudo_id = patient.patient_pseudo_id"
    " JOIN series ON series.study_uid = study.study_uid"
    " JOIN image ON image.series_uid = series.series_uid";

constexpr std::array<std::pair<std::string_view, comparison>, 7> comparison_names{{
    {"EQUAL", comparison::equal},
    {"LIKE", comparison::like},
    {"GREATER", comparison::greater},
    {"GREATER_OR_EQUAL", comparison::greater_or_equal},
    {"SMALLER", comparison::smaller},
    {"SMALLER_OR_EQUAL", comparison::smaller_or_equal},
    {"NOT_EQUAL", comparison::not_equal},
}};

std::optional<std::int64_t> parse_int(std::string_view text) {
    if (text.empty()) return std::nullopt;
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return out;
}

std::string_view trim(std::string_view s) {
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

bool is_null_test(const constraint& c) {
    return c.value == null_literal && (c.op == comparison::equal || c.op == comparison::not_equal);
}

const attribute_info& attribute_or_throw(std::string_view name) {
    const auto* a = find_attribute(name);
    if (a == nullptr) throw error(error_code::unknown_attribute, "unknown attribute '" + std::string(name) + "'");
    return *a;
}

std::string sql_literal(std::string_view text) {
    std::string out = "'";
    for (char c : text) {
        if (c == '\'') out += "''";
        else out.push_back(c);
    }
    out.push_back('\'');
    return out;
}

std::string_view sql_operator(comparison c) {
    switch (c) {
        case comparison::equal: return "=";
        case comparison::like: return "LIKE";
        case comparison::greater: return ">";
        case comparison::greater_or_equal: return ">=";
        case comparison::smaller: return "<";
        case comparison::smaller_or_equal: return "<=";
        case comparison::not_equal: return "<>";
    }
    return "=";
}

std::string predicate_sql(const constraint& c) {
    const auto& attr = attribute_or_throw(c.attribute);
    std::string col = attr.qualified_column();
    if (is_null_test(c)) return col + (c.op == comparison::equal ? " IS NULL" : " IS NOT NULL");
    if (c.op == comparison::like) return col + " LIKE " + sql_literal(c.value);
    std::string rhs = attr.type == attribute_type::integer ? std::to_string(*parse_int(c.value)) : sql_literal(c.value);
    return col + " " + std::string(sql_operator(c.op)) + " " + rhs;
}

/// Splits the flat constraint list into AND-runs separated by OR.
std::vector<std::vector<const constraint*>> and_runs(const formal_query& q) {
    std::vector<std::vector<const constraint*>> runs;
    for (std::size_t i = 0; i < q.constraints.size(); ++i) {
        if (i == 0 || q.constraints[i].join == conjunction::or_) runs.emplace_back();
        runs.back().push_back(&q.constraints[i]);
    }
    return runs;
}

/// Exactly one of the given child elements, or none.
const xml::node* single_child(const xml::node& parent, std::string_view name) {
    const xml::node* found = nullptr;
    for (const auto& c : parent.children) {
        if (c.name != name) continue;
        if (found != nullptr) {
            throw error(error_code::xml_error, "element <" + std::string(name) + "> repeated in <" + parent.name + ">");
        }
        found = &c;
    }
    return found;
}

void require_leaf(const xml::node& n) {
    if (!n.children.empty()) throw error(error_code::xml_error, "<" + n.name + "> must contain text only");
}

std::int64_t parse_count(const xml::node& n) {
    require_leaf(n);
    auto v = parse_int(trim(n.text));
    if (!v || *v < 0) throw error(error_code::invalid_query, "<" + n.name + "> must be a non-negative integer");
    return *v;
}

struct parsed_constraint {
    constraint value;
    bool has_conjunction = false;
};

parsed_constraint parse_constraint(const xml::node& n) {
    for (const auto& c : n.children) {
        if (c.name != "Conjunction" && c.name != "Attribute" && c.name != "Value" && c.name != "Comparison") {
            throw error(error_code::xml_error, "unexpected element <" + c.name + "> in <Constraint>");
        }
    }
    if (!trim(n.text).empty()) throw error(error_code::xml_error, "stray text in <Constraint>");

    constraint out;
    const auto* conj = single_child(n, "Conjunction");
    if (conj != nullptr) {
        require_leaf(*conj);
        auto t = trim(conj->text);
        if (t == "and") out.join = conjunction::and_;
        else if (t == "or") out.join = conjunction::or_;
        else throw error(error_code::bad_conjunction, "conjunction must be 'and' or 'or', got '" + std::string(t) + "'");
    }

    const auto* attr = single_child(n, "Attribute");
    if (attr == nullptr) throw error(error_code::invalid_query, "<Constraint> lacks <Attribute>");
    require_leaf(*attr);
    out.attribute = std::string(trim(attr->text));

    if (const auto* cmp = single_child(n, "Comparison")) {
        require_leaf(*cmp);
        auto t = trim(cmp->text);
        auto it = std::find_if(comparison_names.begin(), comparison_names.end(),
                               [&](const auto& p) { return p.first == t; });
        if (it == comparison_names.end()) {
            throw error(error_code::bad_comparison, "unknown comparison '" + std::string(t) + "'");
        }
        out.op = it->second;
    }

    const auto* value = single_child(n, "Value");
    if (value == nullptr) throw error(error_code::invalid_query, "<Constraint> lacks <Value>");
    require_leaf(*value);
    out.value = value->text;
    return {std::move(out), conj != nullptr};
}

order_key parse_order(const xml::node& n) {
    require_leaf(n);
    auto text = trim(n.text);
    auto space = text.find_first_of(" \t\r\n");
    order_key out;
    out.attribute = std::string(text.substr(0, space));
    if (space != std::string_view::npos) {
        auto dir = trim(text.substr(space));
        if (dir == "DESC" || dir == "desc") out.descending = true;
        else if (dir != "ASC" && dir != "asc") {
            throw error(error_code::invalid_query, "order direction must be ASC or DESC, got '" + std::string(dir) + "'");
        }
    }
    return out;
}

/// Decodes one UTF-8 code point starting at i; advances i.
std::size_t next_code_point(std::string_view s, std::size_t i) {
    auto lead = static_cast<unsigned char>(s[i]);
    std::size_t len = lead < 0x80 ? 1 : lead < 0xE0 ? 2 : lead < 0xF0 ? 3 : 4;
    return std::min(s.size(), i + len);
}

}  // namespace

std::string_view to_string(comparison c) noexcept {
    for (const auto& [name, value] : comparison_names) {
        if (value == c) return name;
    }
    return "EQUAL";
}

std::string_view to_string(conjunction c) noexcept { return c == conjunction::or_ ? "or" : "and"; }

std::string attribute_info::qualified_column() const { return std::string(table) + "." + std::string(column); }

std::span<const attribute_info> schema_attributes() noexcept { return attributes; }

const attribute_info* find_attribute(std::string_view name) noexcept {
    for (const auto& a : attributes) {
        if (a.name == name) return &a;
    }
    return nullptr;
}

void validate(const formal_query& q) {
    if (q.constraints.empty()) throw error(error_code::empty_query, "query has no constraints");
    for (const auto& c : q.constraints) {
        const auto& attr = attribute_or_throw(c.attribute);
        if (c.value.empty()) throw error(error_code::invalid_query, "empty value for " + c.attribute);
        if (attr.type == attribute_type::integer && c.op != comparison::like && !is_null_test(c) &&
            !parse_int(c.value)) {
            throw error(error_code::invalid_query, c.attribute + " needs an integer value, got '" + c.value + "'");
        }
    }
    for (const auto& o : q.order) (void)attribute_or_throw(o.attribute);
    if (q.limit && *q.limit < 0) throw error(error_code::invalid_query, "negative limit");
    if (q.offset && *q.offset < 0) throw error(error_code::invalid_query, "negative offset");
    if (q.offset && !q.limit) throw error(error_code::invalid_query, "QueryOffset requires QueryLimit");
}

formal_query parse_fq(std::string_view document) { return query_from_xml(xml::parse(document)); }

formal_query query_from_xml(const xml::node& root) {
    if (root.name != "Query") throw error(error_code::xml_error, "root element must be <Query>, got <" + root.name + ">");
    if (!trim(root.text).empty()) throw error(error_code::xml_error, "stray text in <Query>");

    formal_query q;
    for (const auto& child : root.children) {
        if (child.name == "Constraint") {
            auto [c, has_conjunction] = parse_constraint(child);
            if (q.constraints.empty()) {
                c.join = conjunction::and_;
            } else if (!has_conjunction) {
                throw error(error_code::bad_conjunction,
                            "constraint " + std::to_string(q.constraints.size() + 1) + " lacks a <Conjunction>");
            }
            q.constraints.push_back(std::move(c));
        } else if (child.name == "QueryOrder") {
            q.order.push_back(parse_order(child));
        } else if (child.name != "QueryLimit" && child.name != "QueryOffset" && child.name != "QueryNoData") {
            throw error(error_code::xml_error, "unexpected element <" + child.name + "> in <Query>");
        }
    }
    if (const auto* n = single_child(root, "QueryLimit")) q.limit = parse_count(*n);
    if (const auto* n = single_child(root, "QueryOffset")) q.offset = parse_count(*n);
    if (const auto* n = single_child(root, "QueryNoData")) {
        require_leaf(*n);
        auto t = trim(n->text);
        if (t == "true" || t == "1") q.no_data = true;
        else if (t == "false" || t == "0") q.no_data = false;
        else throw error(error_code::invalid_query, "<QueryNoData> must be a boolean");
    }
    validate(q);
    return q;
}

std::string serialize_fq(const formal_query& q) { return xml::render(query_to_xml(q)); }

xml::node query_to_xml(const formal_query& q) {
    xml::node root("Query");
    for (std::size_t i = 0; i < q.constraints.size(); ++i) {
        const auto& c = q.constraints[i];
        xml::node n("Constraint");
        xml::node conj("Conjunction");
        conj.text = std::string(to_string(i == 0 ? conjunction::and_ : c.join));
        n.add(std::move(conj));
        xml::node attr("Attribute");
        attr.text = c.attribute;
        n.add(std::move(attr));
        xml::node value("Value");
        value.text = c.value;
        n.add(std::move(value));
        xml::node cmp("Comparison");
        cmp.text = std::string(to_string(c.op));
        n.add(std::move(cmp));
        root.add(std::move(n));
    }
    for (const auto& o : q.order) {
        xml::node n("QueryOrder");
        n.text = o.attribute + (o.descending ? " DESC" : " ASC");
        root.add(std::move(n));
    }
    auto leaf = [&](const char* name, std::string text) {
        xml::node n(name);
        n.text = std::move(text);
        root.add(std::move(n));
    };
    if (q.limit) leaf("QueryLimit", std::to_string(*q.limit));
    if (q.offset) leaf("QueryOffset", std::to_string(*q.offset));
    if (q.no_data) leaf("QueryNoData", "true");
    return root;
}

std::string translate(const formal_query& q) {
    std::string sql = "SELECT image.lfn";
    for (const auto& o : q.order) sql += ", " + attribute_or_throw(o.attribute).qualified_column();
    sql += from_clause;
    sql += " WHERE ";

    auto runs = and_runs(q);
    std::string predicate;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        if (r > 0) predicate += " OR ";
        predicate += "(";
        for (std::size_t i = 0; i < runs[r].size(); ++i) {
            if (i > 0) predicate += " AND ";
            predicate += predicate_sql(*runs[r][i]);
        }
        predicate += ")";
    }
    sql += runs.size() > 1 ? "(" + predicate + ")" : predicate;

    if (!q.order.empty() || q.limit) {
        sql += " ORDER BY ";
        for (const auto& o : q.order) {
            sql += attribute_or_throw(o.attribute).qualified_column() + (o.descending ? " DESC, " : " ASC, ");
        }
        sql += "image.lfn ASC";
    }
    if (q.limit) sql += " LIMIT " + std::to_string(*q.limit);
    if (q.offset) sql += " OFFSET " + std::to_string(*q.offset);
    return sql;
}

metadata_record make_record(const dicom::image_summary& s, const std::string& lfn) {
    auto int_text = [](const std::optional<std::int64_t>& v) -> std::optional<std::string> {
        if (!v) return std::nullopt;
        return std::to_string(*v);
    };
    metadata_record r;
    r.lfn = lfn;
    r.attributes = {
        {"Patient.PatientID", s.patient_id},
        {"Patient.Sex", s.patient_sex},
        {"Patient.BirthYear", int_text(s.birth_year())},
        {"Study.StudyInstanceUID", s.study_uid},
        {"Study.StudyDate", s.study_date},
        {"Study.StudyDescription", s.study_description},
        {"Series.SeriesInstanceUID", s.series_uid},
        {"Series.Modality", s.modality},
        {"Series.Laterality", s.laterality},
        {"Series.ViewCode", s.view_code},
        {"Image.SOPInstanceUID", s.sop_uid},
        {"Image.LFN", lfn},
        {"Image.Rows", int_text(s.rows)},
        {"Image.Columns", int_text(s.columns)},
        {"Image.BitsAllocated", int_text(s.bits_allocated)},
        {std::string(pixel_spacing_attribute), s.pixel_spacing},
    };
    return r;
}

int compare_values(const attribute_info& attr, const std::optional<std::string>& a,
                   const std::optional<std::string>& b) {
    if (!a || !b) return (a ? 1 : 0) - (b ? 1 : 0);
    if (attr.type == attribute_type::integer) {
        auto x = parse_int(*a).value_or(0);
        auto y = parse_int(*b).value_or(0);
        return x < y ? -1 : (x > y ? 1 : 0);
    }
    int c = a->compare(*b);
    return c < 0 ? -1 : (c > 0 ? 1 : 0);
}

bool like_match(std::string_view text, std::string_view pattern) {
    // Iterative wildcard match with single-star backtracking.
    std::size_t t = 0, p = 0;
    std::size_t star_p = std::string_view::npos, star_t = 0;
    while (t < text.size()) {
        if (p < pattern.size() && pattern[p] == '%') {
            star_p = ++p;
            star_t = t;
        } else if (p < pattern.size() && pattern[p] == '_') {
            t = next_code_point(text, t);
            ++p;
        } else if (p < pattern.size() && pattern[p] == text[t]) {
            ++p;
            ++t;
        } else if (star_p != std::string_view::npos) {
            p = star_p;
            star_t = next_code_point(text, star_t);
            t = star_t;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '%') ++p;
    return p == pattern.size();
}

namespace {

bool constraint_holds(const constraint& c, const metadata_record& record) {
    const auto& attr = attribute_or_throw(c.attribute);
    auto it = record.attributes.find(c.attribute);
    const std::optional<std::string> value = it == record.attributes.end() ? std::nullopt : it->second;
    if (is_null_test(c)) return c.op == comparison::equal ? !value.has_value() : value.has_value();
    if (!value) return false;
    if (c.op == comparison::like) return like_match(*value, c.value);
    int cmp = compare_values(attr, value, c.value);
    switch (c.op) {
        case comparison::equal: return cmp == 0;
        case comparison::not_equal: return cmp != 0;
        case comparison::greater: return cmp > 0;
        case comparison::greater_or_equal: return cmp >= 0;
        case comparison::smaller: return cmp < 0;
        case comparison::smaller_or_equal: return cmp <= 0;
        case comparison::like: break;
    }
    return false;
}

}  // namespace

bool matches(const formal_query& q, const metadata_record& record) {
    for (const auto& run : and_runs(q)) {
        bool all = std::all_of(run.begin(), run.end(), [&](const constraint* c) { return constraint_holds(*c, record); });
        if (all) return true;
    }
    return false;
}

std::vector<std::string> evaluate(const formal_query& q, std::span<const metadata_record> records) {
    std::vector<const metadata_record*> hits;
    for (const auto& r : records) {
        if (matches(q, r)) hits.push_back(&r);
    }
    auto value_of = [](const metadata_record& r, const std::string& name) -> std::optional<std::string> {
        auto it = r.attributes.find(name);
        return it == r.attributes.end() ? std::nullopt : it->second;
    };
    std::sort(hits.begin(), hits.end(), [&](const metadata_record* a, const metadata_record* b) {
        for (const auto& o : q.order) {
            int c = compare_values(attribute_or_throw(o.attribute), value_of(*a, o.attribute), value_of(*b, o.attribute));
            if (c != 0) return o.descending ? c > 0 : c < 0;
        }
        return a->lfn < b->lfn;
    });
    std::size_t begin = q.offset ? static_cast<std::size_t>(*q.offset) : 0;
    std::size_t end = hits.size();
    if (q.limit) end = std::min(end, begin + static_cast<std::size_t>(*q.limit));
    std::vector<std::string> out;
    for (std::size_t i = begin; i < end; ++i) out.push_back(hits[i]->lfn);
    return out;
}

}  // namespace gridbox::fq
