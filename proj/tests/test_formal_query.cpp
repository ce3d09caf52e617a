#include "gridbox/error.hpp"
#include "gridbox/formal_query.hpp"
#include "gridbox/harness/query_generator.hpp"
#include "support/test_support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace gridbox;
using namespace gridbox::fq;

namespace {

std::string read_golden(const std::string& name) {
    std::ifstream in(std::string(GRIDBOX_GOLDEN_DIR) + "/" + name, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

error_code code_of(std::string_view xml) {
    try {
        (void)parse_fq(xml);
    } catch (const error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error for: " << xml;
    return error_code::io_error;
}

constraint make(conjunction j, std::string attr, comparison op, std::string value) {
    return constraint{j, std::move(attr), op, std::move(value)};
}

}  // namespace

TEST(FormalQuerySchema, HasFifteenDistinctAttributes) {
    auto attrs = schema_attributes();
    EXPECT_EQ(attrs.size(), 15u);
    std::set<std::string_view> names;
    for (const auto& a : attrs) names.insert(a.name);
    EXPECT_EQ(names.size(), 15u);
    EXPECT_EQ(find_attribute("Image.Rows")->type, attribute_type::integer);
    EXPECT_EQ(find_attribute("Patient.SSN"), nullptr);
}

TEST(ParseFq, SingleConstraint) {
    auto q = parse_fq(R"(<Query><Constraint><Conjunction>and</Conjunction><Attribute>Patient.Sex</Attribute>
                         <Value>F</Value><Comparison>EQUAL</Comparison></Constraint></Query>)");
    ASSERT_EQ(q.constraints.size(), 1u);
    EXPECT_EQ(q.constraints[0].attribute, "Patient.Sex");
    EXPECT_EQ(q.constraints[0].value, "F");
    EXPECT_EQ(q.constraints[0].op, comparison::equal);
    EXPECT_TRUE(q.order.empty());
    EXPECT_FALSE(q.limit.has_value());
    EXPECT_FALSE(q.no_data);
}

TEST(ParseFq, MissingComparisonDefaultsToEqual) {
    auto q = parse_fq("<Query><Constraint><Conjunction>and</Conjunction><Attribute>Image.Rows</Attribute>"
                      "<Value>2048</Value></Constraint></Query>");
    EXPECT_EQ(q.constraints[0].op, comparison::equal);
}

TEST(ParseFq, FirstConjunctionIsIgnored) {
    auto q = parse_fq("<Query><Constraint><Conjunction>or</Conjunction><Attribute>Patient.Sex</Attribute>"
                      "<Value>F</Value></Constraint><Constraint><Conjunction>or</Conjunction>"
                      "<Attribute>Patient.Sex</Attribute><Value>M</Value></Constraint></Query>");
    EXPECT_EQ(q.constraints[0].join, conjunction::and_);
    EXPECT_EQ(q.constraints[1].join, conjunction::or_);
}

TEST(ParseFq, OrderLimitOffsetNoData) {
    auto q = parse_fq("<Query><Constraint><Attribute>Patient.Sex</Attribute><Value>F</Value></Constraint>"
                      "<QueryOrder>Study.StudyDate DESC</QueryOrder><QueryOrder>Image.Rows</QueryOrder>"
                      "<QueryLimit>10</QueryLimit><QueryOffset>5</QueryOffset><QueryNoData>true</QueryNoData></Query>");
    ASSERT_EQ(q.order.size(), 2u);
    EXPECT_EQ(q.order[0], (order_key{"Study.StudyDate", true}));
    EXPECT_EQ(q.order[1], (order_key{"Image.Rows", false}));
    EXPECT_EQ(q.limit, 10);
    EXPECT_EQ(q.offset, 5);
    EXPECT_TRUE(q.no_data);
}

TEST(ParseFq, Errors) {
    const std::string ok_constraint = "<Constraint><Attribute>Patient.Sex</Attribute><Value>F</Value></Constraint>";
    EXPECT_EQ(code_of("<Query><Constraint><Attribute>Patient.SSN</Attribute><Value>1</Value></Constraint></Query>"),
              error_code::unknown_attribute);
    EXPECT_EQ(code_of("<Query><Constraint><Attribute>Patient.Sex</Attribute><Value>F</Value>"
                      "<Comparison>ABOUT</Comparison></Constraint></Query>"),
              error_code::bad_comparison);
    EXPECT_EQ(code_of("<Query><Constraint><Conjunction>xor</Conjunction><Attribute>Patient.Sex</Attribute>"
                      "<Value>F</Value></Constraint></Query>"),
              error_code::bad_conjunction);
    EXPECT_EQ(code_of("<Query>" + ok_constraint + ok_constraint + "</Query>"), error_code::bad_conjunction);
    EXPECT_EQ(code_of("<Query/>"), error_code::empty_query);
    EXPECT_EQ(code_of("<Query><QueryLimit>3</QueryLimit></Query>"), error_code::empty_query);
    EXPECT_EQ(code_of("<Query>" + ok_constraint), error_code::xml_error);
    EXPECT_EQ(code_of("<Search>" + ok_constraint + "</Search>"), error_code::xml_error);
    EXPECT_EQ(code_of("<Query>" + ok_constraint + "<Extra/></Query>"), error_code::xml_error);
    EXPECT_EQ(code_of("<Query>" + ok_constraint + "<QueryLimit>1</QueryLimit><QueryLimit>2</QueryLimit></Query>"),
              error_code::xml_error);
    EXPECT_EQ(code_of("<Query>" + ok_constraint + "<QueryOffset>2</QueryOffset></Query>"), error_code::invalid_query);
    EXPECT_EQ(code_of("<Query>" + ok_constraint + "<QueryLimit>-1</QueryLimit></Query>"), error_code::invalid_query);
    EXPECT_EQ(code_of("<Query><Constraint><Attribute>Image.Rows</Attribute><Value>big</Value></Constraint></Query>"),
              error_code::invalid_query);
    EXPECT_EQ(code_of("<Query><Constraint><Attribute>Patient.Sex</Attribute><Value></Value></Constraint></Query>"),
              error_code::invalid_query);
    EXPECT_EQ(code_of("<Query>" + ok_constraint + "<QueryOrder>Patient.Age</QueryOrder></Query>"),
              error_code::unknown_attribute);
}

TEST(SerializeFq, LimitOffsetAndConjunctionAppear) {
    formal_query q;
    q.constraints = {make(conjunction::and_, "Patient.Sex", comparison::equal, "F"),
                     make(conjunction::or_, "Image.Rows", comparison::greater, "1000")};
    q.limit = 10;
    q.offset = 5;
    auto xml = serialize_fq(q);
    EXPECT_NE(xml.find("<QueryLimit>10</QueryLimit>"), std::string::npos);
    EXPECT_NE(xml.find("<QueryOffset>5</QueryOffset>"), std::string::npos);
    auto second = xml.find("<Constraint>", xml.find("<Constraint>") + 1);
    ASSERT_NE(second, std::string::npos);
    EXPECT_EQ(xml.find("<Conjunction>or</Conjunction>", second), xml.find("<Conjunction>", second));
    EXPECT_EQ(parse_fq(xml), q);
}

TEST(SerializeFq, RoundTripsGeneratedQueries) {
    auto records = gridbox::testing::random_records(5, 120);
    std::mt19937_64 rng(99);
    for (int i = 0; i < 500; ++i) {
        auto q = harness::random_query(rng, records);
        auto xml = serialize_fq(q);
        ASSERT_EQ(parse_fq(xml), q) << xml;
        ASSERT_EQ(serialize_fq(parse_fq(xml)), xml);
    }
}

// Golden statements come from tests/oracles/make_sql_golden.py, which checks
// each one against SQLite and a brute-force filter.
TEST(Translate, MatchesGoldenStatements) {
    formal_query sex;
    sex.constraints = {make(conjunction::and_, "Patient.Sex", comparison::equal, "F")};
    EXPECT_EQ(translate(sex), read_golden("translate_sex.sql"));
    EXPECT_TRUE(translate(sex).ends_with("WHERE (patient.sex = 'F')"));

    formal_query compound;
    compound.constraints = {make(conjunction::and_, "Image.Rows", comparison::greater, "1000"),
                            make(conjunction::and_, "Patient.Sex", comparison::equal, "F"),
                            make(conjunction::or_, "Study.StudyDate", comparison::smaller, "2003-01-01")};
    EXPECT_EQ(translate(compound), read_golden("translate_compound.sql"));

    formal_query quote;
    quote.constraints = {make(conjunction::and_, "Study.StudyDescription", comparison::equal, "O'Hara")};
    EXPECT_EQ(translate(quote), read_golden("translate_quote.sql"));
}

TEST(Translate, NullsOrderingAndLimits) {
    formal_query q;
    q.constraints = {make(conjunction::and_, "Patient.Sex", comparison::equal, "NULL"),
                     make(conjunction::or_, "Series.ViewCode", comparison::not_equal, "NULL"),
                     make(conjunction::and_, "Series.ViewCode", comparison::like, "C%")};
    q.order = {{"Study.StudyDate", true}};
    q.limit = 3;
    q.offset = 1;
    auto sql = translate(q);
    EXPECT_TRUE(sql.starts_with("SELECT image.lfn, study.study_date FROM patient JOIN"));
    EXPECT_TRUE(sql.ends_with("WHERE ((patient.sex IS NULL) OR (series.view_code IS NOT NULL AND "
                              "series.view_code LIKE 'C%')) ORDER BY study.study_date DESC, image.lfn ASC "
                              "LIMIT 3 OFFSET 1"))
        << sql;
    EXPECT_EQ(translate(q), sql);

    formal_query limit_only;
    limit_only.constraints = {make(conjunction::and_, "Image.Rows", comparison::greater_or_equal, "007")};
    limit_only.limit = 0;
    EXPECT_TRUE(translate(limit_only).ends_with("WHERE (image.rows >= 7) ORDER BY image.lfn ASC LIMIT 0"));
}

TEST(LikeMatch, Semantics) {
    EXPECT_TRUE(like_match("screening", "scr%"));
    EXPECT_TRUE(like_match("screening", "%ning"));
    EXPECT_TRUE(like_match("screening", "%ree%"));
    EXPECT_TRUE(like_match("screening", "s_r%g"));
    EXPECT_FALSE(like_match("screening", "Scr%"));
    EXPECT_FALSE(like_match("screening", "screen"));
    EXPECT_TRUE(like_match("", "%"));
    EXPECT_FALSE(like_match("", "_"));
    EXPECT_TRUE(like_match("Caf\xc3\xa9", "Caf_"));
    EXPECT_TRUE(like_match("a%b", "a%b"));
    EXPECT_TRUE(like_match("aXbXc", "%b%c"));
}

TEST(Evaluate, EmptyAndLimitLargerThanMatches) {
    auto records = gridbox::testing::random_records(8, 40);
    formal_query none;
    none.constraints = {make(conjunction::and_, "Patient.PatientID", comparison::equal, "nobody")};
    EXPECT_TRUE(evaluate(none, records).empty());

    formal_query females;
    females.constraints = {make(conjunction::and_, "Patient.Sex", comparison::equal, "F")};
    auto all = evaluate(females, records);
    ASSERT_FALSE(all.empty());
    females.limit = static_cast<std::int64_t>(all.size() + 10);
    EXPECT_EQ(evaluate(females, records), all);
}

TEST(Evaluate, OrderingPutsNullsFirstAscending) {
    auto records = gridbox::testing::random_records(3, 60);
    formal_query q;
    q.constraints = {make(conjunction::and_, "Image.Rows", comparison::greater, "0")};
    q.order = {{"Study.StudyDate", false}};
    auto rows = evaluate(q, records);
    ASSERT_EQ(rows.size(), records.size());
    std::map<std::string, std::optional<std::string>> date_of;
    for (const auto& r : records) date_of[r.lfn] = r.attributes.at("Study.StudyDate");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& a = date_of[rows[i - 1]];
        const auto& b = date_of[rows[i]];
        if (a && b) EXPECT_LE(*a, *b);
        if (a) EXPECT_TRUE(b.has_value());
        if (a == b) EXPECT_LT(rows[i - 1], rows[i]);
    }
}

TEST(EvaluateProperties, LimitResultsArePrefixes) {
    auto records = gridbox::testing::random_records(21, 150);
    std::mt19937_64 rng(4);
    for (int i = 0; i < 100; ++i) {
        auto q = harness::random_query(rng, records);
        q.offset.reset();
        q.limit.reset();
        auto full = evaluate(q, records);
        for (std::int64_t k = 0; k < 6; ++k) {
            q.limit = k;
            auto a = evaluate(q, records);
            q.limit = k + 1;
            auto b = evaluate(q, records);
            ASSERT_LE(a.size(), b.size());
            ASSERT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
            ASSERT_TRUE(std::equal(b.begin(), b.end(), full.begin()));
        }
    }
}

TEST(MakeRecord, FromSummary) {
    dicom::image_summary s;
    s.patient_id = "abcdef0123456789";
    s.patient_birth_date = "19570101";
    s.sop_uid = "1.2.3";
    s.rows = 2048;
    auto r = make_record(s, "/mg/a/x.dcm");
    EXPECT_EQ(r.attributes.at("Patient.BirthYear"), "1957");
    EXPECT_EQ(r.attributes.at("Image.Rows"), "2048");
    EXPECT_EQ(r.attributes.at("Image.LFN"), "/mg/a/x.dcm");
    EXPECT_FALSE(r.attributes.at("Patient.Sex").has_value());
    EXPECT_EQ(r.attributes.size(), 16u);
}
