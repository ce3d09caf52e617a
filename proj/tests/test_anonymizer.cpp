#include "gridbox/anonymizer.hpp"
#include "gridbox/dicom/codec.hpp"
#include "gridbox/error.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace gridbox;
namespace dt = gridbox::dicom::tags;
using gridbox::dicom::vr;

namespace {

dicom::dataset identified_dataset() {
    dicom::dataset ds;
    ds.set_text(dt::sop_instance_uid, vr::UI, "1.2.3.4.5");
    ds.set_text(dt::study_instance_uid, vr::UI, "1.2.3.4");
    ds.set_text(dt::patient_id, vr::LO, "P123");
    ds.set_text(dt::patient_name, vr::PN, "Doe^Jane");
    ds.set_text(dt::patient_birth_date, vr::DA, "19570412");
    ds.set_text(dt::patient_sex, vr::CS, "F");
    ds.set_text(dt::accession_number, vr::SH, "ACC991");
    ds.set_text(dt::institution_name, vr::LO, "General Hospital");
    ds.set_text(dt::referring_physician_name, vr::PN, "House^Greg");
    ds.set_text(dt::operators_name, vr::PN, "Tech^Tina");
    ds.set_text(dt::other_patient_ids, vr::LO, "ALT-7");
    ds.set_text(dt::other_patient_names, vr::PN, "Smith^Jane");
    ds.set_text(dt::patient_address, vr::LO, "1 Main St");
    ds.set_integers(dt::rows, vr::US, {2048});
    ds.set_bytes(dt::pixel_data, vr::OW, {1, 2, 3, 4});
    return ds;
}

pseudonym_key zero_key() { return pseudonym_key{}; }

pseudonym_key counting_key() {
    std::array<std::uint8_t, pseudonym_key::size> bytes{};
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<std::uint8_t>(i);
    return pseudonym_key(bytes);
}

}  // namespace

// Reference values computed with Python's hmac module.
TEST(Pseudonym, MatchesIndependentHmacVectors) {
    EXPECT_EQ(compute_pseudonym(zero_key(), "P123"), "c4fb3e23b9651d8d");
    EXPECT_EQ(compute_pseudonym(counting_key(), "P123"), "6c0d1cf83a94da8a");
    EXPECT_EQ(compute_pseudonym(counting_key(), "HOSP0042"), "fcd9bbd3f76b2da5");
}

TEST(Pseudonym, KeyFromHex) {
    auto key = pseudonym_key::from_hex("000102030405060708090a0b0c0d0e0f101112131415161718191A1B1C1D1E1F");
    EXPECT_EQ(key, counting_key());
    EXPECT_THROW((void)pseudonym_key::from_hex("00"), error);
    EXPECT_THROW((void)pseudonym_key::from_hex(std::string(64, 'g')), error);
}

TEST(Pseudonymize, ReplacesIdentityAndKeepsEverythingElse) {
    auto input = identified_dataset();
    auto [out, pseudonym] = pseudonymize(input, zero_key());
    EXPECT_EQ(pseudonym, "c4fb3e23b9651d8d");
    EXPECT_EQ(out.text(dt::patient_id), pseudonym);
    EXPECT_EQ(out.text(dt::patient_name), pseudonym);
    EXPECT_EQ(out.text(dt::patient_birth_date), "19570101");
    for (auto t : removed_identifier_tags()) EXPECT_FALSE(out.contains(t)) << t.str();
    EXPECT_EQ(removed_identifier_tags().size(), 7u);

    // Every element not touched by the policy is unchanged.
    for (const auto& [t, element] : input) {
        if (t == dt::patient_id || t == dt::patient_name || t == dt::patient_birth_date) continue;
        bool removed = false;
        for (auto r : removed_identifier_tags()) removed = removed || r == t;
        if (removed) continue;
        const auto* kept = out.find(t);
        ASSERT_NE(kept, nullptr) << t.str();
        EXPECT_EQ(*kept, element) << t.str();
    }
}

TEST(Pseudonymize, IsDeterministic) {
    auto input = identified_dataset();
    auto a = pseudonymize(input, counting_key());
    auto b = pseudonymize(input, counting_key());
    EXPECT_EQ(a.pseudonym, b.pseudonym);
    EXPECT_EQ(a.dataset, b.dataset);
    EXPECT_EQ(dicom::serialize_file(a.dataset, dicom::transfer_syntax::explicit_vr_little_endian),
              dicom::serialize_file(b.dataset, dicom::transfer_syntax::explicit_vr_little_endian));
}

TEST(Pseudonymize, MissingPatientIdIsRejected) {
    auto input = identified_dataset();
    input.erase(dt::patient_id);
    try {
        (void)pseudonymize(input, zero_key());
        FAIL() << "expected MissingIdentity";
    } catch (const error& e) {
        EXPECT_EQ(e.code(), error_code::missing_identity);
    }
    input.set_text(dt::patient_id, vr::LO, "");
    EXPECT_THROW((void)pseudonymize(input, zero_key()), error);
}

TEST(Pseudonymize, MalformedBirthDateIsDropped) {
    auto input = identified_dataset();
    input.set_text(dt::patient_birth_date, vr::DA, "19");
    auto out = pseudonymize(input, zero_key()).dataset;
    EXPECT_FALSE(out.contains(dt::patient_birth_date));

    input.erase(dt::patient_birth_date);
    out = pseudonymize(input, zero_key()).dataset;
    EXPECT_FALSE(out.contains(dt::patient_birth_date));
}

TEST(Pseudonymize, OriginalIdentityAbsentFromEncodedOutput) {
    auto out = pseudonymize(identified_dataset(), zero_key()).dataset;
    auto bytes = dicom::serialize_file(out, dicom::transfer_syntax::explicit_vr_little_endian);
    std::string text(bytes.begin(), bytes.end());
    for (const char* secret : {"P123", "Doe^Jane", "Smith^Jane", "ALT-7", "General Hospital", "1 Main St"}) {
        EXPECT_EQ(text.find(secret), std::string::npos) << secret;
    }
}

TEST(PseudonymProperties, DistinctIdsGiveDistinctPseudonyms) {
    std::mt19937_64 rng(20260101);
    std::set<std::string> ids;
    while (ids.size() < 1000) {
        std::string id = "ID";
        auto len = 4 + rng() % 12;
        for (std::size_t i = 0; i < len; ++i) id.push_back(static_cast<char>('A' + rng() % 26));
        ids.insert(id);
    }
    std::set<std::string> pseudonyms;
    for (const auto& id : ids) {
        auto p = compute_pseudonym(counting_key(), id);
        ASSERT_EQ(p.size(), pseudonym_length);
        ASSERT_EQ(p.find_first_not_of("0123456789abcdef"), std::string::npos);
        pseudonyms.insert(p);
    }
    EXPECT_EQ(pseudonyms.size(), ids.size());
}

TEST(PseudonymProperties, DifferentKeysGiveDifferentPseudonyms) {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 200; ++i) {
        std::array<std::uint8_t, pseudonym_key::size> a{}, b{};
        for (auto& x : a) x = static_cast<std::uint8_t>(rng());
        b = a;
        b[rng() % b.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
        std::string id = "PID" + std::to_string(rng() % 1000000);
        EXPECT_NE(compute_pseudonym(pseudonym_key(a), id), compute_pseudonym(pseudonym_key(b), id)) << id;
    }
}

TEST(PseudonymMap, RecordsAndLooksUp) {
    pseudonym_map map;
    EXPECT_EQ(map.size(), 0u);
    map.record("P123", "c4fb3e23b9651d8d");
    EXPECT_EQ(map.original_for("c4fb3e23b9651d8d"), "P123");
    EXPECT_FALSE(map.original_for("0000000000000000").has_value());
    EXPECT_EQ(map.size(), 1u);
}
