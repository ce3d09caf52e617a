#include "gridbox/error.hpp"
#include "gridbox/file_catalogue.hpp"
#include "support/test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <regex>
#include <set>
#include <thread>

using namespace gridbox;

namespace {

std::vector<std::uint8_t> bytes_of(std::string_view s) { return {s.begin(), s.end()}; }

error_code code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return error_code::io_error;
}

// Independent oracle: translate the glob into an ECMAScript regex.
std::regex glob_regex(const std::string& glob) {
    std::string re;
    for (std::size_t i = 0; i < glob.size(); ++i) {
        if (glob[i] == '*' && i + 1 < glob.size() && glob[i + 1] == '*') {
            re += ".*";
            ++i;
        } else if (glob[i] == '*') {
            re += "[^/]*";
        } else if (glob[i] == '.') {
            re += "\\.";
        } else {
            re += glob[i];
        }
    }
    return std::regex(re);
}

bool regex_oracle(const std::string& glob, const std::string& lfn) { return std::regex_match(lfn, glob_regex(glob)); }

class CatalogueTest : public ::testing::Test {
protected:
    gridbox::testing::temp_dir dir;
};

}  // namespace

TEST(Lfn, LayoutChecks) {
    EXPECT_EQ(make_lfn("siteA", "0123456789abcdef", "1.2.3", "1.2.3.4"), "/mg/siteA/0123456789abcdef/1.2.3/1.2.3.4.dcm");
    EXPECT_EQ(lfn_site("/mg/siteB/p/s/x.dcm"), "siteB");
    for (const char* bad : {"relative/path", "/mg/siteA/p/s", "/mg/siteA/p/s/x.txt", "/other/siteA/p/s/x.dcm",
                            "/mg/siteA/p/../x.dcm", "/mg/site A/p/s/x.dcm", "/mg/siteA//s/x.dcm", "",
                            "/mg/siteA/p/s/.dcm", "/mg/siteA/p/s/x.dcm/extra"}) {
        EXPECT_EQ(code_of([&] { check_lfn(bad); }), error_code::bad_lfn) << bad;
    }
}

TEST_F(CatalogueTest, AddGetAndErrors) {
    file_catalogue cat(dir.path(), "siteA");
    auto payload = bytes_of("DICM-bytes-\x01\x02");
    auto lfn = make_lfn("siteA", "0123456789abcdef", "1.2.3", "1.2.3.4");
    auto e = cat.add_file(payload, lfn, "siteA");
    EXPECT_EQ(e.size_bytes, payload.size());
    EXPECT_EQ(e.guid.size(), 32u);
    EXPECT_EQ(cat.get_file(lfn), payload);
    EXPECT_EQ(code_of([&] { cat.add_file(payload, lfn, "siteA"); }), error_code::lfn_exists);
    EXPECT_EQ(code_of([&] { cat.add_file(payload, "relative/path", "siteA"); }), error_code::bad_lfn);
    EXPECT_EQ(code_of([&] { (void)cat.get_file("/mg/siteA/x/y/z.dcm"); }), error_code::not_found);

    auto remote = make_lfn("siteB", "0123456789abcdef", "1.2.3", "9.9.9");
    cat.add_file(payload, remote, "siteB");
    EXPECT_EQ(code_of([&] { (void)cat.get_file(remote); }), error_code::not_local);
    EXPECT_EQ(cat.lookup(remote)->site_id, "siteB");
    EXPECT_TRUE(cat.lookup(remote)->physical_path.empty());
    EXPECT_EQ(cat.size(), 2u);
}

TEST_F(CatalogueTest, StoresFilesUnderMirroredPath) {
    file_catalogue cat(dir.path(), "siteA");
    auto lfn = make_lfn("siteA", "aa", "1.2", "1.2.3");
    auto e = cat.add_file(bytes_of("x"), lfn, "siteA");
    EXPECT_EQ(std::filesystem::path(e.physical_path), dir.path() / "files/mg/siteA/aa/1.2/1.2.3.dcm");
    EXPECT_TRUE(std::filesystem::exists(e.physical_path));
    EXPECT_FALSE(std::filesystem::exists(e.physical_path + ".tmp"));
}

TEST_F(CatalogueTest, FindExamples) {
    file_catalogue cat(dir.path(), "siteA");
    cat.add_file(bytes_of("1"), make_lfn("siteA", "p1", "1.1", "1.1.1"), "siteA");
    cat.add_file(bytes_of("2"), make_lfn("siteA", "p1", "1.1", "1.1.2"), "siteA");
    cat.add_file(bytes_of("3"), make_lfn("siteA", "p2", "2.2", "2.2.1"), "siteA");
    EXPECT_EQ(cat.find("/mg/**").size(), 3u);
    EXPECT_EQ(cat.find("/mg/siteA/*/1.1/*.dcm"),
              (std::vector<std::string>{"/mg/siteA/p1/1.1/1.1.1.dcm", "/mg/siteA/p1/1.1/1.1.2.dcm"}));
    EXPECT_TRUE(cat.find("/mg/*.dcm").empty());
    EXPECT_EQ(code_of([&] { (void)cat.find("**"); }), error_code::bad_pattern);
    EXPECT_EQ(code_of([&] { (void)cat.find("/mg/***"); }), error_code::bad_pattern);
    EXPECT_EQ(code_of([&] { (void)cat.find("/mg//x"); }), error_code::bad_pattern);
    EXPECT_EQ(code_of([&] { (void)cat.find("/mg/[a]"); }), error_code::bad_pattern);
}

TEST(GlobProperties, MatchesRegexOracle) {
    std::mt19937_64 rng(11);
    const char* sites[] = {"siteA", "siteB", "s3"};
    const char* patients[] = {"p1", "p22", "abc"};
    const char* studies[] = {"1.2", "1.22", "3.4.5"};
    std::vector<std::string> lfns;
    for (auto s : sites)
        for (auto p : patients)
            for (auto st : studies) lfns.push_back(make_lfn(s, p, st, std::string(st) + "." + std::to_string(rng() % 9)));

    const char* atoms[] = {"mg", "siteA", "site*", "*", "**", "p*", "*2", "1.2*", "*.dcm", "1.*.dcm", "s*3", "abc"};
    for (int i = 0; i < 3000; ++i) {
        std::string glob;
        auto segments = 1 + rng() % 6;
        for (std::size_t k = 0; k < segments; ++k) glob += "/" + std::string(atoms[rng() % std::size(atoms)]);
        auto re = glob_regex(glob);
        for (const auto& lfn : lfns) {
            ASSERT_EQ(glob_match(glob, lfn), std::regex_match(lfn, re)) << glob << " vs " << lfn;
        }
    }
}

TEST_F(CatalogueTest, FindIsSortedStableSubset) {
    file_catalogue cat(dir.path(), "siteA");
    std::mt19937_64 rng(5);
    std::set<std::string> all;
    for (int i = 0; i < 60; ++i) {
        auto lfn = make_lfn("siteA", "p" + std::to_string(rng() % 5), "1." + std::to_string(rng() % 4),
                            "9." + std::to_string(i));
        cat.add_file(bytes_of("x"), lfn, "siteA");
        all.insert(lfn);
    }
    for (const char* glob : {"/mg/**", "/mg/siteA/p1/**", "/mg/*/*/1.2/*", "/mg/**/9.1*.dcm"}) {
        auto a = cat.find(glob);
        EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
        EXPECT_EQ(a, cat.find(glob));
        for (const auto& l : a) EXPECT_TRUE(all.contains(l));
        std::vector<std::string> want;
        for (const auto& l : all) {
            if (regex_oracle(glob, l)) want.push_back(l);
        }
        EXPECT_EQ(a, want) << glob;
    }
}

TEST_F(CatalogueTest, RoundTripsArbitraryBytes) {
    file_catalogue cat(dir.path(), "siteA");
    std::mt19937_64 rng(3);
    for (int i = 0; i < 30; ++i) {
        std::vector<std::uint8_t> bytes(rng() % 5000);
        for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
        auto lfn = make_lfn("siteA", "p", "1", "1." + std::to_string(i));
        cat.add_file(bytes, lfn, "siteA");
        EXPECT_EQ(cat.get_file(lfn), bytes);
    }
}

TEST_F(CatalogueTest, GuidsAreUniqueAcrossTenThousandEntries) {
    file_catalogue cat(dir.path(), "siteA");
    std::set<std::string> guids;
    // Remote entries skip the file write, keeping the run short while still
    // exercising the index and GUID generation.
    for (int i = 0; i < 10000; ++i) {
        auto e = cat.add_file({}, make_lfn("siteB", "p" + std::to_string(i % 97), "1", "2." + std::to_string(i)), "siteB");
        guids.insert(e.guid);
    }
    EXPECT_EQ(guids.size(), 10000u);
    EXPECT_EQ(cat.size(), 10000u);
}

TEST_F(CatalogueTest, ReopenKeepsEntriesAndFiles) {
    std::vector<catalogue_entry> before;
    auto lfn = make_lfn("siteA", "p", "1", "1.1");
    {
        file_catalogue cat(dir.path(), "siteA");
        cat.add_file(bytes_of("persisted"), lfn, "siteA");
        before = cat.entries();
    }
    file_catalogue cat(dir.path(), "siteA");
    EXPECT_EQ(cat.entries(), before);
    EXPECT_EQ(cat.get_file(lfn), bytes_of("persisted"));
}

TEST_F(CatalogueTest, ConcurrentAddsOfSameLfnHaveOneWinner) {
    file_catalogue cat(dir.path(), "siteA");
    auto lfn = make_lfn("siteA", "p", "1", "1.1");
    std::atomic<int> wins{0}, exists{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&] {
            try {
                cat.add_file(bytes_of("x"), lfn, "siteA");
                ++wins;
            } catch (const error& e) {
                if (e.code() == error_code::lfn_exists) ++exists;
            }
        });
    }
    for (auto& t : threads) t.join();
    EXPECT_EQ(wins.load(), 1);
    EXPECT_EQ(exists.load(), 7);
}
