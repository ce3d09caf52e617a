#include "gridbox/dicom/codec.hpp"
#include "gridbox/dicom/summary.hpp"
#include "gridbox/error.hpp"
#include "gridbox/federation.hpp"
#include "gridbox/harness/corpus.hpp"
#include "gridbox/harness/harness.hpp"
#include "gridbox/harness/query_generator.hpp"
#include "gridbox/metadata_store.hpp"
#include "gridbox/node/protocol.hpp"
#include "support/test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

namespace gridbox {
namespace {

using namespace std::chrono_literals;
using harness::topology;
using testing::temp_dir;

// ---------------------------------------------------------------------------
// Corpus

TEST(Corpus, SameSeedSameBytes) {
    auto a = harness::generate_corpus(20, 99);
    auto b = harness::generate_corpus(20, 99);
    ASSERT_EQ(a.files.size(), 20u);
    for (std::size_t k = 0; k < a.files.size(); ++k) {
        EXPECT_EQ(a.files[k].name, b.files[k].name);
        EXPECT_EQ(a.files[k].bytes, b.files[k].bytes) << a.files[k].name;
    }
    EXPECT_EQ(harness::manifest_to_xml(a.seed, a.records), harness::manifest_to_xml(b.seed, b.records));

    auto c = harness::generate_corpus(20, 100);
    EXPECT_NE(a.files[0].bytes, c.files[0].bytes);
}

TEST(Corpus, SingleImage) {
    auto c = harness::generate_corpus(1, 5);
    EXPECT_EQ(c.files.size(), 1u);
    EXPECT_EQ(c.records.size(), 1u);
    EXPECT_THROW((void)harness::generate_corpus(0, 5), std::invalid_argument);
}

TEST(Corpus, FilesAgreeWithTheirManifest) {
    auto c = harness::generate_corpus(40, 3);
    std::set<std::string> sops;
    for (std::size_t k = 0; k < c.files.size(); ++k) {
        const auto& rec = c.records[k];
        EXPECT_EQ(rec.file, c.files[k].name);
        auto ds = dicom::parse_file(c.files[k].bytes);
        auto from_file = fq::make_record(dicom::extract_summary(ds), "lfn-" + std::to_string(k));
        auto want = rec.attributes;
        want["Image.LFN"] = "lfn-" + std::to_string(k);
        EXPECT_EQ(from_file.attributes, want) << rec.file;
        sops.insert(*rec.attributes.at("Image.SOPInstanceUID"));
    }
    EXPECT_EQ(sops.size(), c.files.size());
}

TEST(Corpus, ManifestRoundTripsAndFilesLandOnDisk) {
    auto c = harness::generate_corpus(8, 11);
    auto parsed = harness::manifest_from_xml(harness::manifest_to_xml(c.seed, c.records));
    ASSERT_EQ(parsed.size(), c.records.size());
    for (std::size_t k = 0; k < parsed.size(); ++k) {
        EXPECT_EQ(parsed[k].file, c.records[k].file);
        EXPECT_EQ(parsed[k].attributes, c.records[k].attributes);
        EXPECT_EQ(parsed[k].identity, c.records[k].identity);
    }

    temp_dir dir;
    harness::write_corpus(c, dir.path());
    EXPECT_TRUE(std::filesystem::exists(dir.path() / harness::manifest_file_name));
    for (const auto& f : c.files) {
        std::ifstream in(dir.path() / f.name, std::ios::binary);
        std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
        EXPECT_EQ(bytes, f.bytes);
    }
    // Identity strings are present in the raw corpus, which is what makes the
    // scan meaningful when it finds nothing in a node's data directory.
    EXPECT_FALSE(harness::scan_for_strings(dir.path(), harness::identity_strings(c.records[0])).empty());
}

TEST(Corpus, ExpectedRecordReplacesOnlyTheIdentity) {
    auto c = harness::generate_corpus(3, 1);
    auto key = pseudonym_key::from_hex(std::string(64, 'b'));
    auto r = harness::expected_record(c.records[0], key, "site0");
    EXPECT_EQ(r.attributes.at("Patient.PatientID"),
              compute_pseudonym(key, *c.records[0].attributes.at("Patient.PatientID")));
    EXPECT_EQ(r.attributes.at("Image.LFN"), r.lfn);
    EXPECT_EQ(r.lfn, make_lfn("site0", *r.attributes.at("Patient.PatientID"),
                              *r.attributes.at("Study.StudyInstanceUID"), *r.attributes.at("Image.SOPInstanceUID")));
    EXPECT_EQ(r.attributes.at("Image.Rows"), c.records[0].attributes.at("Image.Rows"));
}

// ---------------------------------------------------------------------------
// Topologies

TEST(Topology, Neighbours) {
    using v = std::vector<std::vector<std::size_t>>;
    EXPECT_EQ(harness::neighbours(topology::line, 1), (v{{}}));
    EXPECT_EQ(harness::neighbours(topology::line, 3), (v{{1}, {0, 2}, {1}}));
    EXPECT_EQ(harness::neighbours(topology::star, 4), (v{{1, 2, 3}, {0}, {0}, {0}}));
    EXPECT_EQ(harness::neighbours(topology::ring, 4), (v{{1, 3}, {0, 2}, {1, 3}, {0, 2}}));
    EXPECT_EQ(harness::neighbours(topology::ring, 2), (v{{1}, {0}}));
    EXPECT_EQ(harness::neighbours(topology::complete, 3), (v{{1, 2}, {0, 2}, {0, 1}}));
    for (auto t : {topology::line, topology::star, topology::ring, topology::complete}) {
        EXPECT_EQ(harness::parse_topology(harness::to_string(t)), t);
    }
    EXPECT_FALSE(harness::parse_topology("mesh"));
}

// ---------------------------------------------------------------------------
// Federations

TEST(Federation, SingleNodeAndTeardown) {
    std::filesystem::path root;
    {
        harness::test_federation f(1, topology::line, 42);
        root = f.root();
        EXPECT_TRUE(std::filesystem::exists(root));
        EXPECT_TRUE(f.running(0));
        EXPECT_TRUE(f.config(0).peers.empty());
        EXPECT_EQ(f.at(0).site_id(), "site0");
    }
    EXPECT_FALSE(std::filesystem::exists(root));
    EXPECT_THROW(harness::test_federation(0, topology::line, 1), std::invalid_argument);
    EXPECT_THROW(harness::test_federation(9, topology::line, 1), std::invalid_argument);
}

TEST(Federation, CompleteTopologyWiresEveryPeer) {
    harness::test_federation f(3, topology::complete, 43);
    std::set<std::uint16_t> ports;
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(f.config(i).peers.size(), 2u);
        ports.insert(f.at(i).dicom_port());
        ports.insert(f.at(i).api_port());
        ports.insert(f.at(i).peer_port());
    }
    EXPECT_EQ(ports.size(), 9u);
}

TEST(Federation, IngestPlacesEveryFileOnce) {
    auto c = harness::generate_corpus(24, 8);
    harness::test_federation f(3, topology::line, 44);
    auto placement = f.ingest(c, 1);
    ASSERT_EQ(placement.size(), c.files.size());
    std::size_t total = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(f.at(i).store().image_count(), f.records_at(i).size());
        auto held = f.at(i).store().all_records();
        auto want = f.records_at(i);
        std::sort(want.begin(), want.end(), [](const auto& a, const auto& b) { return a.lfn < b.lfn; });
        std::sort(held.begin(), held.end(), [](const auto& a, const auto& b) { return a.lfn < b.lfn; });
        EXPECT_EQ(held, want);
        total += held.size();
    }
    EXPECT_EQ(total, c.files.size());
    EXPECT_EQ(f.all_records().size(), c.files.size());
}

TEST(Federation, IngestOverTheNetworkMatchesInProcess) {
    auto c = harness::generate_corpus(10, 9);
    harness::test_federation a(2, topology::line, 45);
    harness::test_federation b(2, topology::line, 46);
    auto pa = a.ingest(c, 2, false);
    auto pb = b.ingest(c, 2, true);
    EXPECT_EQ(pa, pb);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(b.at(i).store().image_count(), a.records_at(i).size());
}

// Two independent implementations of the query semantics agree on corpus data.
TEST(Oracle, EvaluateAgreesWithSqlOnOneNode) {
    auto c = harness::generate_corpus(60, 12);
    harness::test_federation f(1, topology::line, 47);
    f.ingest(c, 0);
    auto records = f.records_at(0);
    std::mt19937_64 rng(5);
    for (int i = 0; i < 150; ++i) {
        auto q = harness::random_query(rng, records);
        auto want = fq::evaluate(q, records);
        std::vector<std::string> got;
        for (const auto& row : f.at(0).store().execute_sql(fq::translate(q)).rows) got.push_back(*row.at(0));
        if (q.order.empty() && !q.limit) {
            std::sort(got.begin(), got.end());
            std::sort(want.begin(), want.end());
        }
        EXPECT_EQ(got, want) << fq::serialize_fq(q);
    }
}

TEST(Workload, CleanRunOnALine) {
    auto c = harness::generate_corpus(30, 13);
    harness::test_federation f(3, topology::line, 48);
    f.ingest(c, 3);
    harness::workload_options opts;
    opts.max_messages = 9;
    auto report = harness::run_workload(f, 77, 25, opts);
    EXPECT_TRUE(report.clean()) << harness::report_summary(report);
    EXPECT_EQ(report.cases, 25u);
    EXPECT_EQ(report.requests, 75u);
    EXPECT_EQ(report.incomplete, 0u);
    EXPECT_GT(report.max_messages, 0u);
}

TEST(Workload, RingAndCompleteReturnTheSameRows) {
    auto c = harness::generate_corpus(20, 14);
    // Same seed, so the same pseudonym key; the second federation moves to
    // the next port block.
    harness::test_federation ring(4, topology::ring, 49);
    harness::test_federation full(4, topology::complete, 49);
    ring.ingest(c, 4);
    full.ingest(c, 4);
    std::mt19937_64 rng(6);
    auto universe = ring.all_records();
    node::api_client a("127.0.0.1", ring.at(2).api_port(), ring.token());
    node::api_client b("127.0.0.1", full.at(2).api_port(), full.token());
    for (int i = 0; i < 20; ++i) {
        auto fq_xml = fq::serialize_fq(harness::random_query(rng, universe));
        auto ra = federation::unwrap_result(a.query(fq_xml));
        auto rb = federation::unwrap_result(b.query(fq_xml));
        ASSERT_EQ(ra.rows.size(), rb.rows.size()) << fq_xml;
        for (std::size_t k = 0; k < ra.rows.size(); ++k) {
            EXPECT_EQ(ra.rows[k].lfn, rb.rows[k].lfn);
            EXPECT_EQ(ra.rows[k].metadata, rb.rows[k].metadata);
        }
    }
}

TEST(Workload, StoppedNodeMakesResultsIncompleteButCorrect) {
    auto c = harness::generate_corpus(24, 15);
    harness::federation_options opts;
    opts.peer_timeout = 1000ms;
    harness::test_federation f(3, topology::complete, 51, opts);
    f.ingest(c, 5);
    f.stop(2);
    EXPECT_FALSE(f.expect_complete(0));
    EXPECT_EQ(f.reachable_from(0), (std::vector<std::size_t>{0, 1}));
    auto report = harness::run_workload(f, 78, 10);
    EXPECT_TRUE(report.clean()) << harness::report_summary(report);
    EXPECT_EQ(report.incomplete, report.requests);

    f.restart(2);
    EXPECT_TRUE(f.expect_complete(0));
    auto after = harness::run_workload(f, 78, 10);
    EXPECT_TRUE(after.clean()) << harness::report_summary(after);
    EXPECT_EQ(after.incomplete, 0u);
}

TEST(Workload, DivergenceIsReportedWithItsQuery) {
    auto c = harness::generate_corpus(12, 16);
    harness::test_federation f(3, topology::line, 52);
    f.ingest(c, 6);
    // On a line of three every query crosses at least two links, so a bound
    // of one forces a divergence without corrupting any node.
    harness::workload_options opts;
    opts.max_messages = 1;
    auto report = harness::run_workload(f, 79, 3, opts);
    ASSERT_FALSE(report.clean());
    const auto& d = report.divergences.front();
    EXPECT_NE(d.reason.find("bound 1"), std::string::npos);
    EXPECT_NO_THROW((void)fq::parse_fq(d.fq_xml));
    auto xml_report = harness::report_to_xml(report);
    EXPECT_NE(xml_report.find("<Divergence"), std::string::npos);
    EXPECT_NE(harness::report_summary(report).find("bound 1"), std::string::npos);
}

}  // namespace
}  // namespace gridbox
