/**
 * @file harness.hpp
 * @brief In-process federations over loopback TCP and the randomized oracle
 *        workload that checks them
 *
 * A federation of n nodes gets sites "site0".."site<n-1>", fresh data
 * directories under one temporary root, and three consecutive ports per node
 * starting from a block derived from the seed. When a port in the block is
 * taken the whole federation moves to the next block; after eight blocks the
 * constructor gives up with BindError.
 *
 * The workload draws queries from query_generator over the union of the
 * expected records, runs each one at every running node through the client
 * API, and compares the decoded result with fq::evaluate over the records
 * held by the nodes that originator can reach. Any difference becomes a divergence entry that
 * carries the FQ XML for replay.
 */

#ifndef GRIDBOX_HARNESS_HARNESS_HPP
#define GRIDBOX_HARNESS_HARNESS_HPP

#include "gridbox/anonymizer.hpp"
#include "gridbox/formal_query.hpp"
#include "gridbox/harness/corpus.hpp"
#include "gridbox/harness/query_generator.hpp"
#include "gridbox/node/node.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gridbox::harness {

enum class topology { line, star, ring, complete };

[[nodiscard]] std::string_view to_string(topology t) noexcept;
[[nodiscard]] std::optional<topology> parse_topology(std::string_view name) noexcept;

/// Neighbour indices per node. Star is centred on node 0; ring needs n >= 3
/// to differ from line.
[[nodiscard]] std::vector<std::vector<std::size_t>> neighbours(topology t, std::size_t n);

struct federation_options {
    std::chrono::milliseconds peer_timeout{3000};
    int ttl = 8;
    std::string token = "harness-token";
    std::uint16_t base_port = 0;  ///< 0 derives the block from the seed
};

class test_federation {
public:
    /// Errors: BindError when no port block could be bound; std::invalid_argument
    /// unless 1 <= n <= 8.
    test_federation(std::size_t n, topology t, std::uint64_t seed, federation_options options = {});
    ~test_federation();

    test_federation(const test_federation&) = delete;
    test_federation& operator=(const test_federation&) = delete;

    [[nodiscard]] std::size_t size() const noexcept { return configs_.size(); }
    [[nodiscard]] bool running(std::size_t i) const noexcept { return nodes_.at(i) != nullptr; }
    [[nodiscard]] node::node& at(std::size_t i);
    [[nodiscard]] const node::node_config& config(std::size_t i) const { return configs_.at(i); }
    [[nodiscard]] const std::filesystem::path& root() const noexcept { return root_; }
    [[nodiscard]] const pseudonym_key& key() const noexcept { return key_; }
    [[nodiscard]] const std::string& token() const noexcept { return options_.token; }

    /// Shuts node i down and releases its ports; its peers see it as down.
    void stop(std::size_t i);
    /// Starts node i again on the same ports and data directory.
    void restart(std::size_t i);

    /// Assigns every file to a node (seeded), stages it and adds it, either
    /// in-process or through the node's DICOM and API ports. Returns the node
    /// index per file and records the expected metadata per node.
    std::vector<std::size_t> ingest(const corpus& c, std::uint64_t partition_seed, bool over_network = false);

    [[nodiscard]] const std::vector<fq::metadata_record>& records_at(std::size_t i) const { return expected_.at(i); }
    [[nodiscard]] std::vector<fq::metadata_record> all_records() const;

    /// Running nodes reachable from node i through running nodes.
    [[nodiscard]] std::vector<std::size_t> reachable_from(std::size_t i) const;
    /// The oracle input for a query originating at node i.
    [[nodiscard]] std::vector<fq::metadata_record> records_reachable_from(std::size_t i) const;
    /// False when some stopped node neighbours the reachable set, so that a
    /// query from node i must report an unreachable site.
    [[nodiscard]] bool expect_complete(std::size_t i) const;

    void set_pushdown(bool enabled);
    [[nodiscard]] std::uint64_t messages_sent() const;
    void reset_message_counts();

private:
    std::filesystem::path root_;
    federation_options options_;
    pseudonym_key key_;
    std::vector<std::vector<std::size_t>> links_;
    std::vector<node::node_config> configs_;
    std::vector<std::unique_ptr<node::node>> nodes_;
    std::vector<std::vector<fq::metadata_record>> expected_;
};

struct workload_options {
    query_shape shape;
    /// Checked per request when non-zero: federated messages sent by all nodes.
    std::uint64_t max_messages = 0;
    /// Pushdown setting applied to every node before the run.
    bool pushdown = true;
};

struct divergence {
    std::size_t case_index = 0;
    std::size_t originator = 0;
    std::string reason;
    std::string fq_xml;
};

struct workload_report {
    std::size_t cases = 0;
    std::size_t requests = 0;
    std::size_t incomplete = 0;  ///< results with complete=false
    std::uint64_t max_messages = 0;
    std::chrono::milliseconds max_latency{0};
    std::vector<divergence> divergences;

    [[nodiscard]] bool clean() const noexcept { return divergences.empty(); }
};

/// Runs `cases` generated queries at every running node through its API
/// port. A result diverges when its rows (LFN order and metadata) differ from
/// fq::evaluate over records_reachable_from(originator), when complete differs
/// from expect_complete(originator), or when the message bound is exceeded.
[[nodiscard]] workload_report run_workload(test_federation& f, std::uint64_t query_seed, std::size_t cases,
                                           const workload_options& options = {});

/// One line per counter, then one line per divergence.
[[nodiscard]] std::string report_summary(const workload_report& r);

/// `<WorkloadReport ...><Divergence case originator reason><Query>FQ XML</Query></Divergence></WorkloadReport>`
[[nodiscard]] std::string report_to_xml(const workload_report& r);

}  // namespace gridbox::harness

#endif  // GRIDBOX_HARNESS_HARNESS_HPP
