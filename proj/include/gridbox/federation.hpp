/**
 * @file federation.hpp
 * @brief Distributed query execution: decompose, run locally, propagate to
 *        peers, merge
 *
 * Requests flood outward with a visited set. A node forwards only to peers not
 * yet visited and adds every target to the set it forwards, so on a complete
 * graph each site is asked exactly once and on any graph a request dies out
 * after at most `ttl` hops. Duplicate LFNs that still arrive through separate
 * paths are removed during the merge.
 *
 * Each forwarded request carries a time budget. A node's own forwards use at
 * most three quarters of the budget it was given, which leaves room for its
 * answer to reach the caller before the caller's own deadline passes.
 */

#ifndef GRIDBOX_FEDERATION_HPP
#define GRIDBOX_FEDERATION_HPP

#include "gridbox/formal_query.hpp"
#include "gridbox/metadata_store.hpp"
#include "gridbox/xml.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gridbox::federation {

using std::chrono::milliseconds;

enum class status_kind { ok, timeout, error };

[[nodiscard]] std::string_view to_string(status_kind s) noexcept;

struct site_status {
    std::string site_id;
    status_kind status = status_kind::ok;
    std::string message;

    bool operator==(const site_status&) const = default;
};

struct result_row {
    std::string lfn;
    /// One value per QueryOrder key, used to merge ordered partial results.
    std::vector<std::optional<std::string>> sort_keys;
    std::optional<fq::attribute_map> metadata;

    bool operator==(const result_row&) const = default;
};

struct site_result {
    std::string site_id;
    status_kind status = status_kind::ok;
    std::string message;
    std::vector<result_row> rows;
    /// Statuses of every site reached through this one, itself included.
    std::vector<site_status> sites;

    bool operator==(const site_result&) const = default;
};

struct query_result {
    std::vector<result_row> rows;
    std::vector<site_status> site_statuses;  ///< sorted by site id
    bool complete = true;

    bool operator==(const query_result&) const = default;
};

struct federated_request {
    fq::formal_query query;
    std::vector<std::string> visited;  ///< originator first
    int ttl = 0;
    std::string request_id;            ///< 32 hex digits
    milliseconds budget{0};            ///< time the sender will wait for the answer

    bool operator==(const federated_request&) const = default;
};

struct peer_info {
    std::string id;
    std::string host;
    std::uint16_t port = 0;

    bool operator==(const peer_info&) const = default;
};

struct analysis {
    fq::formal_query local_fq;
    fq::formal_query remote_fq;
    std::vector<std::string> targets;
};

/// With `pushdown` the sub-queries keep a limit widened to limit+offset and
/// drop the offset; without it both are removed and only the originator cuts.
[[nodiscard]] analysis analyse(const fq::formal_query& q, std::span<const std::string> peers,
                               std::span<const std::string> visited, bool pushdown = true);

/// k-way merge by QueryOrder keys with LFN tie-break, LFN de-duplication
/// (first occurrence wins), then the query's offset and limit. Site statuses
/// are combined per site, preferring ok.
[[nodiscard]] query_result merge_results(const fq::formal_query& q, std::span<const site_result> parts);

/// Orders two rows by the query's QueryOrder keys, then LFN; negative, zero or
/// positive like strcmp.
[[nodiscard]] int compare_rows(const fq::formal_query& q, const result_row& a, const result_row& b);

// Wire codecs (peer protocol payloads).
[[nodiscard]] xml::node request_to_xml(const federated_request& r);
[[nodiscard]] federated_request request_from_xml(const xml::node& n);
[[nodiscard]] xml::node site_result_to_xml(const site_result& r);
[[nodiscard]] site_result site_result_from_xml(const xml::node& n);

inline constexpr std::string_view format_fq_xml = "fq-xml";
inline constexpr std::string_view format_rowset_xml = "rowset-xml";

/// Deterministic rendering of a result. Errors: UnknownFormat.
[[nodiscard]] std::string wrap_result(const query_result& r, std::string_view format);

/// Reads either wrapped format back into rows and statuses.
[[nodiscard]] query_result unwrap_result(std::string_view document);

/// How a node reaches its peers. Implementations must return within the
/// timeout, reporting status timeout when it passes.
class peer_transport {
public:
    virtual ~peer_transport() = default;
    virtual site_result query(const peer_info& peer, const federated_request& request, milliseconds timeout) = 0;
};

struct engine_settings {
    int ttl = 8;
    milliseconds peer_timeout{5000};
    bool pushdown = true;
};

class engine {
public:
    engine(std::string site_id, metadata_store& store, peer_transport& transport, engine_settings settings = {});

    /// Local Query Handler. Store failures become status error.
    [[nodiscard]] site_result handle_local(const fq::formal_query& q);

    /// Remote Query Handler: one forward to one peer.
    [[nodiscard]] site_result handle_remote(const federated_request& request, const peer_info& peer,
                                            milliseconds timeout);

    /// Runs the query here and at every reachable peer. With `incoming`, this
    /// node serves another node's request and leaves the global offset alone.
    [[nodiscard]] query_result federated_query(const fq::formal_query& q,
                                               const std::optional<federated_request>& incoming = std::nullopt);

    /// Peer endpoint entry: federated_query for an incoming request, folded
    /// into one site_result for the caller.
    [[nodiscard]] site_result serve(const federated_request& request);

    void set_peers(std::vector<peer_info> peers);
    [[nodiscard]] std::vector<peer_info> peers() const;

    void set_pushdown(bool enabled) noexcept { pushdown_.store(enabled); }

    [[nodiscard]] const std::string& site_id() const noexcept { return site_id_; }

    /// Federated-query messages this node has sent to peers.
    [[nodiscard]] std::uint64_t messages_sent() const noexcept { return messages_sent_.load(); }
    void reset_message_count() noexcept { messages_sent_.store(0); }

private:
    std::string site_id_;
    metadata_store& store_;
    peer_transport& transport_;
    engine_settings settings_;
    std::atomic<bool> pushdown_;
    mutable std::mutex peers_mutex_;
    std::vector<peer_info> peers_;
    std::atomic<std::uint64_t> messages_sent_{0};
};

}  // namespace gridbox::federation

#endif  // GRIDBOX_FEDERATION_HPP
