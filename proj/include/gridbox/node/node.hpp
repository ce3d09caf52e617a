/**
 * @file node.hpp
 * @brief The gridbox daemon: DICOM store port, client API port and peer port
 *        around one site's catalogue, metadata store and federation engine
 *
 * Acquisition is two-step. A C-STORE only stages the file in memory under its
 * SOP Instance UID; nothing is written to data_dir and nothing becomes
 * queryable until an authenticated add() pseudonymizes, files and indexes it.
 *
 * data_dir layout:
 *     catalogue.db, metadata.db      SQLite databases
 *     files/mg/<site>/...            pseudonymized Part-10 files
 *     files/mg/<site>/....dcm.xml    XML rendering of each stored data set
 */

#ifndef GRIDBOX_NODE_NODE_HPP
#define GRIDBOX_NODE_NODE_HPP

#include "gridbox/federation.hpp"
#include "gridbox/file_catalogue.hpp"
#include "gridbox/metadata_store.hpp"
#include "gridbox/net/dicom_ul.hpp"
#include "gridbox/net/frame.hpp"
#include "gridbox/net/socket.hpp"
#include "gridbox/node/config.hpp"
#include "gridbox/node/protocol.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace gridbox::node {

struct node_counters {
    std::uint64_t connections = 0;
    std::uint64_t requests = 0;
    std::uint64_t auth_failures = 0;
    std::uint64_t stores = 0;
    std::uint64_t adds = 0;
};

class node {
public:
    /// Opens the stores under data_dir, re-indexes any file that was filed but
    /// not yet indexed when the node last stopped, binds the three ports and
    /// starts serving. Errors: ConfigError, BindError (naming the port).
    explicit node(node_config config);
    ~node();

    node(const node&) = delete;
    node& operator=(const node&) = delete;

    /// Stops accepting, lets in-flight requests finish, then returns.
    /// Idempotent.
    void shutdown() noexcept;

    [[nodiscard]] std::uint16_t dicom_port() const noexcept { return dicom_port_; }
    [[nodiscard]] std::uint16_t api_port() const noexcept { return api_port_; }
    [[nodiscard]] std::uint16_t peer_port() const noexcept { return peer_port_; }
    [[nodiscard]] const std::string& site_id() const noexcept { return config_.site_id; }

    // The client API, also reachable in-process. Each call checks the token
    // first and has no side effect when it does not match.

    /// Errors: AuthError, NotStaged, DuplicateSopUid, plus data set errors.
    add_result add(const std::string& sop_uid, std::string_view token);

    /// Errors: AuthError, any parse_fq error, UnknownFormat.
    [[nodiscard]] std::string query(std::string_view fq_xml, std::string_view format, std::string_view token);

    /// Errors: AuthError, BadLfn, NotFound.
    [[nodiscard]] std::vector<std::uint8_t> get(const std::string& lfn, std::string_view token);

    /// Puts a received file in staging, replacing an older one with the same
    /// SOP Instance UID.
    void stage(const std::string& sop_uid, std::vector<std::uint8_t> file_bytes);
    [[nodiscard]] std::optional<std::vector<std::uint8_t>> staged(const std::string& sop_uid);
    [[nodiscard]] std::size_t staged_count();

    void set_peers(std::vector<federation::peer_info> peers);

    [[nodiscard]] federation::engine& engine() noexcept { return *engine_; }
    [[nodiscard]] file_catalogue& catalogue() noexcept { return *catalogue_; }
    [[nodiscard]] metadata_store& store() noexcept { return *store_; }
    [[nodiscard]] node_counters counters() const;

private:
    struct staged_file {
        std::vector<std::uint8_t> bytes;
        std::chrono::steady_clock::time_point received_at;
    };

    void check_token(std::string_view token);
    void evict_expired();
    void recover_index();
    std::vector<std::uint8_t> fetch(const get_request& request);

    std::uint16_t on_store(const dicom::ul::received_instance& instance);

    void accept_loop(net::tcp_listener& listener, int kind);
    void serve_connection(net::tcp_socket socket, int kind);
    bool serve_api_frame(net::tcp_socket& socket, const net::frame& request);
    bool serve_peer_frame(net::tcp_socket& socket, const net::frame& request);

    node_config config_;
    std::unique_ptr<file_catalogue> catalogue_;
    std::unique_ptr<metadata_store> store_;
    std::unique_ptr<tcp_peer_transport> transport_;
    std::unique_ptr<federation::engine> engine_;

    std::mutex staging_mutex_;
    std::map<std::string, staged_file> staging_;

    std::mutex ingest_mutex_;
    std::condition_variable ingest_cv_;
    std::set<std::string> ingesting_;

    std::unique_ptr<net::tcp_listener> dicom_listener_, api_listener_, peer_listener_;
    std::uint16_t dicom_port_ = 0, api_port_ = 0, peer_port_ = 0;

    std::atomic<bool> stopping_{false};
    std::mutex shutdown_mutex_;
    bool stopped_ = false;
    std::vector<std::thread> acceptors_;

    mutable std::mutex active_mutex_;
    std::condition_variable active_cv_;
    std::size_t active_ = 0;

    std::atomic<std::uint64_t> connections_{0}, requests_{0}, auth_failures_{0}, stores_{0}, adds_{0};
};

}  // namespace gridbox::node

#endif  // GRIDBOX_NODE_NODE_HPP
