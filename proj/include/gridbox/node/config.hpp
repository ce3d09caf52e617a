/**
 * @file config.hpp
 * @brief Node configuration and its flat key=value file format
 *
 * One setting per line, `key = value`; blank lines and lines starting with
 * '#' are ignored. `peer` may repeat, one neighbour per line as
 * `<site_id> <host> <peer_port>`. Example:
 *
 *     site_id = hospital-a
 *     data_dir = /var/lib/gridbox
 *     dicom_port = 11112
 *     api_port = 7001
 *     peer_port = 7002
 *     peer = hospital-b 10.0.0.2 7002
 *     shared_token = change-me
 *     pseudonym_key = <64 hex digits>
 *
 * Optional keys: listen_host (127.0.0.1), ae_title (GRIDBOX), ttl (8),
 * peer_timeout_ms (5000), staging_ttl_s (3600), max_concurrency (64).
 */

#ifndef GRIDBOX_NODE_CONFIG_HPP
#define GRIDBOX_NODE_CONFIG_HPP

#include "gridbox/anonymizer.hpp"
#include "gridbox/federation.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gridbox::node {

struct node_config {
    std::string site_id;
    std::filesystem::path data_dir;
    std::string listen_host = "127.0.0.1";
    std::uint16_t dicom_port = 0;  ///< 0 picks a free port
    std::uint16_t api_port = 0;
    std::uint16_t peer_port = 0;
    std::vector<federation::peer_info> peers;
    std::string shared_token;
    pseudonym_key key;
    std::string ae_title = "GRIDBOX";
    int ttl = 8;
    std::chrono::milliseconds peer_timeout{5000};
    std::chrono::seconds staging_ttl{3600};
    std::size_t max_concurrency = 64;
};

/// Throws config_error naming the offending line or key.
[[nodiscard]] node_config parse_config(std::string_view text);

/// Reads and parses a config file. A missing file is a config_error.
[[nodiscard]] node_config load_config(const std::filesystem::path& path);

/// The file to load: MG_CONFIG when set, else `given`. Throws config_error
/// when neither is available.
[[nodiscard]] std::filesystem::path resolve_config_path(const std::optional<std::filesystem::path>& given);

/// Checks the invariants parse_config enforces, for configs built in code.
void validate_config(const node_config& config);

}  // namespace gridbox::node

#endif  // GRIDBOX_NODE_CONFIG_HPP
