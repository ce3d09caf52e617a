#include "gridbox/node/config.hpp"

#include "gridbox/error.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace gridbox::node {

namespace {

[[noreturn]] void fail(const std::string& message) { throw error(error_code::config_error, message); }

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool valid_site_id(std::string_view s) {
    if (s.empty() || s == "." || s == "..") return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' || c == '_' ||
               c == '-';
    });
}

std::int64_t parse_integer(std::string_view key, std::string_view value, std::int64_t lo, std::int64_t hi) {
    std::int64_t out = 0;
    auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || end != value.data() + value.size() || out < lo || out > hi) {
        fail("invalid value '" + std::string(value) + "' for " + std::string(key) + " (expected an integer in " +
             std::to_string(lo) + ".." + std::to_string(hi) + ")");
    }
    return out;
}

std::uint16_t parse_port(std::string_view key, std::string_view value) {
    std::int64_t out = 0;
    auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || end != value.data() + value.size() || out < 0 || out > 65535) {
        fail("invalid port " + std::string(value) + " for " + std::string(key));
    }
    return static_cast<std::uint16_t>(out);
}

federation::peer_info parse_peer(std::string_view value) {
    std::istringstream in{std::string(value)};
    federation::peer_info p;
    std::string port, extra;
    if (!(in >> p.id >> p.host >> port) || (in >> extra)) {
        fail("peer must be '<site_id> <host> <port>', got '" + std::string(value) + "'");
    }
    if (!valid_site_id(p.id)) fail("invalid peer site id '" + p.id + "'");
    p.port = parse_port("peer " + p.id, port);
    if (p.port == 0) fail("invalid port 0 for peer " + p.id);
    return p;
}

}  // namespace

void validate_config(const node_config& c) {
    if (c.site_id.empty()) fail("site_id is required");
    if (!valid_site_id(c.site_id)) fail("invalid site_id '" + c.site_id + "'");
    if (c.data_dir.empty()) fail("data_dir is required");
    if (c.shared_token.empty()) fail("shared_token is required");
    if (c.key == pseudonym_key{}) fail("pseudonym_key is required");
    if (c.max_concurrency == 0) fail("max_concurrency must be positive");

    std::set<std::uint16_t> ports;
    for (auto [name, port] : {std::pair{"dicom_port", c.dicom_port}, std::pair{"api_port", c.api_port},
                              std::pair{"peer_port", c.peer_port}}) {
        if (port != 0 && !ports.insert(port).second) {
            fail(std::string(name) + " " + std::to_string(port) + " duplicates another listener port");
        }
    }
    std::set<std::string> ids;
    for (const auto& p : c.peers) {
        if (p.id == c.site_id) fail("peer list names this node's own site_id '" + p.id + "'");
        if (!ids.insert(p.id).second) fail("peer '" + p.id + "' is listed twice");
    }
}

node_config parse_config(std::string_view text) {
    node_config c;
    std::set<std::string> seen;
    bool have_key = false;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        auto line = trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') continue;

        auto eq = line.find('=');
        if (eq == std::string_view::npos) fail("line " + std::to_string(line_no) + ": expected key = value");
        std::string key(trim(line.substr(0, eq)));
        std::string_view value = trim(line.substr(eq + 1));
        if (key != "peer" && !seen.insert(key).second) fail("line " + std::to_string(line_no) + ": duplicate key " + key);

        if (key == "site_id") {
            c.site_id = value;
        } else if (key == "data_dir") {
            c.data_dir = std::string(value);
        } else if (key == "listen_host") {
            c.listen_host = value;
        } else if (key == "dicom_port") {
            c.dicom_port = parse_port(key, value);
        } else if (key == "api_port") {
            c.api_port = parse_port(key, value);
        } else if (key == "peer_port") {
            c.peer_port = parse_port(key, value);
        } else if (key == "peer") {
            c.peers.push_back(parse_peer(value));
        } else if (key == "shared_token") {
            c.shared_token = value;
        } else if (key == "pseudonym_key") {
            c.key = pseudonym_key::from_hex(value);
            have_key = true;
        } else if (key == "ae_title") {
            if (value.empty() || value.size() > 16) fail("ae_title must be 1 to 16 characters");
            c.ae_title = value;
        } else if (key == "ttl") {
            c.ttl = static_cast<int>(parse_integer(key, value, 0, 64));
        } else if (key == "peer_timeout_ms") {
            c.peer_timeout = std::chrono::milliseconds(parse_integer(key, value, 1, 3'600'000));
        } else if (key == "staging_ttl_s") {
            c.staging_ttl = std::chrono::seconds(parse_integer(key, value, 1, 7 * 24 * 3600));
        } else if (key == "max_concurrency") {
            c.max_concurrency = static_cast<std::size_t>(parse_integer(key, value, 1, 4096));
        } else {
            fail("line " + std::to_string(line_no) + ": unknown key " + key);
        }
    }
    if (!have_key) fail("pseudonym_key is required");
    validate_config(c);
    return c;
}

node_config load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot read config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

std::filesystem::path resolve_config_path(const std::optional<std::filesystem::path>& given) {
    if (const char* env = std::getenv("MG_CONFIG"); env != nullptr && *env != '\0') return env;
    if (given) return *given;
    fail("no config file given (use --config or MG_CONFIG)");
}

}  // namespace gridbox::node
