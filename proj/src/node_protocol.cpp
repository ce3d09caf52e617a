#include "gridbox/node/protocol.hpp"

#include "gridbox/xml.hpp"

#include <openssl/crypto.h>

namespace gridbox::node {

namespace {

using net::message_type;

xml::node parse_root(std::string_view payload, std::string_view expected) {
    auto n = xml::parse(payload);
    if (n.name != expected) {
        throw error(error_code::protocol_error, "expected <" + std::string(expected) + ">, got <" + n.name + ">");
    }
    return n;
}

std::string required(const xml::node& n, std::string_view key) {
    const auto* v = n.attribute(key);
    if (v == nullptr) throw error(error_code::protocol_error, "<" + n.name + "> lacks " + std::string(key));
    return *v;
}

std::string optional_attr(const xml::node& n, std::string_view key) {
    const auto* v = n.attribute(key);
    return v == nullptr ? std::string() : *v;
}

federation::site_result unreachable(const federation::peer_info& peer, federation::status_kind kind,
                                    std::string message) {
    federation::site_result r;
    r.site_id = peer.id;
    r.status = kind;
    r.message = message;
    r.sites.push_back({peer.id, kind, std::move(message)});
    return r;
}

}  // namespace

std::string encode(const query_request& r) {
    xml::node n("QueryRequest");
    n.set("token", r.token).set("format", r.format);
    xml::node fq("Fq");
    fq.text = r.fq_xml;
    n.add(std::move(fq));
    return xml::render(n);
}

std::string encode(const add_request& r) {
    xml::node n("AddRequest");
    n.set("token", r.token).set("sop_uid", r.sop_uid);
    return xml::render(n);
}

std::string encode(const add_result& r) {
    xml::node n("AddResponse");
    n.set("lfn", r.lfn).set("pseudonym", r.pseudonym);
    return xml::render(n);
}

std::string encode(const get_request& r) {
    xml::node n("GetRequest");
    n.set("token", r.token).set("lfn", r.lfn).set("ttl", std::to_string(r.ttl));
    xml::node visited("Visited");
    for (const auto& v : r.visited) {
        xml::node s("Site");
        s.text = v;
        visited.add(std::move(s));
    }
    n.add(std::move(visited));
    return xml::render(n);
}

std::string encode(const federated_query_message& r) {
    xml::node n("FederatedQuery");
    n.set("token", r.token);
    n.add(federation::request_to_xml(r.request));
    return xml::render(n);
}

query_request decode_query_request(std::string_view payload) {
    auto n = parse_root(payload, "QueryRequest");
    query_request r;
    r.token = optional_attr(n, "token");
    if (const auto* f = n.attribute("format")) r.format = *f;
    const auto* fq = n.child("Fq");
    if (fq == nullptr) throw error(error_code::protocol_error, "<QueryRequest> lacks <Fq>");
    r.fq_xml = fq->text;
    return r;
}

add_request decode_add_request(std::string_view payload) {
    auto n = parse_root(payload, "AddRequest");
    return {optional_attr(n, "token"), required(n, "sop_uid")};
}

add_result decode_add_result(std::string_view payload) {
    auto n = parse_root(payload, "AddResponse");
    return {required(n, "lfn"), required(n, "pseudonym")};
}

get_request decode_get_request(std::string_view payload) {
    auto n = parse_root(payload, "GetRequest");
    get_request r;
    r.token = optional_attr(n, "token");
    r.lfn = required(n, "lfn");
    if (const auto* ttl = n.attribute("ttl")) {
        try {
            r.ttl = std::stoi(*ttl);
        } catch (const std::exception&) {
            throw error(error_code::protocol_error, "bad ttl '" + *ttl + "'");
        }
    }
    if (const auto* visited = n.child("Visited")) {
        for (const auto& s : visited->children) {
            if (s.name == "Site") r.visited.push_back(s.text);
        }
    }
    return r;
}

federated_query_message decode_federated_query(std::string_view payload) {
    auto n = parse_root(payload, "FederatedQuery");
    federated_query_message m;
    m.token = optional_attr(n, "token");
    const auto* req = n.child("FederatedRequest");
    if (req == nullptr) throw error(error_code::protocol_error, "<FederatedQuery> lacks <FederatedRequest>");
    m.request = federation::request_from_xml(*req);
    return m;
}

bool token_matches(std::string_view expected, std::string_view given) noexcept {
    if (expected.size() != given.size() || expected.empty()) return false;
    return CRYPTO_memcmp(expected.data(), given.data(), expected.size()) == 0;
}

// ---------------------------------------------------------------------------

api_client::api_client(const std::string& host, std::uint16_t port, std::string token,
                       std::chrono::milliseconds timeout)
    : socket_(net::connect_tcp(host, port, net::after(timeout))), token_(std::move(token)), timeout_(timeout) {}

net::frame api_client::round_trip(message_type type, std::string_view payload, message_type expected) {
    auto id = random_id128();
    net::write_frame(socket_, net::make_frame(type, id, payload), net::after(timeout_));
    auto reply = net::read_frame(socket_, net::after(timeout_));
    net::expect_frame(reply, expected);
    if (reply.request_id != id) throw error(error_code::protocol_error, "response for another request");
    return reply;
}

add_result api_client::add(const std::string& sop_uid) {
    auto reply = round_trip(message_type::add_request, encode(add_request{token_, sop_uid}), message_type::add_response);
    return decode_add_result(reply.text());
}

std::string api_client::query(std::string_view fq_xml, std::string_view format) {
    query_request r{token_, std::string(format), std::string(fq_xml)};
    auto reply = round_trip(message_type::query_request, encode(r), message_type::query_response);
    return std::string(reply.text());
}

std::vector<std::uint8_t> api_client::get(const std::string& lfn) {
    get_request r;
    r.token = token_;
    r.lfn = lfn;
    net::write_frame(socket_, net::make_frame(message_type::get_request, random_id128(), encode(r)), net::after(timeout_));
    return net::read_file_chunks(socket_, net::after(timeout_));
}

// ---------------------------------------------------------------------------

federation::site_result tcp_peer_transport::query(const federation::peer_info& peer,
                                                  const federation::federated_request& request,
                                                  federation::milliseconds timeout) {
    const auto until = net::after(timeout);
    try {
        auto s = net::connect_tcp(peer.host, peer.port, until);
        auto id = random_id128();
        net::write_frame(s, net::make_frame(message_type::federated_query, id, encode(federated_query_message{token_, request})),
                         until);
        auto reply = net::read_frame(s, until);
        net::expect_frame(reply, message_type::federated_response);
        auto r = federation::site_result_from_xml(xml::parse(reply.text()));
        if (r.site_id != peer.id) {
            return unreachable(peer, federation::status_kind::error,
                               "peer at " + peer.host + ":" + std::to_string(peer.port) + " answered as '" + r.site_id +
                                   "'");
        }
        return r;
    } catch (const error& e) {
        auto kind = e.code() == error_code::timeout ? federation::status_kind::timeout : federation::status_kind::error;
        return unreachable(peer, kind, std::string(to_string(e.code())) + ": " + e.what());
    }
}

std::vector<std::uint8_t> tcp_peer_transport::fetch(const federation::peer_info& peer, const get_request& request,
                                                     federation::milliseconds timeout) const {
    const auto until = net::after(timeout);
    auto s = net::connect_tcp(peer.host, peer.port, until);
    get_request r = request;
    r.token = token_;
    net::write_frame(s, net::make_frame(message_type::get_request, random_id128(), encode(r)), until);
    return net::read_file_chunks(s, until);
}

}  // namespace gridbox::node
