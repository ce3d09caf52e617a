/**
 * @file protocol.hpp
 * @brief XML payloads carried in API and peer frames, plus the clients that
 *        speak them
 *
 * Every request carries the shared token as an attribute of its root element:
 *
 *     QueryRequest      <QueryRequest token format><Fq>escaped FQ XML</Fq></QueryRequest>
 *     QueryResponse     the wrapped result document
 *     AddRequest        <AddRequest token sop_uid/>
 *     AddResponse       <AddResponse lfn pseudonym/>
 *     GetRequest        <GetRequest token lfn ttl><Visited><Site>id</Site>...</Visited></GetRequest>
 *     FileChunk         raw bytes, terminated by an empty chunk
 *     FederatedQuery    <FederatedQuery token><FederatedRequest .../></FederatedQuery>
 *     FederatedResponse <SiteResult .../>
 *     Error             <Error code="...">message</Error>
 *
 * The FQ travels as text so that a malformed query reaches the node and is
 * answered with an error document rather than breaking the envelope.
 */

#ifndef GRIDBOX_NODE_PROTOCOL_HPP
#define GRIDBOX_NODE_PROTOCOL_HPP

#include "gridbox/federation.hpp"
#include "gridbox/net/frame.hpp"
#include "gridbox/net/socket.hpp"

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gridbox::node {

struct query_request {
    std::string token;
    std::string format = std::string(federation::format_fq_xml);
    std::string fq_xml;
};

struct add_request {
    std::string token;
    std::string sop_uid;
};

struct add_result {
    std::string lfn;
    std::string pseudonym;

    bool operator==(const add_result&) const = default;
};

struct get_request {
    std::string token;
    std::string lfn;
    int ttl = 8;
    std::vector<std::string> visited;
};

struct federated_query_message {
    std::string token;
    federation::federated_request request;
};

// Encoders and decoders. Decoders throw xml_error or protocol_error on a
// payload that does not have the expected shape.
[[nodiscard]] std::string encode(const query_request& r);
[[nodiscard]] std::string encode(const add_request& r);
[[nodiscard]] std::string encode(const add_result& r);
[[nodiscard]] std::string encode(const get_request& r);
[[nodiscard]] std::string encode(const federated_query_message& r);

[[nodiscard]] query_request decode_query_request(std::string_view payload);
[[nodiscard]] add_request decode_add_request(std::string_view payload);
[[nodiscard]] add_result decode_add_result(std::string_view payload);
[[nodiscard]] get_request decode_get_request(std::string_view payload);
[[nodiscard]] federated_query_message decode_federated_query(std::string_view payload);

/// Constant-time token comparison.
[[nodiscard]] bool token_matches(std::string_view expected, std::string_view given) noexcept;

/// Client of a node's API port. One connection, requests sent in turn. Errors
/// reported by the node are rethrown as the gridbox::error they carry.
class api_client {
public:
    api_client(const std::string& host, std::uint16_t port, std::string token,
               std::chrono::milliseconds timeout = std::chrono::seconds(30));

    [[nodiscard]] add_result add(const std::string& sop_uid);
    [[nodiscard]] std::string query(std::string_view fq_xml,
                                    std::string_view format = federation::format_fq_xml);
    [[nodiscard]] std::vector<std::uint8_t> get(const std::string& lfn);

private:
    net::frame round_trip(net::message_type type, std::string_view payload, net::message_type expected);

    net::tcp_socket socket_;
    std::string token_;
    std::chrono::milliseconds timeout_;
};

/// Reaches peers over their peer ports, one connection per request.
class tcp_peer_transport final : public federation::peer_transport {
public:
    explicit tcp_peer_transport(std::string token) : token_(std::move(token)) {}

    federation::site_result query(const federation::peer_info& peer, const federation::federated_request& request,
                                  federation::milliseconds timeout) override;

    /// Fetches a file from a peer. Throws the error the peer reports.
    [[nodiscard]] std::vector<std::uint8_t> fetch(const federation::peer_info& peer, const get_request& request,
                                                  federation::milliseconds timeout) const;

private:
    std::string token_;
};

}  // namespace gridbox::node

#endif  // GRIDBOX_NODE_PROTOCOL_HPP
