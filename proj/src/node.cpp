#include "gridbox/node/node.hpp"

#include "gridbox/anonymizer.hpp"
#include "gridbox/dicom/codec.hpp"
#include "gridbox/dicom/summary.hpp"
#include "gridbox/dicom/xml_dataset.hpp"
#include "gridbox/error.hpp"
#include "gridbox/formal_query.hpp"
#include "gridbox/xml.hpp"

#include <algorithm>
#include <span>

namespace gridbox::node {

namespace {

using namespace std::chrono_literals;
using net::message_type;

enum listener_kind : int { dicom_kind = 0, api_kind = 1, peer_kind = 2 };

constexpr auto poll_slice = 100ms;
constexpr auto idle_limit = std::chrono::minutes(5);
constexpr auto io_limit = 60s;

std::span<const std::uint8_t> as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::unique_ptr<net::tcp_listener> bind_port(const std::string& host, std::uint16_t port, std::string_view name) {
    try {
        return std::make_unique<net::tcp_listener>(host, port);
    } catch (const error& e) {
        throw error(error_code::bind_error, std::string(name) + ": " + e.what());
    }
}

}  // namespace

node::node(node_config config) : config_(std::move(config)) {
    validate_config(config_);
    std::filesystem::create_directories(config_.data_dir);
    catalogue_ = std::make_unique<file_catalogue>(config_.data_dir, config_.site_id);
    store_ = std::make_unique<metadata_store>(config_.data_dir / "metadata.db");
    transport_ = std::make_unique<tcp_peer_transport>(config_.shared_token);
    federation::engine_settings settings;
    settings.ttl = config_.ttl;
    settings.peer_timeout = config_.peer_timeout;
    engine_ = std::make_unique<federation::engine>(config_.site_id, *store_, *transport_, settings);
    engine_->set_peers(config_.peers);
    recover_index();

    dicom_listener_ = bind_port(config_.listen_host, config_.dicom_port, "dicom_port");
    api_listener_ = bind_port(config_.listen_host, config_.api_port, "api_port");
    peer_listener_ = bind_port(config_.listen_host, config_.peer_port, "peer_port");
    dicom_port_ = dicom_listener_->port();
    api_port_ = api_listener_->port();
    peer_port_ = peer_listener_->port();

    acceptors_.emplace_back([this] { accept_loop(*dicom_listener_, dicom_kind); });
    acceptors_.emplace_back([this] { accept_loop(*api_listener_, api_kind); });
    acceptors_.emplace_back([this] { accept_loop(*peer_listener_, peer_kind); });
}

node::~node() { shutdown(); }

void node::shutdown() noexcept {
    {
        std::lock_guard lock(shutdown_mutex_);
        if (stopped_) return;
        stopped_ = true;
    }
    stopping_.store(true);
    for (auto& t : acceptors_) {
        if (t.joinable()) t.join();
    }
    dicom_listener_.reset();
    api_listener_.reset();
    peer_listener_.reset();
    std::unique_lock lock(active_mutex_);
    active_cv_.wait(lock, [this] { return active_ == 0; });
}

node_counters node::counters() const {
    return {connections_.load(), requests_.load(), auth_failures_.load(), stores_.load(), adds_.load()};
}

void node::set_peers(std::vector<federation::peer_info> peers) { engine_->set_peers(std::move(peers)); }

void node::check_token(std::string_view token) {
    if (!token_matches(config_.shared_token, token)) {
        ++auth_failures_;
        throw error(error_code::auth_error, "invalid token");
    }
}

// Files that reached the catalogue but not the metadata store (a crash between
// the two steps of add) are indexed again from the stored, already
// pseudonymized bytes.
void node::recover_index() {
    std::vector<std::string> local;
    for (const auto& e : catalogue_->entries()) {
        if (e.site_id == config_.site_id && !e.physical_path.empty()) local.push_back(e.lfn);
    }
    std::set<std::string> indexed;
    for (const auto& r : store_->fetch_metadata(local)) indexed.insert(r.lfn);
    for (const auto& lfn : local) {
        if (indexed.contains(lfn)) continue;
        auto ds = dicom::parse_file(catalogue_->get_file(lfn));
        store_->ingest(fq::make_record(dicom::extract_summary(ds), lfn));
    }
}

// ---------------------------------------------------------------------------
// Staging

void node::evict_expired() {
    const auto now = std::chrono::steady_clock::now();
    std::erase_if(staging_, [&](const auto& kv) { return now - kv.second.received_at >= config_.staging_ttl; });
}

void node::stage(const std::string& sop_uid, std::vector<std::uint8_t> file_bytes) {
    std::lock_guard lock(staging_mutex_);
    evict_expired();
    staging_[sop_uid] = staged_file{std::move(file_bytes), std::chrono::steady_clock::now()};
}

std::optional<std::vector<std::uint8_t>> node::staged(const std::string& sop_uid) {
    std::lock_guard lock(staging_mutex_);
    evict_expired();
    auto it = staging_.find(sop_uid);
    if (it == staging_.end()) return std::nullopt;
    return it->second.bytes;
}

std::size_t node::staged_count() {
    std::lock_guard lock(staging_mutex_);
    evict_expired();
    return staging_.size();
}

std::uint16_t node::on_store(const dicom::ul::received_instance& instance) {
    auto ds = dicom::decode_dataset(instance.dataset_bytes, instance.transfer_syntax_uid);
    auto sop = ds.text(dicom::tags::sop_instance_uid);
    if (!sop || sop->empty()) throw error(error_code::missing_sop_uid, "data set has no SOP Instance UID");
    auto sop_class = ds.text(dicom::tags::sop_class_uid).value_or(instance.sop_class_uid);
    stage(*sop, dicom::wrap_part10(sop_class, *sop, instance.transfer_syntax_uid, instance.dataset_bytes));
    ++stores_;
    return dicom::ul::status_success;
}

// ---------------------------------------------------------------------------
// Client API

add_result node::add(const std::string& sop_uid, std::string_view token) {
    check_token(token);

    {
        std::unique_lock lock(ingest_mutex_);
        ingest_cv_.wait(lock, [&] { return !ingesting_.contains(sop_uid); });
        ingesting_.insert(sop_uid);
    }
    struct release_guard {
        node* self;
        const std::string& sop;
        ~release_guard() {
            std::lock_guard lock(self->ingest_mutex_);
            self->ingesting_.erase(sop);
            self->ingest_cv_.notify_all();
        }
    } guard{this, sop_uid};

    std::vector<std::uint8_t> original;
    {
        std::lock_guard lock(staging_mutex_);
        evict_expired();
        auto it = staging_.find(sop_uid);
        if (it == staging_.end()) throw error(error_code::not_staged, "no staged file for SOP instance " + sop_uid);
        original = it->second.bytes;
    }

    auto anon = pseudonymize(dicom::parse_file(original), config_.key);
    auto summary = dicom::extract_summary(anon.dataset);
    if (!summary.study_uid || !summary.series_uid) {
        throw error(error_code::constraint_violation, "SOP instance " + sop_uid + " lacks a study or series UID");
    }
    auto lfn = make_lfn(config_.site_id, anon.pseudonym, *summary.study_uid, summary.sop_uid);
    if (auto existing = store_->lfn_for_sop(summary.sop_uid)) {
        throw error(error_code::duplicate_sop_uid, "SOP instance " + summary.sop_uid + " is already stored as " + *existing);
    }

    // A catalogue entry without metadata is the remains of an add that failed
    // between its last two steps; finishing the indexing completes it.
    if (!catalogue_->lookup(lfn)) {
        auto audit = dicom::dataset_to_xml(anon.dataset);
        auto audit_path = catalogue_->physical_path(lfn);
        audit_path += ".xml";
        write_file_durably(audit_path, as_bytes(audit.document));
        auto file = dicom::serialize_file(anon.dataset, dicom::transfer_syntax::explicit_vr_little_endian);
        catalogue_->add_file(file, lfn, config_.site_id);
    }
    store_->ingest(fq::make_record(summary, lfn));

    {
        std::lock_guard lock(staging_mutex_);
        auto it = staging_.find(sop_uid);
        if (it != staging_.end() && it->second.bytes == original) staging_.erase(it);
    }
    ++adds_;
    return {lfn, anon.pseudonym};
}

std::string node::query(std::string_view fq_xml, std::string_view format, std::string_view token) {
    check_token(token);
    auto q = fq::parse_fq(fq_xml);
    (void)federation::wrap_result({}, format);  // rejects an unknown format before any work
    return federation::wrap_result(engine_->federated_query(q), format);
}

std::vector<std::uint8_t> node::get(const std::string& lfn, std::string_view token) {
    check_token(token);
    check_lfn(lfn);
    get_request r;
    r.lfn = lfn;
    r.ttl = config_.ttl;
    return fetch(r);
}

// Local LFNs come from the catalogue. Others are looked for at unvisited
// neighbours, the owning site first, each neighbour continuing the search
// with the same visited-set rule a federated query uses.
std::vector<std::uint8_t> node::fetch(const get_request& request) {
    if (lfn_site(request.lfn) == config_.site_id) return catalogue_->get_file(request.lfn);

    std::vector<std::string> visited = request.visited;
    if (std::find(visited.begin(), visited.end(), config_.site_id) == visited.end()) visited.push_back(config_.site_id);
    if (request.ttl <= 0) throw error(error_code::not_found, request.lfn + " not found within the hop limit");

    const auto owner = lfn_site(request.lfn);
    std::vector<federation::peer_info> candidates;
    for (const auto& p : engine_->peers()) {
        if (std::find(visited.begin(), visited.end(), p.id) == visited.end()) candidates.push_back(p);
    }
    std::stable_partition(candidates.begin(), candidates.end(), [&](const auto& p) { return p.id == owner; });

    get_request next;
    next.lfn = request.lfn;
    next.ttl = request.ttl - 1;
    next.visited = visited;
    for (const auto& p : candidates) next.visited.push_back(p.id);

    std::string unreachable;
    for (const auto& p : candidates) {
        try {
            return transport_->fetch(p, next, config_.peer_timeout);
        } catch (const error& e) {
            if (e.code() != error_code::not_found) unreachable += " " + p.id + " (" + e.what() + ")";
        }
    }
    throw error(error_code::not_found,
                request.lfn + " not found" + (unreachable.empty() ? "" : "; unreachable:" + unreachable));
}

// ---------------------------------------------------------------------------
// Listeners

void node::accept_loop(net::tcp_listener& listener, int kind) {
    while (!stopping_.load()) {
        {
            std::unique_lock lock(active_mutex_);
            active_cv_.wait_for(lock, poll_slice,
                                [this] { return active_ < config_.max_concurrency || stopping_.load(); });
            if (stopping_.load()) break;
            if (active_ >= config_.max_concurrency) continue;
        }
        auto socket = listener.accept(net::after(poll_slice));
        if (!socket) continue;
        {
            std::lock_guard lock(active_mutex_);
            ++active_;
        }
        ++connections_;
        std::thread([this, s = std::move(*socket), kind]() mutable {
            serve_connection(std::move(s), kind);
            std::lock_guard lock(active_mutex_);
            --active_;
            active_cv_.notify_all();
        }).detach();
    }
}

void node::serve_connection(net::tcp_socket socket, int kind) {
    if (kind == dicom_kind) {
        dicom::ul::scp_settings settings;
        settings.ae_title = config_.ae_title;
        dicom::ul::serve_association(socket, settings,
                                     [this](const dicom::ul::received_instance& i) { return on_store(i); });
        return;
    }
    try {
        for (;;) {
            const auto idle_until = net::after(idle_limit);
            bool ready = false;
            while (!stopping_.load() && net::clock::now() < idle_until) {
                if (socket.wait_readable(net::after(poll_slice))) {
                    ready = true;
                    break;
                }
            }
            if (!ready) return;

            net::frame request;
            try {
                request = net::read_frame(socket, net::after(io_limit));
            } catch (const error& e) {
                if (e.code() == error_code::protocol_error) {
                    net::write_frame(socket,
                                     net::make_frame(message_type::error, {}, net::error_document(e.code(), e.what())),
                                     net::after(io_limit));
                }
                return;
            }
            ++requests_;
            bool keep = kind == api_kind ? serve_api_frame(socket, request) : serve_peer_frame(socket, request);
            if (!keep) return;
        }
    } catch (...) {
        // The connection is gone or unusable; nothing else depends on it.
    }
}

bool node::serve_api_frame(net::tcp_socket& socket, const net::frame& request) {
    auto reply = [&](message_type type, std::string_view payload) {
        net::write_frame(socket, net::make_frame(type, request.request_id, payload), net::after(io_limit));
    };
    try {
        switch (request.type) {
            case message_type::query_request: {
                auto r = decode_query_request(request.text());
                reply(message_type::query_response, query(r.fq_xml, r.format, r.token));
                return true;
            }
            case message_type::add_request: {
                auto r = decode_add_request(request.text());
                reply(message_type::add_response, encode(add(r.sop_uid, r.token)));
                return true;
            }
            case message_type::get_request: {
                auto r = decode_get_request(request.text());
                auto bytes = get(r.lfn, r.token);
                net::write_file_chunks(socket, request.request_id, bytes, net::after(io_limit));
                return true;
            }
            default:
                reply(message_type::error,
                      net::error_document(error_code::protocol_error, "message type not served on the API port"));
                return true;
        }
    } catch (const error& e) {
        reply(message_type::error, net::error_document(e.code(), e.what()));
    } catch (const std::exception& e) {
        reply(message_type::error, net::error_document(error_code::io_error, e.what()));
    }
    return true;
}

bool node::serve_peer_frame(net::tcp_socket& socket, const net::frame& request) {
    auto reply = [&](message_type type, std::string_view payload) {
        net::write_frame(socket, net::make_frame(type, request.request_id, payload), net::after(io_limit));
    };
    auto refuse = [&] {
        ++auth_failures_;
        reply(message_type::error, net::error_document(error_code::auth_error, "invalid token"));
        return false;
    };
    try {
        switch (request.type) {
            case message_type::federated_query: {
                auto m = decode_federated_query(request.text());
                if (!token_matches(config_.shared_token, m.token)) return refuse();
                auto result = engine_->serve(m.request);
                reply(message_type::federated_response, xml::render(federation::site_result_to_xml(result)));
                return true;
            }
            case message_type::get_request: {
                auto r = decode_get_request(request.text());
                if (!token_matches(config_.shared_token, r.token)) return refuse();
                check_lfn(r.lfn);
                auto bytes = fetch(r);
                net::write_file_chunks(socket, request.request_id, bytes, net::after(io_limit));
                return true;
            }
            default:
                reply(message_type::error,
                      net::error_document(error_code::protocol_error, "message type not served on the peer port"));
                return true;
        }
    } catch (const error& e) {
        reply(message_type::error, net::error_document(e.code(), e.what()));
    } catch (const std::exception& e) {
        reply(message_type::error, net::error_document(error_code::io_error, e.what()));
    }
    return true;
}

}  // namespace gridbox::node
