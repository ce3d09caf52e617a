#include "gridbox/federation.hpp"

#include "gridbox/error.hpp"
#include "gridbox/random_id.hpp"

#include <algorithm>
#include <charconv>
#include <future>
#include <map>
#include <queue>
#include <set>
#include <unordered_set>

namespace gridbox::federation {

namespace {

std::int64_t parse_integer(std::string_view text, std::string_view what) {
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        throw error(error_code::protocol_error, "bad integer for " + std::string(what) + ": '" + std::string(text) + "'");
    }
    return out;
}

status_kind parse_status(std::string_view text) {
    if (text == "ok") return status_kind::ok;
    if (text == "timeout") return status_kind::timeout;
    if (text == "error") return status_kind::error;
    throw error(error_code::protocol_error, "unknown site status '" + std::string(text) + "'");
}

const std::string& required_attribute(const xml::node& n, std::string_view key) {
    const auto* v = n.attribute(key);
    if (v == nullptr) {
        throw error(error_code::protocol_error, "<" + n.name + "> lacks attribute '" + std::string(key) + "'");
    }
    return *v;
}

std::string attribute_or_empty(const xml::node& n, std::string_view key) {
    const auto* v = n.attribute(key);
    return v != nullptr ? *v : std::string{};
}

bool is_null(const xml::node& n) {
    const auto* v = n.attribute("null");
    return v != nullptr && *v == "true";
}

xml::node optional_text(std::string name, const std::optional<std::string>& value) {
    xml::node n(std::move(name));
    if (value) n.text = *value;
    else n.set("null", "true");
    return n;
}

std::optional<std::string> optional_text_of(const xml::node& n) {
    if (is_null(n)) return std::nullopt;
    return n.text;
}

xml::node status_node(const char* name, const site_status& s) {
    xml::node n(name);
    n.set("id", s.site_id);
    n.set("status", std::string(to_string(s.status)));
    if (!s.message.empty()) n.set("message", s.message);
    return n;
}

site_status status_from_node(const xml::node& n) {
    return {required_attribute(n, "id"), parse_status(required_attribute(n, "status")), attribute_or_empty(n, "message")};
}

/// Column list of the tabular format: LFN then every metadata attribute.
std::vector<std::string> metadata_columns() {
    std::vector<std::string> out;
    for (const auto& a : fq::schema_attributes()) out.emplace_back(a.name);
    out.emplace_back(fq::pixel_spacing_attribute);
    return out;
}

std::string_view sql_type_of(std::string_view attribute) {
    const auto* a = fq::find_attribute(attribute);
    return a != nullptr && a->type == fq::attribute_type::integer ? "INTEGER" : "VARCHAR";
}

/// Combines statuses per site. A site that answered anywhere counts as ok.
std::vector<site_status> combine_statuses(std::span<const site_result> parts) {
    std::map<std::string, site_status> by_site;
    for (const auto& part : parts) {
        for (const auto& s : part.sites) {
            auto [it, inserted] = by_site.try_emplace(s.site_id, s);
            if (!inserted && it->second.status != status_kind::ok && s.status == status_kind::ok) it->second = s;
        }
    }
    std::vector<site_status> out;
    out.reserve(by_site.size());
    for (auto& [id, s] : by_site) out.push_back(std::move(s));
    return out;
}

site_result failed(const std::string& site_id, status_kind kind, std::string message) {
    site_result r;
    r.site_id = site_id;
    r.status = kind;
    r.message = message;
    r.sites.push_back({site_id, kind, std::move(message)});
    return r;
}

}  // namespace

std::string_view to_string(status_kind s) noexcept {
    switch (s) {
        case status_kind::ok: return "ok";
        case status_kind::timeout: return "timeout";
        case status_kind::error: return "error";
    }
    return "error";
}

analysis analyse(const fq::formal_query& q, std::span<const std::string> peers, std::span<const std::string> visited,
                 bool pushdown) {
    analysis out;
    out.local_fq = q;
    if (pushdown) {
        if (q.limit) out.local_fq.limit = *q.limit + q.offset.value_or(0);
    } else {
        out.local_fq.limit.reset();
    }
    out.local_fq.offset.reset();
    out.remote_fq = out.local_fq;

    std::set<std::string_view> seen(visited.begin(), visited.end());
    for (const auto& p : peers) {
        if (seen.insert(p).second) out.targets.push_back(p);
    }
    return out;
}

int compare_rows(const fq::formal_query& q, const result_row& a, const result_row& b) {
    for (std::size_t i = 0; i < q.order.size(); ++i) {
        const auto* attr = fq::find_attribute(q.order[i].attribute);
        static const std::optional<std::string> missing;
        const auto& ka = i < a.sort_keys.size() ? a.sort_keys[i] : missing;
        const auto& kb = i < b.sort_keys.size() ? b.sort_keys[i] : missing;
        int c = attr != nullptr ? fq::compare_values(*attr, ka, kb) : 0;
        if (c != 0) return q.order[i].descending ? -c : c;
    }
    return a.lfn.compare(b.lfn);
}

query_result merge_results(const fq::formal_query& q, std::span<const site_result> parts) {
    auto less = [&](const result_row& a, const result_row& b) { return compare_rows(q, a, b) < 0; };

    // Sites are asked to return ordered rows. Sorting again is cheap insurance
    // against a peer that does not, and keeps the merge below correct.
    std::vector<std::vector<result_row>> runs;
    runs.reserve(parts.size());
    for (const auto& part : parts) {
        if (part.status != status_kind::ok || part.rows.empty()) continue;
        auto rows = part.rows;
        std::stable_sort(rows.begin(), rows.end(), less);
        runs.push_back(std::move(rows));
    }

    using cursor = std::pair<std::size_t, std::size_t>;  // run, position
    auto heap_after = [&](const cursor& x, const cursor& y) {
        int c = compare_rows(q, runs[x.first][x.second], runs[y.first][y.second]);
        return c != 0 ? c > 0 : x.first > y.first;
    };
    std::priority_queue<cursor, std::vector<cursor>, decltype(heap_after)> heap(heap_after);
    for (std::size_t r = 0; r < runs.size(); ++r) heap.emplace(r, 0);

    query_result out;
    std::unordered_set<std::string> seen;
    const auto skip = static_cast<std::size_t>(q.offset.value_or(0));
    const auto keep = q.limit ? std::optional<std::size_t>(static_cast<std::size_t>(*q.limit)) : std::nullopt;
    std::size_t unique = 0;
    while (!heap.empty() && (!keep || out.rows.size() < *keep)) {
        auto [r, pos] = heap.top();
        heap.pop();
        auto& row = runs[r][pos];
        if (pos + 1 < runs[r].size()) heap.emplace(r, pos + 1);
        if (!seen.insert(row.lfn).second) continue;
        if (unique++ < skip) continue;
        out.rows.push_back(std::move(row));
    }

    out.site_statuses = combine_statuses(parts);
    out.complete = std::all_of(out.site_statuses.begin(), out.site_statuses.end(),
                               [](const site_status& s) { return s.status == status_kind::ok; });
    return out;
}

// ---------------------------------------------------------------------------
// Peer payloads

xml::node request_to_xml(const federated_request& r) {
    xml::node root("FederatedRequest");
    root.set("id", r.request_id);
    root.set("ttl", std::to_string(r.ttl));
    root.set("budget_ms", std::to_string(r.budget.count()));
    xml::node visited("Visited");
    for (const auto& v : r.visited) {
        xml::node site("Site");
        site.text = v;
        visited.add(std::move(site));
    }
    root.add(std::move(visited));
    root.add(fq::query_to_xml(r.query));
    return root;
}

federated_request request_from_xml(const xml::node& n) {
    if (n.name != "FederatedRequest") throw error(error_code::protocol_error, "expected <FederatedRequest>");
    federated_request r;
    r.request_id = required_attribute(n, "id");
    r.ttl = static_cast<int>(parse_integer(required_attribute(n, "ttl"), "ttl"));
    r.budget = milliseconds(parse_integer(required_attribute(n, "budget_ms"), "budget_ms"));
    if (r.ttl < 0 || r.budget.count() < 0) throw error(error_code::protocol_error, "negative ttl or budget");
    const auto* visited = n.child("Visited");
    const auto* query = n.child("Query");
    if (visited == nullptr || query == nullptr) {
        throw error(error_code::protocol_error, "<FederatedRequest> needs <Visited> and <Query>");
    }
    for (const auto& site : visited->children) r.visited.push_back(site.text);
    r.query = fq::query_from_xml(*query);
    return r;
}

xml::node site_result_to_xml(const site_result& r) {
    xml::node root("SiteResult");
    root.set("site", r.site_id);
    root.set("status", std::string(to_string(r.status)));
    if (!r.message.empty()) root.set("message", r.message);
    for (const auto& row : r.rows) {
        xml::node rn("Row");
        rn.set("lfn", row.lfn);
        for (const auto& k : row.sort_keys) rn.add(optional_text("Key", k));
        if (row.metadata) {
            xml::node meta("Metadata");
            for (const auto& [name, value] : *row.metadata) {
                auto a = optional_text("Attribute", value);
                a.set("name", name);
                meta.add(std::move(a));
            }
            rn.add(std::move(meta));
        }
        root.add(std::move(rn));
    }
    for (const auto& s : r.sites) root.add(status_node("Site", s));
    return root;
}

site_result site_result_from_xml(const xml::node& n) {
    if (n.name != "SiteResult") throw error(error_code::protocol_error, "expected <SiteResult>");
    site_result r;
    r.site_id = required_attribute(n, "site");
    r.status = parse_status(required_attribute(n, "status"));
    r.message = attribute_or_empty(n, "message");
    for (const auto& c : n.children) {
        if (c.name == "Row") {
            result_row row;
            row.lfn = required_attribute(c, "lfn");
            for (const auto& k : c.children) {
                if (k.name == "Key") {
                    row.sort_keys.push_back(optional_text_of(k));
                } else if (k.name == "Metadata") {
                    fq::attribute_map meta;
                    for (const auto& a : k.children) meta[required_attribute(a, "name")] = optional_text_of(a);
                    row.metadata = std::move(meta);
                }
            }
            r.rows.push_back(std::move(row));
        } else if (c.name == "Site") {
            r.sites.push_back(status_from_node(c));
        }
    }
    if (r.status != status_kind::ok && !r.rows.empty()) {
        throw error(error_code::protocol_error, "failed site result carries rows");
    }
    return r;
}

// ---------------------------------------------------------------------------
// Client-facing result documents

std::string wrap_result(const query_result& r, std::string_view format) {
    if (format == format_fq_xml) {
        xml::node root("QueryResult");
        root.set("complete", r.complete ? "true" : "false");
        root.set("rows", std::to_string(r.rows.size()));
        xml::node sites("Sites");
        for (const auto& s : r.site_statuses) sites.add(status_node("Site", s));
        root.add(std::move(sites));
        for (const auto& row : r.rows) {
            xml::node rn("Row");
            rn.set("lfn", row.lfn);
            if (row.metadata) {
                for (const auto& [name, value] : *row.metadata) {
                    auto a = optional_text("Attribute", value);
                    a.set("name", name);
                    rn.add(std::move(a));
                }
            }
            root.add(std::move(rn));
        }
        return xml::render(root);
    }

    if (format == format_rowset_xml) {
        bool with_metadata = std::any_of(r.rows.begin(), r.rows.end(), [](const result_row& x) { return x.metadata.has_value(); });
        std::vector<std::string> columns{"LFN"};
        if (with_metadata) {
            auto meta = metadata_columns();
            columns.insert(columns.end(), meta.begin(), meta.end());
        }

        xml::node root("webRowSet");
        xml::node props("properties");
        xml::node complete("complete");
        complete.text = r.complete ? "true" : "false";
        props.add(std::move(complete));
        for (const auto& s : r.site_statuses) props.add(status_node("site", s));
        root.add(std::move(props));

        xml::node meta("metadata");
        xml::node count("column-count");
        count.text = std::to_string(columns.size());
        meta.add(std::move(count));
        for (std::size_t i = 0; i < columns.size(); ++i) {
            xml::node def("column-definition");
            xml::node idx("column-index");
            idx.text = std::to_string(i + 1);
            xml::node name("column-name");
            name.text = columns[i];
            xml::node type("column-type");
            type.text = std::string(i == 0 ? "VARCHAR" : sql_type_of(columns[i]));
            def.add(std::move(idx));
            def.add(std::move(name));
            def.add(std::move(type));
            meta.add(std::move(def));
        }
        root.add(std::move(meta));

        xml::node data("data");
        for (const auto& row : r.rows) {
            xml::node current("currentRow");
            xml::node lfn("columnValue");
            lfn.text = row.lfn;
            current.add(std::move(lfn));
            for (std::size_t i = 1; i < columns.size(); ++i) {
                std::optional<std::string> value;
                if (row.metadata) {
                    auto it = row.metadata->find(columns[i]);
                    if (it != row.metadata->end()) value = it->second;
                }
                current.add(optional_text("columnValue", value));
            }
            data.add(std::move(current));
        }
        root.add(std::move(data));
        return xml::render(root);
    }

    throw error(error_code::unknown_format, "unknown result format '" + std::string(format) + "'");
}

query_result unwrap_result(std::string_view document) {
    auto root = xml::parse(document);
    query_result out;

    if (root.name == "QueryResult") {
        out.complete = required_attribute(root, "complete") == "true";
        for (const auto& c : root.children) {
            if (c.name == "Sites") {
                for (const auto& s : c.children) out.site_statuses.push_back(status_from_node(s));
            } else if (c.name == "Row") {
                result_row row;
                row.lfn = required_attribute(c, "lfn");
                if (!c.children.empty()) {
                    fq::attribute_map meta;
                    for (const auto& a : c.children) meta[required_attribute(a, "name")] = optional_text_of(a);
                    row.metadata = std::move(meta);
                }
                out.rows.push_back(std::move(row));
            }
        }
        return out;
    }

    if (root.name == "webRowSet") {
        const auto* props = root.child("properties");
        const auto* meta = root.child("metadata");
        const auto* data = root.child("data");
        if (props == nullptr || meta == nullptr || data == nullptr) {
            throw error(error_code::xml_error, "incomplete webRowSet document");
        }
        for (const auto& p : props->children) {
            if (p.name == "complete") out.complete = p.text == "true";
            else if (p.name == "site") out.site_statuses.push_back(status_from_node(p));
        }
        std::vector<std::string> columns;
        for (const auto& def : meta->children) {
            if (def.name != "column-definition") continue;
            const auto* name = def.child("column-name");
            if (name == nullptr) throw error(error_code::xml_error, "column-definition without column-name");
            columns.push_back(name->text);
        }
        for (const auto& current : data->children) {
            if (current.children.size() != columns.size() || columns.empty()) {
                throw error(error_code::xml_error, "row width does not match column count");
            }
            result_row row;
            row.lfn = current.children[0].text;
            if (columns.size() > 1) {
                fq::attribute_map m;
                for (std::size_t i = 1; i < columns.size(); ++i) m[columns[i]] = optional_text_of(current.children[i]);
                row.metadata = std::move(m);
            }
            out.rows.push_back(std::move(row));
        }
        return out;
    }

    throw error(error_code::unknown_format, "unrecognised result document <" + root.name + ">");
}

// ---------------------------------------------------------------------------
// Engine

engine::engine(std::string site_id, metadata_store& store, peer_transport& transport, engine_settings settings)
    : site_id_(std::move(site_id)), store_(store), transport_(transport), settings_(settings),
      pushdown_(settings.pushdown) {}

site_result engine::handle_local(const fq::formal_query& q) {
    try {
        auto rows = store_.execute_sql(fq::translate(q));
        site_result out;
        out.site_id = site_id_;
        out.rows.reserve(rows.rows.size());
        std::vector<std::string> lfns;
        lfns.reserve(rows.rows.size());
        for (auto& r : rows.rows) {
            if (r.empty() || !r[0]) throw error(error_code::store_fault, "store returned a row without an LFN");
            result_row row;
            row.lfn = *r[0];
            row.sort_keys.assign(std::make_move_iterator(r.begin() + 1), std::make_move_iterator(r.end()));
            lfns.push_back(row.lfn);
            out.rows.push_back(std::move(row));
        }
        if (!q.no_data && !out.rows.empty()) {
            auto records = store_.fetch_metadata(lfns);
            std::map<std::string_view, const fq::attribute_map*> by_lfn;
            for (const auto& rec : records) by_lfn.emplace(rec.lfn, &rec.attributes);
            for (auto& row : out.rows) {
                auto it = by_lfn.find(row.lfn);
                if (it == by_lfn.end()) throw error(error_code::store_fault, "metadata vanished for " + row.lfn);
                row.metadata = *it->second;
            }
        }
        out.sites.push_back({site_id_, status_kind::ok, {}});
        return out;
    } catch (const std::exception& e) {
        return failed(site_id_, status_kind::error, e.what());
    }
}

site_result engine::handle_remote(const federated_request& request, const peer_info& peer, milliseconds timeout) {
    ++messages_sent_;
    try {
        auto r = transport_.query(peer, request, timeout);
        if (r.sites.empty()) r.sites.push_back({peer.id, r.status, r.message});
        if (r.status != status_kind::ok) r.rows.clear();
        return r;
    } catch (const std::exception& e) {
        return failed(peer.id, status_kind::error, e.what());
    }
}

query_result engine::federated_query(const fq::formal_query& q, const std::optional<federated_request>& incoming) {
    std::vector<std::string> visited = incoming ? incoming->visited : std::vector<std::string>{site_id_};
    if (std::find(visited.begin(), visited.end(), site_id_) == visited.end()) visited.push_back(site_id_);
    const int ttl = incoming ? incoming->ttl : settings_.ttl;

    auto known = peers();
    std::vector<std::string> peer_ids;
    for (const auto& p : known) peer_ids.push_back(p.id);
    auto plan = analyse(q, peer_ids, visited, pushdown_.load());
    if (ttl <= 0) plan.targets.clear();

    auto child_timeout = settings_.peer_timeout;
    if (incoming && incoming->budget.count() > 0) child_timeout = std::min(child_timeout, incoming->budget * 3 / 4);

    federated_request forward;
    forward.query = plan.remote_fq;
    forward.visited = visited;
    forward.visited.insert(forward.visited.end(), plan.targets.begin(), plan.targets.end());
    forward.ttl = ttl - 1;
    forward.request_id = incoming ? incoming->request_id : to_hex(random_id128());
    forward.budget = child_timeout;

    std::vector<std::future<site_result>> remote;
    for (const auto& target : plan.targets) {
        auto it = std::find_if(known.begin(), known.end(), [&](const peer_info& p) { return p.id == target; });
        remote.push_back(std::async(std::launch::async, [this, &forward, peer = *it, child_timeout] {
            return handle_remote(forward, peer, child_timeout);
        }));
    }

    std::vector<site_result> parts;
    parts.reserve(remote.size() + 1);
    parts.push_back(handle_local(plan.local_fq));
    for (auto& f : remote) parts.push_back(f.get());

    // The originator applies the client's offset and limit. A serving node
    // merges under the rewritten query it was sent, which carries no offset.
    return merge_results(incoming ? plan.remote_fq : q, parts);
}

site_result engine::serve(const federated_request& request) {
    auto merged = federated_query(request.query, request);
    site_result out;
    out.site_id = site_id_;
    out.rows = std::move(merged.rows);
    out.sites = std::move(merged.site_statuses);
    return out;
}

void engine::set_peers(std::vector<peer_info> peers) {
    std::lock_guard lock(peers_mutex_);
    peers_ = std::move(peers);
}

std::vector<peer_info> engine::peers() const {
    std::lock_guard lock(peers_mutex_);
    return peers_;
}

}  // namespace gridbox::federation
