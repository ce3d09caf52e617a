#include "gridbox/harness/harness.hpp"

#include "gridbox/error.hpp"
#include "gridbox/federation.hpp"
#include "gridbox/net/dicom_ul.hpp"
#include "gridbox/node/protocol.hpp"
#include "gridbox/random_id.hpp"
#include "gridbox/xml.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gridbox::harness {

namespace {

constexpr std::size_t ports_per_block = 24;  // 8 nodes x 3 listeners
constexpr std::uint64_t block_count = 900;   // blocks span 10000..31599, below the ephemeral range
constexpr int bind_attempts = 8;

std::uint16_t block_base(std::uint64_t seed, int attempt) {
    return static_cast<std::uint16_t>(10000 + ((seed + static_cast<std::uint64_t>(attempt)) % block_count) *
                                                  ports_per_block);
}

pseudonym_key key_from_seed(std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x6b65792d73656564ULL);
    std::array<std::uint8_t, pseudonym_key::size> bytes{};
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng() & 0xFF);
    return pseudonym_key(bytes);
}

std::string site_name(std::size_t i) { return "site" + std::to_string(i); }

std::string preview(const std::vector<std::string>& lfns) {
    std::string out = std::to_string(lfns.size()) + " rows";
    if (!lfns.empty()) out += ", first " + lfns.front();
    return out;
}

}  // namespace

std::string_view to_string(topology t) noexcept {
    switch (t) {
        case topology::line: return "line";
        case topology::star: return "star";
        case topology::ring: return "ring";
        case topology::complete: return "complete";
    }
    return "line";
}

std::optional<topology> parse_topology(std::string_view name) noexcept {
    for (auto t : {topology::line, topology::star, topology::ring, topology::complete}) {
        if (to_string(t) == name) return t;
    }
    return std::nullopt;
}

std::vector<std::vector<std::size_t>> neighbours(topology t, std::size_t n) {
    std::vector<std::set<std::size_t>> sets(n);
    auto link = [&](std::size_t a, std::size_t b) {
        if (a == b) return;
        sets[a].insert(b);
        sets[b].insert(a);
    };
    for (std::size_t i = 0; i + 1 < n; ++i) {
        switch (t) {
            case topology::line:
            case topology::ring: link(i, i + 1); break;
            case topology::star: link(0, i + 1); break;
            case topology::complete:
                for (std::size_t j = i + 1; j < n; ++j) link(i, j);
                break;
        }
    }
    if (t == topology::ring && n >= 3) link(n - 1, 0);
    std::vector<std::vector<std::size_t>> out;
    for (const auto& s : sets) out.emplace_back(s.begin(), s.end());
    return out;
}

// ---------------------------------------------------------------------------

test_federation::test_federation(std::size_t n, topology t, std::uint64_t seed, federation_options options)
    : options_(std::move(options)), key_(key_from_seed(seed)) {
    if (n < 1 || n > 8) throw std::invalid_argument("a test federation has 1 to 8 nodes");
    root_ = std::filesystem::temp_directory_path() / ("gridbox-federation-" + to_hex(random_id128()));
    std::filesystem::create_directories(root_);
    links_ = neighbours(t, n);
    expected_.assign(n, {});
    nodes_.resize(n);

    std::string last_error;
    for (int attempt = 0; attempt < bind_attempts; ++attempt) {
        const std::uint16_t base = options_.base_port != 0
                                       ? static_cast<std::uint16_t>(options_.base_port + attempt * ports_per_block)
                                       : block_base(seed, attempt);
        configs_.clear();
        for (std::size_t i = 0; i < n; ++i) {
            node::node_config c;
            c.site_id = site_name(i);
            c.data_dir = root_ / c.site_id;
            c.dicom_port = static_cast<std::uint16_t>(base + 3 * i);
            c.api_port = static_cast<std::uint16_t>(base + 3 * i + 1);
            c.peer_port = static_cast<std::uint16_t>(base + 3 * i + 2);
            c.shared_token = options_.token;
            c.key = key_;
            c.ttl = options_.ttl;
            c.peer_timeout = options_.peer_timeout;
            configs_.push_back(std::move(c));
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (auto j : links_[i]) configs_[i].peers.push_back({configs_[j].site_id, "127.0.0.1", configs_[j].peer_port});
        }
        try {
            for (std::size_t i = 0; i < n; ++i) nodes_[i] = std::make_unique<node::node>(configs_[i]);
            return;
        } catch (const error& e) {
            for (auto& p : nodes_) p.reset();
            if (e.code() != error_code::bind_error) {
                std::error_code ignored;
                std::filesystem::remove_all(root_, ignored);
                throw;
            }
            last_error = e.what();
        }
    }
    std::error_code ignored;
    std::filesystem::remove_all(root_, ignored);
    throw error(error_code::bind_error, "no free port block for the federation; last failure: " + last_error);
}

test_federation::~test_federation() {
    for (auto& p : nodes_) p.reset();
    std::error_code ignored;
    std::filesystem::remove_all(root_, ignored);
}

node::node& test_federation::at(std::size_t i) {
    if (!nodes_.at(i)) throw std::logic_error("node " + std::to_string(i) + " is stopped");
    return *nodes_[i];
}

void test_federation::stop(std::size_t i) { nodes_.at(i).reset(); }

void test_federation::restart(std::size_t i) {
    if (!nodes_.at(i)) nodes_[i] = std::make_unique<node::node>(configs_.at(i));
}

std::vector<std::size_t> test_federation::ingest(const corpus& c, std::uint64_t partition_seed, bool over_network) {
    std::mt19937_64 rng(partition_seed);
    std::vector<std::size_t> placement;
    std::map<std::size_t, std::vector<std::size_t>> per_node;
    for (std::size_t k = 0; k < c.files.size(); ++k) {
        auto idx = static_cast<std::size_t>(rng() % size());
        placement.push_back(idx);
        per_node[idx].push_back(k);
    }

    for (const auto& [idx, files] : per_node) {
        auto& target = at(idx);
        if (over_network) {
            dicom::ul::store_scu scu("127.0.0.1", target.dicom_port(), std::chrono::seconds(30));
            for (auto k : files) {
                auto outcome = scu.store(c.files[k].bytes);
                if (outcome.status != dicom::ul::status_success) {
                    throw error(error_code::io_error, c.files[k].name + " was not stored");
                }
            }
            scu.release();
            node::api_client client("127.0.0.1", target.api_port(), options_.token);
            for (auto k : files) {
                (void)client.add(c.records[k].attributes.at("Image.SOPInstanceUID").value_or(""));
            }
        } else {
            for (auto k : files) {
                const auto sop = c.records[k].attributes.at("Image.SOPInstanceUID").value_or("");
                target.stage(sop, c.files[k].bytes);
                (void)target.add(sop, options_.token);
            }
        }
        for (auto k : files) expected_[idx].push_back(expected_record(c.records[k], key_, configs_[idx].site_id));
    }
    return placement;
}

std::vector<fq::metadata_record> test_federation::all_records() const {
    std::vector<fq::metadata_record> out;
    for (const auto& e : expected_) out.insert(out.end(), e.begin(), e.end());
    return out;
}

std::vector<std::size_t> test_federation::reachable_from(std::size_t i) const {
    std::vector<std::size_t> out;
    if (!running(i)) return out;
    std::vector<bool> seen(size(), false);
    std::deque<std::size_t> todo{i};
    seen[i] = true;
    while (!todo.empty()) {
        auto cur = todo.front();
        todo.pop_front();
        out.push_back(cur);
        for (auto j : links_[cur]) {
            if (!seen[j] && running(j)) {
                seen[j] = true;
                todo.push_back(j);
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<fq::metadata_record> test_federation::records_reachable_from(std::size_t i) const {
    std::vector<fq::metadata_record> out;
    for (auto j : reachable_from(i)) out.insert(out.end(), expected_[j].begin(), expected_[j].end());
    return out;
}

bool test_federation::expect_complete(std::size_t i) const {
    for (auto j : reachable_from(i)) {
        for (auto k : links_[j]) {
            if (!running(k)) return false;
        }
    }
    return true;
}

void test_federation::set_pushdown(bool enabled) {
    for (auto& p : nodes_) {
        if (p) p->engine().set_pushdown(enabled);
    }
}

std::uint64_t test_federation::messages_sent() const {
    std::uint64_t total = 0;
    for (const auto& p : nodes_) {
        if (p) total += p->engine().messages_sent();
    }
    return total;
}

void test_federation::reset_message_counts() {
    for (auto& p : nodes_) {
        if (p) p->engine().reset_message_count();
    }
}

// ---------------------------------------------------------------------------

workload_report run_workload(test_federation& f, std::uint64_t query_seed, std::size_t cases,
                             const workload_options& options) {
    workload_report report;
    const auto universe = f.all_records();
    std::mt19937_64 rng(query_seed);
    f.set_pushdown(options.pushdown);

    std::map<std::size_t, std::unique_ptr<node::api_client>> clients;
    std::map<std::size_t, std::vector<fq::metadata_record>> oracle_input;
    std::map<std::size_t, bool> complete_expected;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (!f.running(i)) continue;
        clients[i] = std::make_unique<node::api_client>("127.0.0.1", f.at(i).api_port(), f.token());
        oracle_input[i] = f.records_reachable_from(i);
        complete_expected[i] = f.expect_complete(i);
    }

    for (std::size_t c = 0; c < cases; ++c) {
        const auto q = random_query(rng, universe, options.shape);
        const auto fq_xml = fq::serialize_fq(q);
        ++report.cases;
        for (auto& [i, client] : clients) {
            ++report.requests;
            auto diverge = [&](std::string reason) { report.divergences.push_back({c, i, std::move(reason), fq_xml}); };

            const auto& records = oracle_input[i];
            const auto expected = fq::evaluate(q, records);
            f.reset_message_counts();
            const auto start = std::chrono::steady_clock::now();
            std::string document;
            try {
                document = client->query(fq_xml);
            } catch (const std::exception& e) {
                diverge(std::string("query failed: ") + e.what());
                continue;
            }
            const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
            report.max_latency = std::max(report.max_latency, latency);
            const auto messages = f.messages_sent();
            report.max_messages = std::max(report.max_messages, messages);
            if (options.max_messages != 0 && messages > options.max_messages) {
                diverge("sent " + std::to_string(messages) + " federated messages, bound " +
                        std::to_string(options.max_messages));
            }

            const auto result = federation::unwrap_result(document);
            if (!result.complete) ++report.incomplete;
            if (result.complete != complete_expected[i]) {
                diverge(std::string("complete=") + (result.complete ? "true" : "false") + ", expected " +
                        (complete_expected[i] ? "true" : "false"));
            }

            std::vector<std::string> got;
            for (const auto& r : result.rows) got.push_back(r.lfn);
            if (got != expected) {
                diverge("rows differ: expected " + preview(expected) + "; got " + preview(got));
                continue;
            }
            std::map<std::string_view, const fq::metadata_record*> by_lfn;
            for (const auto& r : records) by_lfn[r.lfn] = &r;
            for (const auto& row : result.rows) {
                if (q.no_data) {
                    if (row.metadata) diverge("metadata returned for " + row.lfn + " despite no_data");
                } else if (!row.metadata || *row.metadata != by_lfn.at(row.lfn)->attributes) {
                    diverge("metadata differs for " + row.lfn);
                }
            }
        }
    }
    return report;
}

std::string report_summary(const workload_report& r) {
    std::ostringstream out;
    out << "cases: " << r.cases << "\n"
        << "requests: " << r.requests << "\n"
        << "incomplete results: " << r.incomplete << "\n"
        << "max federated messages per request: " << r.max_messages << "\n"
        << "max latency ms: " << r.max_latency.count() << "\n"
        << "divergences: " << r.divergences.size() << "\n";
    for (const auto& d : r.divergences) {
        out << "  case " << d.case_index << " at node " << d.originator << ": " << d.reason << "\n";
    }
    return out.str();
}

std::string report_to_xml(const workload_report& r) {
    xml::node root("WorkloadReport");
    root.set("cases", std::to_string(r.cases))
        .set("requests", std::to_string(r.requests))
        .set("incomplete", std::to_string(r.incomplete))
        .set("max_messages", std::to_string(r.max_messages))
        .set("max_latency_ms", std::to_string(r.max_latency.count()))
        .set("divergences", std::to_string(r.divergences.size()));
    for (const auto& d : r.divergences) {
        xml::node n("Divergence");
        n.set("case", std::to_string(d.case_index))
            .set("originator", std::to_string(d.originator))
            .set("reason", d.reason);
        xml::node q("Query");
        q.text = d.fq_xml;
        n.add(std::move(q));
        root.add(std::move(n));
    }
    return xml::render(root) + "\n";
}

}  // namespace gridbox::harness
