// Command-line front end: runs a node and talks to one.
//
// Exit codes
//   0  success
//   1  unexpected internal failure
//   2  usage, configuration or port-binding error
//   3  DICOM association rejected or the DICOM port unreachable
//   4  at least one file could not be stored
//   5  authentication failed
//   6  the node rejected the request (bad query, not staged, duplicate, not found...)
//   7  connection or protocol failure on the API port
//
// Payload goes to stdout; every diagnostic goes to stderr.

#include "gridbox/dicom/codec.hpp"
#include "gridbox/error.hpp"
#include "gridbox/file_catalogue.hpp"
#include "gridbox/formal_query.hpp"
#include "gridbox/harness/corpus.hpp"
#include "gridbox/net/dicom_ul.hpp"
#include "gridbox/node/config.hpp"
#include "gridbox/node/node.hpp"
#include "gridbox/node/protocol.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace gridbox;

enum exit_code : int {
    exit_ok = 0,
    exit_internal = 1,
    exit_config = 2,
    exit_association = 3,
    exit_store_failed = 4,
    exit_auth = 5,
    exit_rejected = 6,
    exit_connection = 7,
};

int exit_for(error_code code) {
    switch (code) {
        case error_code::auth_error: return exit_auth;
        case error_code::config_error:
        case error_code::bind_error: return exit_config;
        case error_code::association_rejected: return exit_association;
        case error_code::io_error:
        case error_code::timeout:
        case error_code::protocol_error: return exit_connection;
        default: return exit_rejected;
    }
}

int report(const error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_for(e.code());
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw error(error_code::io_error, "cannot read " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_serve(const std::optional<std::string>& config_path) {
    std::optional<std::filesystem::path> given;
    if (config_path) given = *config_path;
    auto cfg = node::load_config(node::resolve_config_path(given));

    // Block the stop signals before any thread starts so that only sigwait
    // below sees them.
    sigset_t stop_signals;
    sigemptyset(&stop_signals);
    sigaddset(&stop_signals, SIGINT);
    sigaddset(&stop_signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

    node::node n(cfg);
    std::cerr << "site " << n.site_id() << " serving: dicom " << n.dicom_port() << ", api " << n.api_port()
              << ", peer " << n.peer_port() << std::endl;
    int sig = 0;
    sigwait(&stop_signals, &sig);
    std::cerr << "signal " << sig << ": shutting down" << std::endl;
    n.shutdown();
    return exit_ok;
}

int run_store(const std::string& host, std::uint16_t port, int timeout_ms, const std::string& calling,
              const std::string& called, const std::vector<std::string>& files) {
    std::vector<std::pair<std::string, std::vector<std::uint8_t>>> loaded;
    int status = exit_ok;
    for (const auto& f : files) {
        try {
            auto bytes = read_file(f);
            (void)dicom::parse_file(bytes);
            loaded.emplace_back(f, std::move(bytes));
        } catch (const std::exception& e) {
            std::cerr << f << ": not stored: " << e.what() << "\n";
            status = exit_store_failed;
        }
    }

    std::optional<dicom::ul::store_scu> scu;
    try {
        scu.emplace(host, port, std::chrono::milliseconds(timeout_ms), calling, called);
    } catch (const error& e) {
        std::cerr << "error: association with " << host << ":" << port << " failed: " << to_string(e.code()) << ": "
                  << e.what() << "\n";
        return exit_association;
    }
    for (const auto& [name, bytes] : loaded) {
        try {
            auto outcome = scu->store(bytes);
            if (outcome.status == dicom::ul::status_success) {
                std::cout << outcome.sop_instance_uid << "\n";
            } else {
                char hex[8];
                std::snprintf(hex, sizeof hex, "%04X", outcome.status);
                std::cerr << name << ": not stored: C-STORE status 0x" << hex << "\n";
                status = exit_store_failed;
            }
        } catch (const error& e) {
            std::cerr << name << ": not stored: " << to_string(e.code()) << ": " << e.what() << "\n";
            return exit_store_failed;
        }
    }
    try {
        scu->release();
    } catch (const error& e) {
        std::cerr << "warning: release failed: " << e.what() << "\n";
    }
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gridbox: federated mammogram store node and client"};
    app.require_subcommand(1);

    std::optional<std::string> config_path;
    auto* serve = app.add_subcommand("serve", "Run a node until SIGINT or SIGTERM");
    serve->add_option("--config", config_path, "Config file (MG_CONFIG overrides)");

    std::string host = "127.0.0.1";
    std::uint16_t dicom_port = 11112;
    int timeout_ms = 30000;
    std::string calling_ae(dicom::ul::default_scu_ae), called_ae(dicom::ul::default_scp_ae);
    std::vector<std::string> files;
    auto* store = app.add_subcommand("store", "Send DICOM files to a node's DICOM port (C-STORE)");
    store->add_option("--host", host, "Node host")->capture_default_str();
    store->add_option("--port", dicom_port, "DICOM port")->capture_default_str();
    store->add_option("--timeout-ms", timeout_ms, "Network timeout")->capture_default_str();
    store->add_option("--calling-ae", calling_ae)->capture_default_str();
    store->add_option("--called-ae", called_ae)->capture_default_str();
    store->add_option("files", files, "DICOM files")->required();

    std::uint16_t api_port = 7001;
    std::string token;
    auto add_api_options = [&](CLI::App* sub) {
        sub->add_option("--host", host, "Node host")->capture_default_str();
        sub->add_option("--port", api_port, "API port")->capture_default_str();
        sub->add_option("--token", token, "Shared token")->required();
        sub->add_option("--timeout-ms", timeout_ms, "Network timeout")->capture_default_str();
    };

    std::string sop_uid;
    auto* add = app.add_subcommand("add", "Pseudonymize, file and index a staged image");
    add_api_options(add);
    add->add_option("--sop-uid", sop_uid, "SOP Instance UID of the staged file")->required();

    std::string query_file, format(federation::format_fq_xml);
    bool no_data = false;
    auto* query = app.add_subcommand("query", "Run a Formal Query across the federation");
    add_api_options(query);
    query->add_option("--file", query_file, "FQ XML document")->required();
    query->add_option("--format", format, "fq-xml or rowset-xml")->capture_default_str();
    query->add_flag("--no-data", no_data, "Return LFNs only");

    std::string lfn, out_path;
    auto* get = app.add_subcommand("get", "Fetch a file by LFN from anywhere in the federation");
    add_api_options(get);
    get->add_option("lfn", lfn, "Logical file name")->required();
    get->add_option("--out", out_path, "Output file")->required();

    std::size_t count = 0;
    std::uint64_t seed = 0;
    std::string corpus_dir;
    auto* gen = app.add_subcommand("gen-corpus", "Write a synthetic corpus and its manifest");
    gen->add_option("--n", count, "Number of images")->required()->check(CLI::PositiveNumber);
    gen->add_option("--seed", seed, "Random seed")->required();
    gen->add_option("--out", corpus_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_config;
    }

    try {
        if (*serve) return run_serve(config_path);
        if (*store) return run_store(host, dicom_port, timeout_ms, calling_ae, called_ae, files);
        if (*gen) {
            harness::write_corpus(harness::generate_corpus(count, seed), corpus_dir);
            std::cerr << "wrote " << count << " files and " << harness::manifest_file_name << " to " << corpus_dir
                      << "\n";
            return exit_ok;
        }

        std::string fq_xml;
        if (*query) {
            std::ifstream in(query_file, std::ios::binary);
            if (!in) {
                std::cerr << "error: cannot read " << query_file << "\n";
                return exit_config;
            }
            fq_xml.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
        }

        node::api_client client(host, api_port, token, std::chrono::milliseconds(timeout_ms));
        if (*add) {
            auto r = client.add(sop_uid);
            std::cout << r.lfn << "\t" << r.pseudonym << "\n";
            return exit_ok;
        }
        if (*query) {
            if (no_data) {
                auto q = fq::parse_fq(fq_xml);
                q.no_data = true;
                fq_xml = fq::serialize_fq(q);
            }
            std::cout << client.query(fq_xml, format) << "\n";
            return exit_ok;
        }
        if (*get) {
            auto bytes = client.get(lfn);
            write_file_durably(out_path, bytes);
            return exit_ok;
        }
    } catch (const error& e) {
        return report(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_internal;
    }
    return exit_internal;
}
