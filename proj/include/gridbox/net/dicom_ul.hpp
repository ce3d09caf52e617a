/**
 * @file dicom_ul.hpp
 * @brief DICOM upper-layer subset: association PDUs, P-DATA framing and the
 *        C-STORE exchange for a storage SCU and SCP
 *
 * PDU layout: type (1) | reserved (1) | length (4, big-endian) | body.
 * Variable items inside A-ASSOCIATE PDUs use type (1) | reserved (1) |
 * length (2, big-endian). UIDs on this layer are not padded.
 *
 * DIMSE command sets are always implicit VR little endian. Commands and data
 * sets travel in separate P-DATA-TF PDUs, each fragment at most the peer's
 * maximum PDU length less six bytes, which is the framing common toolkits
 * produce.
 */

#ifndef GRIDBOX_NET_DICOM_UL_HPP
#define GRIDBOX_NET_DICOM_UL_HPP

#include "gridbox/error.hpp"
#include "gridbox/net/socket.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace gridbox::dicom::ul {

inline constexpr std::string_view application_context_name = "1.2.840.10008.3.1.1.1";
inline constexpr std::string_view mammography_storage = "1.2.840.10008.5.1.4.1.1.1.2";
inline constexpr std::string_view secondary_capture_storage = "1.2.840.10008.5.1.4.1.1.7";
inline constexpr std::uint32_t default_max_pdu = 16384;
inline constexpr std::string_view default_scp_ae = "GRIDBOX";
inline constexpr std::string_view default_scu_ae = "GRIDBOX-SCU";

/// Abstract syntaxes the SCP accepts.
[[nodiscard]] bool is_supported_abstract_syntax(std::string_view uid) noexcept;

struct presentation_context {
    std::uint8_t id = 1;
    std::string abstract_syntax;                 ///< empty in an A-ASSOCIATE-AC
    std::vector<std::string> transfer_syntaxes;  ///< exactly one in an AC
    std::uint8_t result = 0;                     ///< AC only: 0 acceptance, 1-4 rejection reasons

    bool operator==(const presentation_context&) const = default;
};

struct association_fields {
    std::uint16_t protocol_version = 1;
    std::string called_ae;
    std::string calling_ae;
    std::string application_context = std::string(application_context_name);
    std::vector<presentation_context> contexts;
    std::uint32_t max_pdu = default_max_pdu;  ///< 0 means unlimited
    std::string implementation_uid;
    std::string implementation_version;

    bool operator==(const association_fields&) const = default;
};

struct associate_rq : association_fields {};
struct associate_ac : association_fields {};

struct associate_rj {
    std::uint8_t result = 1;  ///< 1 permanent, 2 transient
    std::uint8_t source = 1;  ///< 1 service-user, 2 provider (ACSE), 3 provider (presentation)
    std::uint8_t reason = 1;

    bool operator==(const associate_rj&) const = default;
};

struct pdv {
    std::uint8_t context_id = 1;
    std::uint8_t control = 0;  ///< bit 0 command, bit 1 last fragment
    std::vector<std::uint8_t> data;

    [[nodiscard]] bool is_command() const noexcept { return (control & 0x01) != 0; }
    [[nodiscard]] bool is_last() const noexcept { return (control & 0x02) != 0; }

    bool operator==(const pdv&) const = default;
};

struct p_data_tf {
    std::vector<pdv> items;
    bool operator==(const p_data_tf&) const = default;
};

struct release_rq {
    bool operator==(const release_rq&) const = default;
};
struct release_rp {
    bool operator==(const release_rp&) const = default;
};

struct a_abort {
    std::uint8_t source = 2;  ///< 0 service-user, 2 service-provider
    std::uint8_t reason = 0;

    bool operator==(const a_abort&) const = default;
};

using pdu = std::variant<associate_rq, associate_ac, associate_rj, p_data_tf, release_rq, release_rp, a_abort>;

/// Abort reasons used by a provider-side abort.
enum class abort_reason : std::uint8_t {
    not_specified = 0,
    unrecognized_pdu = 1,
    unexpected_pdu = 2,
    unrecognized_parameter = 4,
    unexpected_parameter = 5,
    invalid_parameter = 6,
};

/// A PDU that cannot be decoded. Carries the abort reason to report.
class pdu_error : public error {
public:
    pdu_error(abort_reason reason, const std::string& message) : error(error_code::protocol_error, message), reason_(reason) {}
    [[nodiscard]] abort_reason reason() const noexcept { return reason_; }

private:
    abort_reason reason_;
};

[[nodiscard]] std::vector<std::uint8_t> encode_pdu(const pdu& p);

/// Decodes one complete PDU. Throws pdu_error.
[[nodiscard]] pdu decode_pdu(std::span<const std::uint8_t> bytes);

/// Reads one PDU, refusing bodies larger than `max_length` (0 = no limit).
[[nodiscard]] pdu read_pdu(net::tcp_socket& s, net::deadline until, std::uint32_t max_length);

// ---------------------------------------------------------------------------
// DIMSE C-STORE

inline constexpr std::uint16_t status_success = 0x0000;
inline constexpr std::uint16_t status_out_of_resources = 0xA700;
inline constexpr std::uint16_t status_cannot_understand = 0xC000;

struct c_store_rq {
    std::uint16_t message_id = 1;
    std::string sop_class_uid;
    std::string sop_instance_uid;
    std::uint16_t priority = 0;  ///< medium

    bool operator==(const c_store_rq&) const = default;
};

struct c_store_rsp {
    std::uint16_t message_id_being_responded_to = 1;
    std::string sop_class_uid;
    std::string sop_instance_uid;
    std::uint16_t status = status_success;

    bool operator==(const c_store_rsp&) const = default;
};

/// Implicit VR LE command sets with their group length element.
[[nodiscard]] std::vector<std::uint8_t> encode_command(const c_store_rq& rq);
[[nodiscard]] std::vector<std::uint8_t> encode_command(const c_store_rsp& rsp);

/// Splits a message into P-DATA-TF PDUs: command fragments first, then data
/// fragments, each fragment in its own PDU.
[[nodiscard]] std::vector<p_data_tf> fragment_message(std::uint8_t context_id, std::span<const std::uint8_t> command,
                                                      std::span<const std::uint8_t> data, std::uint32_t peer_max_pdu);

// ---------------------------------------------------------------------------
// Storage SCU

struct store_outcome {
    std::string sop_instance_uid;
    std::uint16_t status = status_success;
};

class store_scu {
public:
    /// Connects and negotiates contexts for the two storage SOP classes with
    /// Explicit VR Little Endian. Throws association_rejected on an RJ,
    /// protocol_error on an abort, and the socket errors otherwise.
    store_scu(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout,
              std::string calling_ae = std::string(default_scu_ae), std::string called_ae = std::string(default_scp_ae));
    ~store_scu();

    store_scu(const store_scu&) = delete;
    store_scu& operator=(const store_scu&) = delete;

    /// Sends one Part-10 file. Files not in Explicit VR LE are re-encoded.
    store_outcome store(std::span<const std::uint8_t> file_bytes);

    void release();
    void abort() noexcept;

    [[nodiscard]] const associate_ac& accepted() const noexcept { return ac_; }

private:
    net::tcp_socket socket_;
    std::chrono::milliseconds timeout_;
    associate_ac ac_;
    std::vector<presentation_context> proposed_;
    std::uint16_t next_message_id_ = 1;
    bool open_ = false;
};

// ---------------------------------------------------------------------------
// Storage SCP

struct received_instance {
    std::string sop_class_uid;
    std::string sop_instance_uid;
    std::string transfer_syntax_uid;
    std::vector<std::uint8_t> dataset_bytes;  ///< as received, no meta group
};

/// Returns the C-STORE-RSP status for a received instance.
using store_handler = std::function<std::uint16_t(const received_instance&)>;

struct scp_settings {
    std::string ae_title = std::string(default_scp_ae);
    std::uint32_t max_pdu = default_max_pdu;
    std::chrono::milliseconds idle_timeout{30000};
};

/// Runs one association on an accepted socket until release, abort, error or
/// idle timeout. Never throws.
void serve_association(net::tcp_socket& socket, const scp_settings& settings, const store_handler& handler) noexcept;

}  // namespace gridbox::dicom::ul

#endif  // GRIDBOX_NET_DICOM_UL_HPP
