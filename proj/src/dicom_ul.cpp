#include "gridbox/net/dicom_ul.hpp"

#include "gridbox/dicom/codec.hpp"
#include "gridbox/dicom/dataset.hpp"
#include "gridbox/dicom/tag.hpp"

#include <algorithm>
#include <map>

namespace gridbox::dicom::ul {

namespace {

constexpr std::size_t fixed_associate_fields = 68;
constexpr std::uint32_t max_association_pdu = 1024 * 1024;

// --- byte helpers ----------------------------------------------------------

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void put_bytes(std::vector<std::uint8_t>& out, std::string_view s) { out.insert(out.end(), s.begin(), s.end()); }

void put_item(std::vector<std::uint8_t>& out, std::uint8_t type, std::span<const std::uint8_t> body) {
    if (body.size() > 0xFFFF) throw error(error_code::protocol_error, "association item too long");
    out.push_back(type);
    out.push_back(0);
    put16(out, static_cast<std::uint16_t>(body.size()));
    out.insert(out.end(), body.begin(), body.end());
}

void put_text_item(std::vector<std::uint8_t>& out, std::uint8_t type, std::string_view text) {
    put_item(out, type, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void put_ae(std::vector<std::uint8_t>& out, std::string_view ae) {
    if (ae.empty() || ae.size() > 16) throw error(error_code::protocol_error, "AE title must be 1 to 16 characters");
    put_bytes(out, ae);
    out.insert(out.end(), 16 - ae.size(), ' ');
}

std::vector<std::uint8_t> wrap(std::uint8_t type, const std::vector<std::uint8_t>& body) {
    std::vector<std::uint8_t> out;
    out.reserve(body.size() + 6);
    out.push_back(type);
    out.push_back(0);
    put32(out, static_cast<std::uint32_t>(body.size()));
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

[[noreturn]] void invalid(const std::string& what) { throw pdu_error(abort_reason::invalid_parameter, what); }

class reader {
public:
    explicit reader(std::span<const std::uint8_t> b) : b_(b) {}

    [[nodiscard]] std::size_t left() const { return b_.size() - pos_; }

    std::uint8_t u8() {
        need(1);
        return b_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>((b_[pos_] << 8) | b_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | b_[pos_ + i];
        pos_ += 4;
        return v;
    }
    std::span<const std::uint8_t> bytes(std::size_t n) {
        need(n);
        auto s = b_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

private:
    void need(std::size_t n) const {
        if (left() < n) invalid("PDU field runs past the end of its container");
    }

    std::span<const std::uint8_t> b_;
    std::size_t pos_ = 0;
};

std::string text_of(std::span<const std::uint8_t> b) {
    std::string s(b.begin(), b.end());
    while (!s.empty() && (s.back() == '\0' || s.back() == ' ')) s.pop_back();
    auto first = s.find_first_not_of(' ');
    return first == std::string::npos ? std::string{} : s.substr(first);
}

// --- A-ASSOCIATE ------------------------------------------------------------

std::vector<std::uint8_t> encode_associate(const association_fields& a, bool accept) {
    std::vector<std::uint8_t> body;
    put16(body, a.protocol_version);
    put16(body, 0);
    put_ae(body, a.called_ae);
    put_ae(body, a.calling_ae);
    body.insert(body.end(), 32, 0);
    put_text_item(body, 0x10, a.application_context);

    for (const auto& pc : a.contexts) {
        std::vector<std::uint8_t> item{pc.id, 0, static_cast<std::uint8_t>(accept ? pc.result : 0), 0};
        if (!accept) put_text_item(item, 0x30, pc.abstract_syntax);
        if (accept && pc.transfer_syntaxes.size() != 1) {
            throw error(error_code::protocol_error, "accepted context must name one transfer syntax");
        }
        for (const auto& ts : pc.transfer_syntaxes) put_text_item(item, 0x40, ts);
        put_item(body, accept ? 0x21 : 0x20, item);
    }

    std::vector<std::uint8_t> user;
    std::vector<std::uint8_t> max_len;
    put32(max_len, a.max_pdu);
    put_item(user, 0x51, max_len);
    put_text_item(user, 0x52, a.implementation_uid);
    if (!a.implementation_version.empty()) put_text_item(user, 0x55, a.implementation_version);
    put_item(body, 0x50, user);
    return wrap(accept ? 0x02 : 0x01, body);
}

presentation_context decode_context(std::span<const std::uint8_t> body, bool accept) {
    reader r(body);
    presentation_context pc;
    pc.id = r.u8();
    r.u8();
    pc.result = r.u8();
    r.u8();
    if (!accept) pc.result = 0;
    while (r.left() > 0) {
        auto type = r.u8();
        r.u8();
        auto len = r.u16();
        auto value = text_of(r.bytes(len));
        if (type == 0x30 && !accept) {
            if (!pc.abstract_syntax.empty()) invalid("presentation context with two abstract syntaxes");
            pc.abstract_syntax = value;
        } else if (type == 0x40) {
            pc.transfer_syntaxes.push_back(value);
        } else {
            invalid("unexpected sub-item in presentation context");
        }
    }
    if (!accept && pc.abstract_syntax.empty()) invalid("presentation context without abstract syntax");
    if (pc.transfer_syntaxes.empty() && (!accept || pc.result == 0)) invalid("presentation context without transfer syntax");
    if (pc.id % 2 == 0) invalid("presentation context id must be odd");
    return pc;
}

association_fields decode_associate(std::span<const std::uint8_t> body, bool accept) {
    if (body.size() < fixed_associate_fields) invalid("A-ASSOCIATE PDU too short");
    reader r(body);
    association_fields a;
    a.protocol_version = r.u16();
    r.u16();
    a.called_ae = text_of(r.bytes(16));
    a.calling_ae = text_of(r.bytes(16));
    r.bytes(32);
    a.application_context.clear();
    bool saw_user_info = false;
    while (r.left() > 0) {
        auto type = r.u8();
        r.u8();
        auto len = r.u16();
        auto item = r.bytes(len);
        switch (type) {
            case 0x10: a.application_context = text_of(item); break;
            case 0x20:
                if (accept) invalid("request context item in an accept");
                a.contexts.push_back(decode_context(item, false));
                break;
            case 0x21:
                if (!accept) invalid("accept context item in a request");
                a.contexts.push_back(decode_context(item, true));
                break;
            case 0x50: {
                saw_user_info = true;
                reader u(item);
                while (u.left() > 0) {
                    auto sub = u.u8();
                    u.u8();
                    auto sub_len = u.u16();
                    auto value = u.bytes(sub_len);
                    if (sub == 0x51) {
                        if (sub_len != 4) invalid("maximum length sub-item must hold 4 bytes");
                        a.max_pdu = reader(value).u32();
                    } else if (sub == 0x52) {
                        a.implementation_uid = text_of(value);
                    } else if (sub == 0x55) {
                        a.implementation_version = text_of(value);
                    }
                    // Other user information sub-items (role selection,
                    // asynchronous operations, extended negotiation) are not
                    // negotiated by this implementation and are ignored.
                }
                break;
            }
            default: invalid("unknown A-ASSOCIATE item type " + std::to_string(type));
        }
    }
    if (a.application_context.empty()) invalid("A-ASSOCIATE without application context");
    if (!saw_user_info) invalid("A-ASSOCIATE without user information");
    return a;
}

// --- DIMSE helpers ----------------------------------------------------------

std::vector<std::uint8_t> with_group_length(dataset& command) {
    auto body = encode_dataset(command, transfer_syntax::implicit_vr_little_endian);
    command.set_integers(tags::command_group_length, vr::UL, {static_cast<std::int64_t>(body.size())});
    return encode_dataset(command, transfer_syntax::implicit_vr_little_endian);
}

std::uint16_t command_u16(const dataset& cmd, tag t) {
    auto v = cmd.integer(t);
    if (!v) throw error(error_code::protocol_error, "command set lacks a required field");
    return static_cast<std::uint16_t>(*v);
}

std::string command_uid(const dataset& cmd, tag t) {
    auto v = cmd.text(t);
    if (!v) throw error(error_code::protocol_error, "command set lacks a required UID");
    return *v;
}

constexpr std::uint16_t command_c_store_rq = 0x0001;
constexpr std::uint16_t command_c_store_rsp = 0x8001;
constexpr std::uint16_t data_set_present = 0x0001;
constexpr std::uint16_t no_data_set = 0x0101;

struct dimse_message {
    std::uint8_t context_id = 0;
    std::vector<std::uint8_t> command;
    std::vector<std::uint8_t> data;
};

// Reads P-DATA-TF PDUs until a whole command (and its data set, when the
// command announces one) has arrived. Returns nullopt when the peer sent a
// release request instead; the caller answers it.
std::optional<dimse_message> read_message(net::tcp_socket& s, net::deadline until, std::uint32_t max_length,
                                          bool& release_requested) {
    dimse_message m;
    bool command_done = false;
    bool expect_data = false;
    for (;;) {
        auto p = read_pdu(s, until, max_length);
        if (std::holds_alternative<release_rq>(p)) {
            if (!m.command.empty() || command_done) throw pdu_error(abort_reason::unexpected_pdu, "release during a message");
            release_requested = true;
            return std::nullopt;
        }
        if (std::holds_alternative<a_abort>(p)) throw error(error_code::protocol_error, "peer aborted the association");
        auto* data = std::get_if<p_data_tf>(&p);
        if (data == nullptr) throw pdu_error(abort_reason::unexpected_pdu, "unexpected PDU during data transfer");
        for (auto& item : data->items) {
            if (m.context_id == 0) m.context_id = item.context_id;
            if (item.context_id != m.context_id) invalid("presentation context changed within a message");
            if (item.is_command()) {
                if (command_done) invalid("command fragment after the last one");
                m.command.insert(m.command.end(), item.data.begin(), item.data.end());
                if (item.is_last()) {
                    command_done = true;
                    auto cmd = decode_dataset(m.command, transfer_syntax::implicit_vr_little_endian);
                    expect_data = cmd.integer(tags::command_data_set_type).value_or(no_data_set) != no_data_set;
                    if (!expect_data) return m;
                }
            } else {
                if (!command_done) invalid("data fragment before the command");
                m.data.insert(m.data.end(), item.data.begin(), item.data.end());
                if (item.is_last()) return m;
            }
        }
    }
}

void send_message(net::tcp_socket& s, std::uint8_t context_id, std::span<const std::uint8_t> command,
                  std::span<const std::uint8_t> data, std::uint32_t peer_max_pdu, net::deadline until) {
    for (const auto& p : fragment_message(context_id, command, data, peer_max_pdu)) s.write_all(encode_pdu(p), until);
}

void send_abort(net::tcp_socket& s, abort_reason reason) noexcept {
    try {
        s.write_all(encode_pdu(a_abort{2, static_cast<std::uint8_t>(reason)}), net::after(std::chrono::milliseconds(1000)));
        // Closing with unread input makes the kernel send RST, which can
        // destroy the A-ABORT before the peer reads it. Half-close and drain.
        s.shutdown_write();
        auto until = net::after(std::chrono::milliseconds(500));
        std::uint8_t sink[4096];
        while (s.read_some(sink, until) > 0) {
        }
    } catch (...) {
    }
}

}  // namespace

bool is_supported_abstract_syntax(std::string_view uid) noexcept {
    return uid == mammography_storage || uid == secondary_capture_storage;
}

std::vector<std::uint8_t> encode_pdu(const pdu& p) {
    return std::visit(
        [](const auto& v) -> std::vector<std::uint8_t> {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, associate_rq>) {
                return encode_associate(v, false);
            } else if constexpr (std::is_same_v<T, associate_ac>) {
                return encode_associate(v, true);
            } else if constexpr (std::is_same_v<T, associate_rj>) {
                return wrap(0x03, {0, v.result, v.source, v.reason});
            } else if constexpr (std::is_same_v<T, p_data_tf>) {
                std::vector<std::uint8_t> body;
                for (const auto& item : v.items) {
                    put32(body, static_cast<std::uint32_t>(item.data.size() + 2));
                    body.push_back(item.context_id);
                    body.push_back(item.control);
                    body.insert(body.end(), item.data.begin(), item.data.end());
                }
                return wrap(0x04, body);
            } else if constexpr (std::is_same_v<T, release_rq>) {
                return wrap(0x05, {0, 0, 0, 0});
            } else if constexpr (std::is_same_v<T, release_rp>) {
                return wrap(0x06, {0, 0, 0, 0});
            } else {
                return wrap(0x07, {0, 0, v.source, v.reason});
            }
        },
        p);
}

pdu decode_pdu(std::span<const std::uint8_t> bytes) {
    reader r(bytes);
    if (bytes.size() < 6) invalid("PDU shorter than its header");
    auto type = r.u8();
    r.u8();
    auto length = r.u32();
    if (length != r.left()) invalid("PDU length field does not match its body");
    auto body = r.bytes(length);

    switch (type) {
        case 0x01: return associate_rq{decode_associate(body, false)};
        case 0x02: return associate_ac{decode_associate(body, true)};
        case 0x03: {
            if (body.size() != 4) invalid("A-ASSOCIATE-RJ body must be 4 bytes");
            return associate_rj{body[1], body[2], body[3]};
        }
        case 0x04: {
            p_data_tf out;
            reader items(body);
            while (items.left() > 0) {
                auto len = items.u32();
                if (len < 2) invalid("PDV item shorter than its header");
                pdv item;
                item.context_id = items.u8();
                item.control = items.u8();
                auto data = items.bytes(len - 2);
                item.data.assign(data.begin(), data.end());
                out.items.push_back(std::move(item));
            }
            if (out.items.empty()) invalid("P-DATA-TF without PDV items");
            return out;
        }
        case 0x05:
        case 0x06:
            if (body.size() != 4) invalid("A-RELEASE body must be 4 bytes");
            if (type == 0x05) return release_rq{};
            return release_rp{};
        case 0x07:
            if (body.size() != 4) invalid("A-ABORT body must be 4 bytes");
            return a_abort{body[2], body[3]};
        default: throw pdu_error(abort_reason::unrecognized_pdu, "unrecognized PDU type " + std::to_string(type));
    }
}

pdu read_pdu(net::tcp_socket& s, net::deadline until, std::uint32_t max_length) {
    std::vector<std::uint8_t> buf(6);
    s.read_exact(buf, until);
    if (buf[0] < 0x01 || buf[0] > 0x07) {
        throw pdu_error(abort_reason::unrecognized_pdu, "unrecognized PDU type " + std::to_string(buf[0]));
    }
    std::uint32_t length = (std::uint32_t{buf[2]} << 24) | (std::uint32_t{buf[3]} << 16) | (std::uint32_t{buf[4]} << 8) | buf[5];
    std::uint32_t cap = buf[0] == 0x04 ? max_length : max_association_pdu;
    if (cap != 0 && length > cap) invalid("PDU length " + std::to_string(length) + " exceeds the negotiated maximum");
    buf.resize(6 + length);
    s.read_exact(std::span(buf).subspan(6), until);
    return decode_pdu(buf);
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> encode_command(const c_store_rq& rq) {
    dataset cmd;
    cmd.set_text(tags::affected_sop_class_uid, vr::UI, rq.sop_class_uid);
    cmd.set_integers(tags::command_field, vr::US, {command_c_store_rq});
    cmd.set_integers(tags::message_id, vr::US, {rq.message_id});
    cmd.set_integers(tags::priority, vr::US, {rq.priority});
    cmd.set_integers(tags::command_data_set_type, vr::US, {data_set_present});
    cmd.set_text(tags::affected_sop_instance_uid, vr::UI, rq.sop_instance_uid);
    return with_group_length(cmd);
}

std::vector<std::uint8_t> encode_command(const c_store_rsp& rsp) {
    dataset cmd;
    cmd.set_text(tags::affected_sop_class_uid, vr::UI, rsp.sop_class_uid);
    cmd.set_integers(tags::command_field, vr::US, {command_c_store_rsp});
    cmd.set_integers(tags::message_id_being_responded_to, vr::US, {rsp.message_id_being_responded_to});
    cmd.set_integers(tags::command_data_set_type, vr::US, {no_data_set});
    cmd.set_integers(tags::status, vr::US, {rsp.status});
    cmd.set_text(tags::affected_sop_instance_uid, vr::UI, rsp.sop_instance_uid);
    return with_group_length(cmd);
}

std::vector<p_data_tf> fragment_message(std::uint8_t context_id, std::span<const std::uint8_t> command,
                                        std::span<const std::uint8_t> data, std::uint32_t peer_max_pdu) {
    // A PDV item adds 6 bytes (length, context id, control header) to its
    // fragment, and the PDU length counts the whole item.
    const std::size_t fragment = peer_max_pdu == 0 ? (1u << 20) : std::max<std::size_t>(peer_max_pdu, 7) - 6;
    std::vector<p_data_tf> out;
    auto split = [&](std::span<const std::uint8_t> bytes, std::uint8_t command_bit) {
        std::size_t pos = 0;
        do {
            auto n = std::min(fragment, bytes.size() - pos);
            bool last = pos + n == bytes.size();
            pdv item{context_id, static_cast<std::uint8_t>(command_bit | (last ? 0x02 : 0x00)),
                     {bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(pos + n)}};
            out.push_back(p_data_tf{{std::move(item)}});
            pos += n;
        } while (pos < bytes.size());
    };
    split(command, 0x01);
    if (!data.empty()) split(data, 0x00);
    return out;
}

// ---------------------------------------------------------------------------
// SCU

store_scu::store_scu(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout,
                     std::string calling_ae, std::string called_ae)
    : timeout_(timeout) {
    socket_ = net::connect_tcp(host, port, net::after(timeout));
    associate_rq rq;
    rq.called_ae = std::move(called_ae);
    rq.calling_ae = std::move(calling_ae);
    rq.contexts = {{1, std::string(mammography_storage), {std::string(transfer_syntax::explicit_vr_little_endian)}, 0},
                   {3, std::string(secondary_capture_storage), {std::string(transfer_syntax::explicit_vr_little_endian)}, 0}};
    rq.implementation_uid = std::string(implementation_class_uid);
    rq.implementation_version = std::string(implementation_version_name);
    proposed_ = rq.contexts;
    socket_.write_all(encode_pdu(rq), net::after(timeout));

    auto reply = read_pdu(socket_, net::after(timeout), 0);
    if (auto* rj = std::get_if<associate_rj>(&reply)) {
        throw error(error_code::association_rejected,
                    "association rejected (result " + std::to_string(rj->result) + ", source " + std::to_string(rj->source) +
                        ", reason " + std::to_string(rj->reason) + ")");
    }
    if (std::holds_alternative<a_abort>(reply)) throw error(error_code::protocol_error, "association aborted by peer");
    auto* ac = std::get_if<associate_ac>(&reply);
    if (ac == nullptr) throw error(error_code::protocol_error, "unexpected reply to A-ASSOCIATE-RQ");
    ac_ = *ac;
    open_ = true;
}

store_scu::~store_scu() {
    if (open_) abort();
}

store_outcome store_scu::store(std::span<const std::uint8_t> file_bytes) {
    if (!open_) throw error(error_code::protocol_error, "association is not open");
    auto offset = dataset_offset(file_bytes);
    auto ds = parse_file(file_bytes);
    auto sop_class = ds.text(tags::sop_class_uid);
    auto sop_instance = ds.text(tags::sop_instance_uid);
    if (!sop_class || !sop_instance) throw error(error_code::missing_sop_uid, "file lacks SOP class or instance UID");

    const presentation_context* chosen = nullptr;
    for (const auto& pc : ac_.contexts) {
        if (pc.result != 0) continue;
        auto proposed = std::find_if(proposed_.begin(), proposed_.end(), [&](const auto& p) { return p.id == pc.id; });
        if (proposed != proposed_.end() && proposed->abstract_syntax == *sop_class) chosen = &pc;
    }
    if (chosen == nullptr) throw error(error_code::protocol_error, "no accepted presentation context for SOP class " + *sop_class);

    // Explicit VR LE files go out untouched so the SCP sees the exact bytes.
    std::vector<std::uint8_t> body;
    if (ds.transfer_syntax() == chosen->transfer_syntaxes.front()) {
        body.assign(file_bytes.begin() + static_cast<std::ptrdiff_t>(offset), file_bytes.end());
    } else {
        body = encode_dataset(ds, chosen->transfer_syntaxes.front());
    }

    c_store_rq rq{next_message_id_++, *sop_class, *sop_instance, 0};
    auto until = net::after(timeout_);
    try {
        send_message(socket_, chosen->id, encode_command(rq), body, ac_.max_pdu, until);
        bool released = false;
        auto reply = read_message(socket_, until, 0, released);
        if (!reply) throw error(error_code::protocol_error, "peer requested release during a store");
        auto cmd = decode_dataset(reply->command, transfer_syntax::implicit_vr_little_endian);
        if (command_u16(cmd, tags::command_field) != command_c_store_rsp ||
            command_u16(cmd, tags::message_id_being_responded_to) != rq.message_id) {
            throw error(error_code::protocol_error, "unexpected response to C-STORE-RQ");
        }
        return {*sop_instance, command_u16(cmd, tags::status)};
    } catch (...) {
        abort();
        throw;
    }
}

void store_scu::release() {
    if (!open_) return;
    auto until = net::after(timeout_);
    socket_.write_all(encode_pdu(release_rq{}), until);
    auto reply = read_pdu(socket_, until, 0);
    open_ = false;
    socket_.close();
    if (!std::holds_alternative<release_rp>(reply)) throw error(error_code::protocol_error, "expected A-RELEASE-RP");
}

void store_scu::abort() noexcept {
    if (open_) {
        try {
            socket_.write_all(encode_pdu(a_abort{0, 0}), net::after(std::chrono::milliseconds(500)));
        } catch (...) {
        }
    }
    open_ = false;
    socket_.close();
}

// ---------------------------------------------------------------------------
// SCP

void serve_association(net::tcp_socket& socket, const scp_settings& settings, const store_handler& handler) noexcept {
    try {
        auto idle = [&] { return net::after(settings.idle_timeout); };
        associate_rq rq;
        try {
            auto first = read_pdu(socket, idle(), settings.max_pdu);
            auto* req = std::get_if<associate_rq>(&first);
            if (req == nullptr) {
                send_abort(socket, abort_reason::unexpected_pdu);
                return;
            }
            rq = *req;
        } catch (const pdu_error& e) {
            send_abort(socket, e.reason());
            return;
        }

        auto reject = [&](std::uint8_t source, std::uint8_t reason) {
            socket.write_all(encode_pdu(associate_rj{1, source, reason}), idle());
        };
        if ((rq.protocol_version & 0x0001) == 0) return reject(2, 2);
        if (rq.application_context != application_context_name) return reject(1, 2);

        associate_ac ac;
        ac.called_ae = rq.called_ae;
        ac.calling_ae = rq.calling_ae;
        ac.max_pdu = settings.max_pdu;
        ac.implementation_uid = std::string(implementation_class_uid);
        ac.implementation_version = std::string(implementation_version_name);
        std::map<std::uint8_t, std::string> accepted;  // context id -> transfer syntax
        for (const auto& pc : rq.contexts) {
            presentation_context out{pc.id, {}, {pc.transfer_syntaxes.front()}, 0};
            if (!is_supported_abstract_syntax(pc.abstract_syntax)) {
                out.result = 3;  // abstract syntax not supported
            } else {
                auto pick = [&](std::string_view ts) {
                    return std::find(pc.transfer_syntaxes.begin(), pc.transfer_syntaxes.end(), ts) != pc.transfer_syntaxes.end();
                };
                if (pick(transfer_syntax::explicit_vr_little_endian)) {
                    out.transfer_syntaxes = {std::string(transfer_syntax::explicit_vr_little_endian)};
                } else if (pick(transfer_syntax::implicit_vr_little_endian)) {
                    out.transfer_syntaxes = {std::string(transfer_syntax::implicit_vr_little_endian)};
                } else {
                    out.result = 4;  // transfer syntaxes not supported
                }
            }
            if (out.result == 0) accepted[pc.id] = out.transfer_syntaxes.front();
            ac.contexts.push_back(std::move(out));
        }
        // With nothing usable on offer the whole association is refused
        // rather than accepted with every context rejected.
        if (accepted.empty()) return reject(1, 1);
        socket.write_all(encode_pdu(ac), idle());

        for (;;) {
            bool released = false;
            std::optional<dimse_message> m;
            try {
                m = read_message(socket, idle(), settings.max_pdu, released);
            } catch (const pdu_error& e) {
                send_abort(socket, e.reason());
                return;
            }
            if (released) {
                socket.write_all(encode_pdu(release_rp{}), idle());
                return;
            }
            auto cmd = decode_dataset(m->command, transfer_syntax::implicit_vr_little_endian);
            auto it = accepted.find(m->context_id);
            if (it == accepted.end() || command_u16(cmd, tags::command_field) != command_c_store_rq) {
                send_abort(socket, abort_reason::unexpected_parameter);
                return;
            }
            c_store_rsp rsp;
            rsp.message_id_being_responded_to = command_u16(cmd, tags::message_id);
            rsp.sop_class_uid = command_uid(cmd, tags::affected_sop_class_uid);
            rsp.sop_instance_uid = command_uid(cmd, tags::affected_sop_instance_uid);
            try {
                (void)decode_dataset(m->data, it->second);
                rsp.status = handler({rsp.sop_class_uid, rsp.sop_instance_uid, it->second, std::move(m->data)});
            } catch (const error& e) {
                rsp.status = e.code() == error_code::io_error ? status_out_of_resources : status_cannot_understand;
            } catch (...) {
                rsp.status = status_out_of_resources;
            }
            auto peer_max = rq.max_pdu;
            send_message(socket, m->context_id, encode_command(rsp), {}, peer_max, idle());
        }
    } catch (...) {
        // Timeouts and broken connections end the association silently.
        send_abort(socket, abort_reason::not_specified);
    }
}

}  // namespace gridbox::dicom::ul
