/**
 * @file socket.hpp
 * @brief Blocking TCP sockets with per-call deadlines
 *
 * Every read and write takes an absolute deadline and waits with poll(), so a
 * silent peer can never hold a thread longer than the caller allows. Failures
 * throw gridbox::error with code timeout, io_error or bind_error.
 */

#ifndef GRIDBOX_NET_SOCKET_HPP
#define GRIDBOX_NET_SOCKET_HPP

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gridbox::net {

using clock = std::chrono::steady_clock;
using deadline = clock::time_point;

[[nodiscard]] inline deadline after(std::chrono::milliseconds d) { return clock::now() + d; }

class tcp_socket {
public:
    tcp_socket() = default;
    explicit tcp_socket(int fd) noexcept : fd_(fd) {}
    ~tcp_socket();

    tcp_socket(tcp_socket&& other) noexcept;
    tcp_socket& operator=(tcp_socket&& other) noexcept;
    tcp_socket(const tcp_socket&) = delete;
    tcp_socket& operator=(const tcp_socket&) = delete;

    [[nodiscard]] bool valid() const noexcept { return fd_ >= 0; }
    [[nodiscard]] int fd() const noexcept { return fd_; }

    /// Reads exactly `out.size()` bytes. A peer close throws io_error.
    void read_exact(std::span<std::uint8_t> out, deadline until);

    /// True once data (or end of stream) is ready to read; false when the
    /// deadline passes first.
    [[nodiscard]] bool wait_readable(deadline until);

    /// Reads whatever arrives first, up to out.size(). Returns 0 on orderly
    /// close.

    std::size_t read_some(std::span<std::uint8_t> out, deadline until);

    void write_all(std::span<const std::uint8_t> data, deadline until);

    /// Half-closes the sending side.
    void shutdown_write() noexcept;
    void close() noexcept;

private:
    int fd_ = -1;
};

/// Throws timeout when the deadline passes and io_error when the connection
/// is refused or the host does not resolve.
[[nodiscard]] tcp_socket connect_tcp(const std::string& host, std::uint16_t port, deadline until);

class tcp_listener {
public:
    /// Binds host:port (port 0 picks a free port). Throws bind_error naming the
    /// port on failure.
    tcp_listener(const std::string& host, std::uint16_t port);
    ~tcp_listener();

    tcp_listener(const tcp_listener&) = delete;
    tcp_listener& operator=(const tcp_listener&) = delete;

    [[nodiscard]] std::uint16_t port() const noexcept { return port_; }

    /// Waits until `until` for a connection. Returns nullopt on timeout or
    /// after close().
    [[nodiscard]] std::optional<tcp_socket> accept(deadline until);

    void close() noexcept;

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

}  // namespace gridbox::net

#endif  // GRIDBOX_NET_SOCKET_HPP
