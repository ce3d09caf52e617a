#include "gridbox/net/socket.hpp"

#include "gridbox/error.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace gridbox::net {

namespace {

std::string errno_text(int e) { return std::strerror(e); }

int remaining_ms(deadline until) {
    // Rounded up so that poll never wakes before the deadline.
    auto left = std::chrono::ceil<std::chrono::milliseconds>(until - clock::now()).count();
    if (left <= 0) return 0;
    return left > 1'000'000 ? 1'000'000 : static_cast<int>(left);
}

// Waits for `events` on fd. False when the deadline passed first.
bool wait_for(int fd, short events, deadline until) {
    for (;;) {
        pollfd p{fd, events, 0};
        int ms = remaining_ms(until);
        int rc = ::poll(&p, 1, ms);
        if (rc > 0) return true;
        if (rc == 0 && clock::now() >= until) return false;
        if (rc == 0) continue;
        if (errno != EINTR) throw error(error_code::io_error, "poll: " + errno_text(errno));
    }
}

void set_nonblocking(int fd, bool on) {
    int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, on ? (flags | O_NONBLOCK) : (flags & ~O_NONBLOCK));
}

}  // namespace

tcp_socket::~tcp_socket() { close(); }

tcp_socket::tcp_socket(tcp_socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

tcp_socket& tcp_socket::operator=(tcp_socket&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

void tcp_socket::close() noexcept {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void tcp_socket::shutdown_write() noexcept {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_WR);
}

bool tcp_socket::wait_readable(deadline until) { return wait_for(fd_, POLLIN, until); }

std::size_t tcp_socket::read_some(std::span<std::uint8_t> out, deadline until) {
    if (out.empty()) return 0;
    for (;;) {
        if (!wait_for(fd_, POLLIN, until)) throw error(error_code::timeout, "read timed out");
        ssize_t n = ::recv(fd_, out.data(), out.size(), MSG_DONTWAIT);
        if (n >= 0) return static_cast<std::size_t>(n);
        if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) continue;
        throw error(error_code::io_error, "recv: " + errno_text(errno));
    }
}

void tcp_socket::read_exact(std::span<std::uint8_t> out, deadline until) {
    std::size_t got = 0;
    while (got < out.size()) {
        auto n = read_some(out.subspan(got), until);
        if (n == 0) throw error(error_code::io_error, "connection closed by peer");
        got += n;
    }
}

void tcp_socket::write_all(std::span<const std::uint8_t> data, deadline until) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        if (!wait_for(fd_, POLLOUT, until)) throw error(error_code::timeout, "write timed out");
        ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_DONTWAIT | MSG_NOSIGNAL);
        if (n >= 0) {
            sent += static_cast<std::size_t>(n);
            continue;
        }
        if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) continue;
        throw error(error_code::io_error, "send: " + errno_text(errno));
    }
}

tcp_socket connect_tcp(const std::string& host, std::uint16_t port, deadline until) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* found = nullptr;
    int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &found);
    if (rc != 0) throw error(error_code::io_error, "cannot resolve " + host + ": " + ::gai_strerror(rc));

    std::string last = "no address";
    for (auto* ai = found; ai != nullptr; ai = ai->ai_next) {
        tcp_socket s(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
        if (!s.valid()) {
            last = errno_text(errno);
            continue;
        }
        set_nonblocking(s.fd(), true);
        rc = ::connect(s.fd(), ai->ai_addr, ai->ai_addrlen);
        if (rc != 0 && errno != EINPROGRESS) {
            last = errno_text(errno);
            continue;
        }
        if (rc != 0) {
            if (!wait_for(s.fd(), POLLOUT, until)) {
                ::freeaddrinfo(found);
                throw error(error_code::timeout, "connect to " + host + ":" + std::to_string(port) + " timed out");
            }
            int err = 0;
            socklen_t len = sizeof err;
            ::getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
            if (err != 0) {
                last = errno_text(err);
                continue;
            }
        }
        set_nonblocking(s.fd(), false);
        int one = 1;
        ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        ::freeaddrinfo(found);
        return s;
    }
    ::freeaddrinfo(found);
    throw error(error_code::io_error, "connect to " + host + ":" + std::to_string(port) + ": " + last);
}

tcp_listener::tcp_listener(const std::string& host, std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd_ < 0) throw error(error_code::bind_error, "socket: " + errno_text(errno));
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd_);
        throw error(error_code::bind_error, "bad listen address '" + host + "' for port " + std::to_string(port));
    }
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 128) != 0) {
        int e = errno;
        ::close(fd_);
        fd_ = -1;
        throw error(error_code::bind_error, "cannot bind port " + std::to_string(port) + ": " + errno_text(e));
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    set_nonblocking(fd_, true);
}

tcp_listener::~tcp_listener() { close(); }

void tcp_listener::close() noexcept {
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
        fd_ = -1;
    }
}

std::optional<tcp_socket> tcp_listener::accept(deadline until) {
    while (fd_ >= 0) {
        if (!wait_for(fd_, POLLIN, until)) return std::nullopt;
        int c = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
        if (c >= 0) {
            int one = 1;
            ::setsockopt(c, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            return tcp_socket(c);
        }
        if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK || errno == ECONNABORTED) continue;
        return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace gridbox::net
