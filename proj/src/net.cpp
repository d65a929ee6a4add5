#include "strata/net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

#include "strata/error.hpp"

namespace strata {

Endpoint Endpoint::parse(std::string_view address) {
    auto colon = address.rfind(':');
    if (colon == std::string_view::npos) throw ArgumentError("address must be host:port, got '" + std::string(address) + "'");
    Endpoint ep;
    ep.host = std::string(address.substr(0, colon));
    if (ep.host.empty()) ep.host = "127.0.0.1";
    auto port = address.substr(colon + 1);
    unsigned value = 0;
    auto [p, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
    if (ec != std::errc{} || p != port.data() + port.size() || value > 65535)
        throw ArgumentError("invalid port in '" + std::string(address) + "'");
    ep.port = static_cast<std::uint16_t>(value);
    return ep;
}

namespace {

addrinfo* resolve(const Endpoint& ep, bool passive) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    if (passive) hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    auto port = std::to_string(ep.port);
    if (int rc = ::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res); rc != 0)
        throw IoError("cannot resolve " + ep.host + ": " + ::gai_strerror(rc));
    return res;
}

}  // namespace

TcpStream::TcpStream(TcpStream&& other) noexcept : fd_(other.fd_), buffer_(std::move(other.buffer_)) {
    other.fd_ = -1;
}

TcpStream& TcpStream::operator=(TcpStream&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        fd_ = other.fd_;
        buffer_ = std::move(other.buffer_);
        other.fd_ = -1;
    }
    return *this;
}

TcpStream::~TcpStream() {
    if (fd_ >= 0) ::close(fd_);
}

TcpStream TcpStream::connect(const Endpoint& ep) {
    addrinfo* res = resolve(ep, false);
    int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0) {
        ::freeaddrinfo(res);
        throw IoError(std::string("socket: ") + std::strerror(errno));
    }
    if (::connect(fd, res->ai_addr, res->ai_addrlen) != 0) {
        int err = errno;
        ::freeaddrinfo(res);
        ::close(fd);
        throw IoError("connect " + ep.host + ":" + std::to_string(ep.port) + ": " + std::strerror(err));
    }
    ::freeaddrinfo(res);
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return TcpStream(fd);
}

std::optional<std::string> TcpStream::read_line() {
    while (true) {
        auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return line;
        }
        if (fd_ < 0) return std::nullopt;
        char chunk[4096];
        ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) {
            if (buffer_.empty()) return std::nullopt;
            std::string rest = std::move(buffer_);
            buffer_.clear();
            return rest;
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

bool TcpStream::write_all(std::string_view data) {
    while (!data.empty()) {
        if (fd_ < 0) return false;
        ssize_t n = ::send(fd_, data.data(), data.size(), MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return false;
        data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

void TcpStream::shutdown() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

TcpListener::TcpListener(const Endpoint& ep) {
    addrinfo* res = resolve(ep, true);
    fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd_ < 0) {
        ::freeaddrinfo(res);
        throw IoError(std::string("socket: ") + std::strerror(errno));
    }
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd_, res->ai_addr, res->ai_addrlen) != 0 || ::listen(fd_, 16) != 0) {
        int err = errno;
        ::freeaddrinfo(res);
        ::close(fd_);
        fd_ = -1;
        throw IoError("listen " + ep.host + ":" + std::to_string(ep.port) + ": " + std::strerror(err));
    }
    ::freeaddrinfo(res);
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
}

std::optional<TcpStream> TcpListener::accept() {
    while (fd_ >= 0) {
        int fd = ::accept(fd_, nullptr, nullptr);
        if (fd >= 0) {
            int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            return TcpStream(fd);
        }
        if (errno == EINTR || errno == ECONNABORTED) continue;
        return std::nullopt;
    }
    return std::nullopt;
}

void TcpListener::close() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

}  // namespace strata
