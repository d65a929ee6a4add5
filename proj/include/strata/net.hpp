#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace strata {

struct Endpoint {
    std::string host;
    std::uint16_t port = 0;

    /// Accepts "host:port" or ":port" (binds/connects to 127.0.0.1).
    static Endpoint parse(std::string_view address);
};

/// Owning wrapper around a connected TCP socket with line-oriented reads.
class TcpStream {
public:
    TcpStream() = default;
    explicit TcpStream(int fd) : fd_(fd) {}
    TcpStream(TcpStream&& other) noexcept;
    TcpStream& operator=(TcpStream&& other) noexcept;
    TcpStream(const TcpStream&) = delete;
    TcpStream& operator=(const TcpStream&) = delete;
    ~TcpStream();

    static TcpStream connect(const Endpoint& endpoint);

    bool valid() const noexcept { return fd_ >= 0; }
    /// Next line without the trailing newline; nullopt on EOF.
    std::optional<std::string> read_line();
    /// Returns false when the peer has gone away.
    bool write_all(std::string_view data);
    void shutdown();

private:
    int fd_ = -1;
    std::string buffer_;
};

class TcpListener {
public:
    explicit TcpListener(const Endpoint& endpoint);
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;
    ~TcpListener();

    std::uint16_t port() const noexcept { return port_; }
    /// Blocks for a connection; nullopt once close() has been called.
    std::optional<TcpStream> accept();
    void close();

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

}  // namespace strata
