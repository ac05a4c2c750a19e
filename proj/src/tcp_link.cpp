#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>

#include "btweave/errors.hpp"
#include "btweave/runtime.hpp"

namespace btweave {

namespace {

[[noreturn]] void sys_fail(const std::string& what) {
    throw Error(what + ": " + std::strerror(errno));
}

// "host:port" -> sockaddr; host must be a dotted-quad (localhost use only)
sockaddr_in parse_addr(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos)
        throw Error("address '" + text + "' is not host:port");
    const std::string host = text.substr(0, colon);
    const std::string port = text.substr(colon + 1);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw Error("address '" + host + "' is not a dotted-quad IPv4 host");
    char* end = nullptr;
    const long p = std::strtol(port.c_str(), &end, 10);
    if (end == port.c_str() || *end != '\0' || p < 0 || p > 65535)
        throw Error("port '" + port + "' is out of range");
    addr.sin_port = htons(static_cast<std::uint16_t>(p));
    return addr;
}

// reads until '\n'; returns false on orderly close before any byte
bool read_line(int fd, std::string& buffer, std::string& out) {
    for (;;) {
        const auto nl = buffer.find('\n');
        if (nl != std::string::npos) {
            out = buffer.substr(0, nl + 1);
            buffer.erase(0, nl + 1);
            return true;
        }
        char chunk[4096];
        const ssize_t n = ::read(fd, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR) continue;
            sys_fail("read");
        }
        if (n == 0) {
            if (!buffer.empty()) throw Error("peer closed mid-line");
            return false;
        }
        buffer.append(chunk, static_cast<std::size_t>(n));
    }
}

void write_all(int fd, const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            sys_fail("write");
        }
        off += static_cast<std::size_t>(n);
    }
}

}  // namespace

TcpServer::TcpServer(const std::string& bind_addr) {
    std::string text = bind_addr;
    if (text.empty()) {
        const char* env = std::getenv("BTWEAVE_LISTEN");
        text = env ? env : "127.0.0.1:0";
    }
    const sockaddr_in addr = parse_addr(text);

    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) sys_fail("socket");
    const int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) < 0) {
        ::close(fd_);
        fd_ = -1;
        sys_fail("bind " + text);
    }
    if (::listen(fd_, 1) < 0) {
        ::close(fd_);
        fd_ = -1;
        sys_fail("listen");
    }
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len) < 0)
        sys_fail("getsockname");
    port_ = ntohs(bound.sin_port);
}

TcpServer::~TcpServer() {
    if (fd_ >= 0) ::close(fd_);
}

std::size_t TcpServer::serve_one(
    const std::function<std::string(const std::string&)>& handler) {
    int conn = -1;
    for (;;) {
        conn = ::accept(fd_, nullptr, nullptr);
        if (conn >= 0) break;
        if (errno == EINTR) continue;
        sys_fail("accept");
    }
    std::size_t served = 0;
    std::string buffer, line;
    try {
        while (read_line(conn, buffer, line)) {
            std::string reply = handler(line);
            if (reply.empty() || reply.back() != '\n') reply += '\n';
            write_all(conn, reply);
            ++served;
        }
    } catch (...) {
        ::close(conn);
        throw;
    }
    ::close(conn);
    return served;
}

TcpClient::TcpClient(const std::string& host, int port) {
    const sockaddr_in addr = parse_addr(host + ":" + std::to_string(port));
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) sys_fail("socket");
    if (::connect(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) < 0) {
        ::close(fd_);
        fd_ = -1;
        sys_fail("connect " + host + ":" + std::to_string(port));
    }
}

TcpClient::~TcpClient() {
    if (fd_ >= 0) ::close(fd_);
}

std::string TcpClient::request(const std::string& line) {
    std::string out = line;
    if (out.empty() || out.back() != '\n') out += '\n';
    write_all(fd_, out);
    std::string reply;
    if (!read_line(fd_, buffer_, reply))
        throw Error("server closed before replying");
    return reply;
}

}  // namespace btweave
