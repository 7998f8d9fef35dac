#include "sandboxeval/comm.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/ip_icmp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <openssl/err.h>
#include <openssl/ssl.h>

#include <array>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>

#include <httplib.h>

namespace sandboxeval {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using std::chrono::milliseconds;

std::string_view to_string(CommChannel c)
{
    switch (c) {
    case CommChannel::Ping: return "ping";
    case CommChannel::DnsQuery: return "dns_query";
    case CommChannel::Http: return "http";
    case CommChannel::Ftp: return "ftp";
    case CommChannel::Ssh: return "ssh";
    case CommChannel::Smtp: return "smtp";
    case CommChannel::Messaging: return "messaging";
    case CommChannel::CloudStorage: break;
    }
    return "cloud_storage";
}

namespace {

struct Fd {
    int fd = -1;
    explicit Fd(int f = -1) : fd(f) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    ~Fd()
    {
        if (fd >= 0) ::close(fd);
    }
};

milliseconds to_ms(double seconds) { return milliseconds(static_cast<long>(seconds * 1000.0)); }

long elapsed_ms(Clock::time_point since)
{
    return static_cast<long>(std::chrono::duration_cast<milliseconds>(Clock::now() - since).count());
}

int remaining_ms(Clock::time_point deadline)
{
    auto left = std::chrono::duration_cast<milliseconds>(deadline - Clock::now()).count();
    return left > 0 ? static_cast<int>(left) : 0;
}

// Printable ASCII only, so the evidence always serializes.
std::string printable_prefix(std::string_view s, std::size_t n = 64)
{
    std::string out;
    for (char c : s.substr(0, std::min(n, s.size()))) {
        auto u = static_cast<unsigned char>(c);
        if (c == '\r' || c == '\n') continue;
        out += (u >= 0x20 && u < 0x7f) ? c : '.';
    }
    return out;
}

// Errors that mean "something outside this process said no".
bool is_network_refusal(int err)
{
    switch (err) {
    case ECONNREFUSED: case ENETUNREACH: case EHOSTUNREACH: case ETIMEDOUT: case ECONNRESET:
    case ENETDOWN: case EHOSTDOWN: case EACCES: case EPERM: case EADDRNOTAVAIL: case EAFNOSUPPORT:
    case ECONNABORTED: case EPIPE:
        return true;
    default: return false;
    }
}

Evidence base_evidence(CommChannel c, std::string target, std::string method)
{
    Evidence ev{"net", Json::object(), false, std::nullopt};
    ev.payload["channel"] = std::string(to_string(c));
    ev.payload["target"] = std::move(target);
    ev.payload["method"] = std::move(method);
    return ev;
}

Observation connection_failure(Evidence ev, const net::Connection& conn)
{
    ev.payload["stage"] = conn.stage;
    ev.payload["error"] = std::strerror(conn.error);
    if (!conn.address.empty()) ev.payload["address"] = conn.address;
    std::string detail = conn.stage + ": " + std::strerror(conn.error);
    if (conn.stage == "resolve" || is_network_refusal(conn.error)) return Observation::refused(ev, detail);
    return {std::move(ev), Disposition::InternalFailure, detail};
}

std::string numeric_host(const sockaddr* sa, socklen_t len)
{
    char host[NI_MAXHOST] = {};
    if (::getnameinfo(sa, len, host, sizeof host, nullptr, 0, NI_NUMERICHOST) != 0) return {};
    return host;
}

// ---------------------------------------------------------------------------
// Greeting channels (FTP, SSH, SMTP)

Observation greeting_probe(CommChannel c, const Endpoint& ep, milliseconds timeout)
{
    auto ev = base_evidence(c, ep.str(), "greeting");
    const auto start = Clock::now();
    auto conn = net::tcp_connect(ep.host, ep.port, timeout);
    if (conn.fd < 0) return connection_failure(std::move(ev), conn);
    Fd guard(conn.fd);
    ev.payload["address"] = conn.address;
    int err = 0;
    auto line = net::read_line(conn.fd, timeout, err);
    ev.payload["rtt_ms"] = elapsed_ms(start);
    if (!line || line->empty()) {
        ev.payload["stage"] = "greeting";
        ev.payload["error"] = err == 0 ? "connection closed before greeting" : std::strerror(err);
        return Observation::refused(ev, err == 0 ? "no greeting" : std::string("greeting: ") + std::strerror(err));
    }
    ev.payload["response_prefix"] = printable_prefix(*line);
    return Observation::accessed(ev);
}

// ---------------------------------------------------------------------------
// Ping

std::uint16_t icmp_checksum(const unsigned char* data, std::size_t len)
{
    std::uint32_t sum = 0;
    for (std::size_t i = 0; i + 1 < len; i += 2) sum += static_cast<std::uint32_t>(data[i] << 8 | data[i + 1]);
    if (len & 1) sum += static_cast<std::uint32_t>(data[len - 1] << 8);
    while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
    return static_cast<std::uint16_t>(~sum);
}

Observation tcp_fallback(Evidence ev, const Endpoint& ep, milliseconds timeout, const std::string& why)
{
    ev.payload["method"] = "tcp_fallback";
    ev.payload["fallback_reason"] = why;
    const auto start = Clock::now();
    auto conn = net::tcp_connect(ep.host, ep.port, timeout);
    if (conn.fd < 0) return connection_failure(std::move(ev), conn);
    Fd guard(conn.fd);
    ev.payload["address"] = conn.address;
    ev.payload["rtt_ms"] = elapsed_ms(start);
    return Observation::accessed(ev);
}

Observation ping_probe(const Endpoint& ep, milliseconds timeout)
{
    auto ev = base_evidence(CommChannel::Ping, ep.host, "icmp_datagram");
    addrinfo hints{};
    hints.ai_family = AF_INET;
    addrinfo* res = nullptr;
    if (int rc = ::getaddrinfo(ep.host.c_str(), nullptr, &hints, &res); rc != 0 || res == nullptr) {
        // No IPv4 address: the echo path is v4 only, the transport path is not.
        if (rc == EAI_NONAME || rc == EAI_AGAIN || rc == EAI_FAIL || rc == EAI_NODATA || rc == EAI_ADDRFAMILY)
            return tcp_fallback(std::move(ev), ep, timeout, std::string("no IPv4 address: ") + ::gai_strerror(rc));
        return tcp_fallback(std::move(ev), ep, timeout, ::gai_strerror(rc));
    }
    std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> holder(res, &::freeaddrinfo);
    sockaddr_in dest{};
    std::memcpy(&dest, res->ai_addr, sizeof dest);
    ev.payload["address"] = numeric_host(res->ai_addr, res->ai_addrlen);

    Fd sock(::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, IPPROTO_ICMP));
    if (sock.fd < 0) {
        int err = errno;
        return tcp_fallback(std::move(ev), ep, timeout, std::string("echo socket: ") + std::strerror(err));
    }

    std::array<unsigned char, 16> packet{};
    packet[0] = ICMP_ECHO;
    std::uint16_t seq = 1;
    packet[6] = static_cast<unsigned char>(seq >> 8);
    packet[7] = static_cast<unsigned char>(seq & 0xff);
    std::memcpy(packet.data() + 8, "sandboxe", 8);
    auto sum = icmp_checksum(packet.data(), packet.size());
    packet[2] = static_cast<unsigned char>(sum >> 8);
    packet[3] = static_cast<unsigned char>(sum & 0xff);

    const auto start = Clock::now();
    if (::sendto(sock.fd, packet.data(), packet.size(), 0, reinterpret_cast<sockaddr*>(&dest), sizeof dest) < 0) {
        int err = errno;
        ev.payload["stage"] = "send";
        ev.payload["error"] = std::strerror(err);
        if (is_network_refusal(err)) return Observation::refused(ev, std::string("echo send: ") + std::strerror(err));
        return {std::move(ev), Disposition::InternalFailure, std::string("echo send: ") + std::strerror(err)};
    }
    const auto deadline = start + timeout;
    for (;;) {
        pollfd p{sock.fd, POLLIN, 0};
        int rc = ::poll(&p, 1, remaining_ms(deadline));
        if (rc < 0 && errno == EINTR) continue;
        if (rc <= 0) {
            ev.payload["stage"] = "reply";
            ev.payload["error"] = std::strerror(ETIMEDOUT);
            return Observation::refused(ev, "no echo reply before timeout");
        }
        std::array<unsigned char, 1500> reply{};
        auto n = ::recv(sock.fd, reply.data(), reply.size(), 0);
        if (n < 0) {
            int err = errno;
            ev.payload["stage"] = "reply";
            ev.payload["error"] = std::strerror(err);
            return Observation::refused(ev, std::string("echo reply: ") + std::strerror(err));
        }
        // Datagram ICMP sockets deliver the ICMP header without the IP header.
        if (n >= 8 && reply[0] == ICMP_ECHOREPLY) {
            ev.payload["rtt_ms"] = elapsed_ms(start);
            ev.payload["response_prefix"] = "echo reply";
            return Observation::accessed(ev);
        }
    }
}

// ---------------------------------------------------------------------------
// DNS

Observation dns_probe(const Endpoints& eps, milliseconds timeout)
{
    std::string resolver_host;
    std::uint16_t resolver_port = 53;
    std::string source = "configured";
    if (eps.dns_resolver) {
        resolver_host = eps.dns_resolver->host;
        resolver_port = eps.dns_resolver->port;
    } else if (auto sys = net::system_resolver()) {
        resolver_host = *sys;
        source = "system";
    } else {
        auto ev = base_evidence(CommChannel::DnsQuery, eps.dns_name, "udp_a_query");
        return Observation::unavailable(ev, "no resolver configured");
    }
    auto ev = base_evidence(CommChannel::DnsQuery, eps.dns_name, "udp_a_query");
    ev.payload["resolver"] = Endpoint{resolver_host, resolver_port}.str();
    ev.payload["resolver_source"] = source;

    addrinfo hints{};
    hints.ai_flags = AI_NUMERICHOST;
    hints.ai_socktype = SOCK_DGRAM;
    addrinfo* res = nullptr;
    auto port_text = std::to_string(resolver_port);
    if (::getaddrinfo(resolver_host.c_str(), port_text.c_str(), &hints, &res) != 0 || res == nullptr) {
        // Resolver given by name: resolving it would itself need DNS.
        hints.ai_flags = 0;
        if (::getaddrinfo(resolver_host.c_str(), port_text.c_str(), &hints, &res) != 0 || res == nullptr)
            return Observation::refused(ev, "resolver address could not be resolved");
    }
    std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> holder(res, &::freeaddrinfo);

    Fd sock(::socket(res->ai_family, SOCK_DGRAM | SOCK_CLOEXEC, 0));
    if (sock.fd < 0) {
        int err = errno;
        ev.payload["stage"] = "socket";
        ev.payload["error"] = std::strerror(err);
        if (is_network_refusal(err)) return Observation::refused(ev, std::string("socket: ") + std::strerror(err));
        return {std::move(ev), Disposition::InternalFailure, std::string("socket: ") + std::strerror(err)};
    }
    std::random_device rd;
    const auto id = static_cast<std::uint16_t>(rd());
    const auto query = net::build_a_query(eps.dns_name, id);
    const auto start = Clock::now();
    if (::connect(sock.fd, res->ai_addr, res->ai_addrlen) != 0 || ::send(sock.fd, query.data(), query.size(), 0) < 0) {
        int err = errno;
        ev.payload["stage"] = "send";
        ev.payload["error"] = std::strerror(err);
        return Observation::refused(ev, std::string("send: ") + std::strerror(err));
    }
    const auto deadline = start + timeout;
    for (;;) {
        pollfd p{sock.fd, POLLIN, 0};
        int rc = ::poll(&p, 1, remaining_ms(deadline));
        if (rc < 0 && errno == EINTR) continue;
        if (rc <= 0) {
            ev.payload["stage"] = "reply";
            ev.payload["error"] = std::strerror(ETIMEDOUT);
            return Observation::refused(ev, "no response before timeout");
        }
        std::array<char, 1500> buf{};
        auto n = ::recv(sock.fd, buf.data(), buf.size(), 0);
        if (n < 0) {
            int err = errno;
            ev.payload["stage"] = "reply";
            ev.payload["error"] = std::strerror(err);
            return Observation::refused(ev, std::string("reply: ") + std::strerror(err));
        }
        auto answer = net::parse_a_response(std::string_view(buf.data(), static_cast<std::size_t>(n)));
        if (!answer || answer->id != id) continue;  // stray datagram
        ev.payload["rtt_ms"] = elapsed_ms(start);
        ev.payload["rcode"] = answer->rcode;
        ev.payload["addresses"] = answer->addresses;
        ev.payload["response_prefix"] =
            answer->addresses.empty() ? "rcode " + std::to_string(answer->rcode) : answer->addresses.front();
        return Observation::accessed(ev);
    }
}

// ---------------------------------------------------------------------------
// HTTP

constexpr std::string_view kPostBody = "sandboxeval connectivity probe";

std::unique_ptr<httplib::Client> make_client(const Url& u, milliseconds timeout)
{
    std::string host = u.host.find(':') != std::string::npos ? "[" + u.host + "]" : u.host;
    auto cli = std::make_unique<httplib::Client>(u.scheme + "://" + host + ":" + std::to_string(u.port));
    const auto secs = timeout.count() / 1000;
    const auto usecs = (timeout.count() % 1000) * 1000;
    cli->set_connection_timeout(secs, usecs);
    cli->set_read_timeout(secs, usecs);
    cli->set_write_timeout(secs, usecs);
    cli->set_keep_alive(false);
    cli->set_follow_location(false);
    if (u.scheme == "https") cli->enable_server_certificate_verification(false);
    return cli;
}

Disposition classify_http_error(httplib::Error e)
{
    switch (e) {
    case httplib::Error::Connection: case httplib::Error::ConnectionTimeout: case httplib::Error::Read:
    case httplib::Error::Write: case httplib::Error::SSLConnection: case httplib::Error::SSLServerVerification:
    case httplib::Error::ProxyConnection: case httplib::Error::Canceled:
        return Disposition::Refused;
    default: return Disposition::InternalFailure;
    }
}

Observation http_probe(const std::string& url_text, milliseconds timeout)
{
    auto url = Url::parse(url_text);
    auto ev = base_evidence(CommChannel::Http, url.str(), "get_post");
    const auto start = Clock::now();
    auto get = make_client(url, timeout)->Get(url.path);
    if (!get) {
        ev.payload["stage"] = "get";
        ev.payload["error"] = httplib::to_string(get.error());
        return {std::move(ev), classify_http_error(get.error()), "GET: " + httplib::to_string(get.error())};
    }
    ev.payload["get_status"] = get->status;
    ev.payload["response_prefix"] = printable_prefix(get->body);
    auto post = make_client(url, timeout)->Post(url.path, std::string(kPostBody), "text/plain");
    ev.payload["rtt_ms"] = elapsed_ms(start);
    if (!post) {
        ev.payload["stage"] = "post";
        ev.payload["error"] = httplib::to_string(post.error());
        return {std::move(ev), classify_http_error(post.error()), "POST: " + httplib::to_string(post.error())};
    }
    ev.payload["post_status"] = post->status;
    ev.payload["post_bytes"] = kPostBody.size();
    ev.payload["post_response_prefix"] = printable_prefix(post->body);
    return Observation::accessed(ev);
}

// ---------------------------------------------------------------------------
// TLS handshake (messaging and cloud storage)

Observation tls_probe(CommChannel c, const Endpoint& ep, milliseconds timeout)
{
    auto ev = base_evidence(c, ep.str(), "tls_handshake");
    const auto start = Clock::now();
    auto conn = net::tcp_connect(ep.host, ep.port, timeout);
    if (conn.fd < 0) return connection_failure(std::move(ev), conn);
    Fd guard(conn.fd);
    ev.payload["address"] = conn.address;

    std::unique_ptr<SSL_CTX, decltype(&::SSL_CTX_free)> ctx(::SSL_CTX_new(TLS_client_method()), &::SSL_CTX_free);
    if (!ctx) return {std::move(ev), Disposition::InternalFailure, "SSL_CTX_new failed"};
    ::SSL_CTX_set_verify(ctx.get(), SSL_VERIFY_NONE, nullptr);
    ::SSL_CTX_set_default_verify_paths(ctx.get());
    std::unique_ptr<SSL, decltype(&::SSL_free)> ssl(::SSL_new(ctx.get()), &::SSL_free);
    if (!ssl) return {std::move(ev), Disposition::InternalFailure, "SSL_new failed"};
    ::SSL_set_tlsext_host_name(ssl.get(), ep.host.c_str());
    ::SSL_set1_host(ssl.get(), ep.host.c_str());
    ::SSL_set_fd(ssl.get(), conn.fd);

    const auto deadline = start + timeout;
    for (;;) {
        int rc = ::SSL_connect(ssl.get());
        if (rc == 1) break;
        int why = ::SSL_get_error(ssl.get(), rc);
        short events = why == SSL_ERROR_WANT_READ ? POLLIN : why == SSL_ERROR_WANT_WRITE ? POLLOUT : 0;
        if (events == 0) {
            unsigned long code = ::ERR_get_error();
            char text[256] = "handshake failed";
            if (code != 0) ::ERR_error_string_n(code, text, sizeof text);
            ev.payload["stage"] = "handshake";
            ev.payload["error"] = text;
            return Observation::refused(ev, std::string("handshake: ") + text);
        }
        pollfd p{conn.fd, events, 0};
        int left = remaining_ms(deadline);
        if (left == 0 || ::poll(&p, 1, left) <= 0) {
            ev.payload["stage"] = "handshake";
            ev.payload["error"] = std::strerror(ETIMEDOUT);
            return Observation::refused(ev, "handshake timed out");
        }
    }
    ev.payload["rtt_ms"] = elapsed_ms(start);
    ev.payload["protocol"] = ::SSL_get_version(ssl.get());
    ev.payload["cipher"] = ::SSL_get_cipher_name(ssl.get());
    ev.payload["peer_verified"] = ::SSL_get_verify_result(ssl.get()) == X509_V_OK;
    ev.payload["response_prefix"] = std::string("handshake ") + ::SSL_get_version(ssl.get());
    ::SSL_shutdown(ssl.get());
    return Observation::accessed(ev);
}

}  // namespace

// ---------------------------------------------------------------------------
// net helpers

namespace net {

Connection tcp_connect(const std::string& host, std::uint16_t port, milliseconds timeout)
{
    Connection out;
    addrinfo hints{};
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    auto port_text = std::to_string(port);
    if (int rc = ::getaddrinfo(host.c_str(), port_text.c_str(), &hints, &res); rc != 0 || res == nullptr) {
        out.stage = "resolve";
        out.error = rc == EAI_SYSTEM ? errno : EHOSTUNREACH;
        return out;
    }
    std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> holder(res, &::freeaddrinfo);
    const auto deadline = Clock::now() + timeout;
    for (auto* ai = res; ai != nullptr; ai = ai->ai_next) {
        out.address = numeric_host(ai->ai_addr, ai->ai_addrlen);
        int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC | SOCK_NONBLOCK, ai->ai_protocol);
        if (fd < 0) {
            out.stage = "socket";
            out.error = errno;
            continue;
        }
        int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
        if (rc != 0 && errno == EINPROGRESS) {
            pollfd p{fd, POLLOUT, 0};
            int ready;
            do ready = ::poll(&p, 1, remaining_ms(deadline));
            while (ready < 0 && errno == EINTR);
            if (ready <= 0) {
                ::close(fd);
                out.stage = "connect";
                out.error = ETIMEDOUT;
                break;  // the deadline covers every address
            }
            int soerr = 0;
            socklen_t len = sizeof soerr;
            ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &soerr, &len);
            rc = soerr == 0 ? 0 : -1;
            errno = soerr;
        }
        if (rc == 0) {
            int flags = ::fcntl(fd, F_GETFL);
            ::fcntl(fd, F_SETFL, flags & ~O_NONBLOCK);
            out.fd = fd;
            out.error = 0;
            out.stage.clear();
            return out;
        }
        out.stage = "connect";
        out.error = errno;
        ::close(fd);
    }
    return out;
}

std::optional<std::string> read_line(int fd, milliseconds timeout, int& error, std::size_t limit)
{
    std::string line;
    const auto deadline = Clock::now() + timeout;
    error = 0;
    while (line.size() < limit) {
        pollfd p{fd, POLLIN, 0};
        int rc = ::poll(&p, 1, remaining_ms(deadline));
        if (rc < 0 && errno == EINTR) continue;
        if (rc <= 0) {
            error = ETIMEDOUT;
            break;
        }
        char c;
        auto n = ::recv(fd, &c, 1, 0);
        if (n < 0) {
            if (errno == EINTR) continue;
            error = errno;
            break;
        }
        if (n == 0) break;
        if (c == '\n') return line;
        line += c;
    }
    if (line.empty()) return std::nullopt;
    return line;
}

std::string build_a_query(std::string_view name, std::uint16_t id)
{
    std::string q;
    q += static_cast<char>(id >> 8);
    q += static_cast<char>(id & 0xff);
    q += std::string("\x01\x00", 2);          // recursion desired
    q += std::string("\x00\x01\x00\x00\x00\x00\x00\x00", 8);  // one question
    std::size_t pos = 0;
    while (pos <= name.size()) {
        auto dot = name.find('.', pos);
        if (dot == std::string_view::npos) dot = name.size();
        auto label = name.substr(pos, dot - pos);
        if (!label.empty()) {
            q += static_cast<char>(std::min<std::size_t>(label.size(), 63));
            q += label.substr(0, 63);
        }
        pos = dot + 1;
    }
    q += '\0';
    q += std::string("\x00\x01\x00\x01", 4);  // type A, class IN
    return q;
}

namespace {

std::uint16_t be16(std::string_view p, std::size_t at)
{
    return static_cast<std::uint16_t>(static_cast<unsigned char>(p[at]) << 8 | static_cast<unsigned char>(p[at + 1]));
}

// Skips a possibly compressed name; returns npos when malformed.
std::size_t skip_name(std::string_view p, std::size_t at)
{
    while (at < p.size()) {
        auto len = static_cast<unsigned char>(p[at]);
        if (len == 0) return at + 1;
        if ((len & 0xc0) == 0xc0) return at + 2 <= p.size() ? at + 2 : std::string_view::npos;
        at += 1 + len;
    }
    return std::string_view::npos;
}

}  // namespace

std::optional<DnsAnswer> parse_a_response(std::string_view p)
{
    if (p.size() < 12) return std::nullopt;
    DnsAnswer a;
    a.id = be16(p, 0);
    const auto flags = be16(p, 2);
    if ((flags & 0x8000) == 0) return std::nullopt;  // not a response
    a.rcode = flags & 0x000f;
    const auto qd = be16(p, 4);
    const auto an = be16(p, 6);
    std::size_t at = 12;
    for (int i = 0; i < qd; ++i) {
        at = skip_name(p, at);
        if (at == std::string_view::npos || at + 4 > p.size()) return std::nullopt;
        at += 4;
    }
    for (int i = 0; i < an; ++i) {
        at = skip_name(p, at);
        if (at == std::string_view::npos || at + 10 > p.size()) return std::nullopt;
        const auto type = be16(p, at);
        const auto rdlen = be16(p, at + 8);
        at += 10;
        if (at + rdlen > p.size()) return std::nullopt;
        if (type == 1 && rdlen == 4) {
            char text[INET_ADDRSTRLEN] = {};
            ::inet_ntop(AF_INET, p.data() + at, text, sizeof text);
            a.addresses.emplace_back(text);
        }
        at += rdlen;
    }
    return a;
}

std::optional<std::string> system_resolver(const fs::path& resolv_conf)
{
    std::ifstream in(resolv_conf);
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream words(line);
        std::string key, value;
        if (words >> key >> value && key == "nameserver") return value;
    }
    return std::nullopt;
}

}  // namespace net

Observation probe_external(CommChannel channel, const Endpoints& eps, const Budget& budget)
{
    const auto timeout = to_ms(budget.timeout_seconds);
    switch (channel) {
    case CommChannel::Ping: return ping_probe(eps.ping, timeout);
    case CommChannel::DnsQuery: return dns_probe(eps, timeout);
    case CommChannel::Http: return http_probe(eps.http_url, timeout);
    case CommChannel::Ftp: return greeting_probe(channel, eps.ftp, timeout);
    case CommChannel::Ssh: return greeting_probe(channel, eps.ssh, timeout);
    case CommChannel::Smtp: return greeting_probe(channel, eps.smtp, timeout);
    case CommChannel::Messaging: return tls_probe(channel, eps.messaging, timeout);
    case CommChannel::CloudStorage: break;
    }
    return tls_probe(channel, eps.cloud_storage, timeout);
}

}  // namespace sandboxeval
