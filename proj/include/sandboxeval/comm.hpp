#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

#include "sandboxeval/config.hpp"
#include "sandboxeval/probe.hpp"

namespace sandboxeval {

enum class CommChannel { Ping, DnsQuery, Http, Ftp, Ssh, Smtp, Messaging, CloudStorage };

std::string_view to_string(CommChannel c);

/// One bounded protocol step against the configured endpoint for `channel`.
/// Refusal, unreachability and timeouts come back as Refused; only failures
/// of the probe itself are InternalFailure. No credentials are ever sent.
Observation probe_external(CommChannel channel, const Endpoints& endpoints, const Budget& budget);

namespace net {

/// Connected TCP socket or the errno that stopped it. A timeout is ETIMEDOUT.
struct Connection {
    int fd = -1;
    int error = 0;
    std::string address;  // numeric peer actually tried last
    std::string stage;    // "resolve", "socket" or "connect" on failure
};

Connection tcp_connect(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout);

/// Reads up to the first newline (or `limit` bytes). Returns nullopt on
/// timeout or when the peer closes before sending anything; `error` gets
/// the errno (ETIMEDOUT on timeout, 0 on orderly close).
std::optional<std::string> read_line(int fd, std::chrono::milliseconds timeout, int& error, std::size_t limit = 512);

/// Standard DNS wire-format query for an A record.
std::string build_a_query(std::string_view name, std::uint16_t id);

struct DnsAnswer {
    std::uint16_t id = 0;
    int rcode = 0;
    std::vector<std::string> addresses;
};

/// Parses a response; nullopt when it is not a well-formed reply.
std::optional<DnsAnswer> parse_a_response(std::string_view packet);

/// First `nameserver` entry of a resolv.conf-format file.
std::optional<std::string> system_resolver(const std::filesystem::path& resolv_conf = "/etc/resolv.conf");

}  // namespace net

}  // namespace sandboxeval
