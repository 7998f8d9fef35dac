#pragma once

// Loopback servers standing in for the external endpoints, plus helpers
// shared by the unit tests and the acceptance binary.

#include <sys/types.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <thread>

#include "sandboxeval/config.hpp"

namespace sandboxeval::testing {

/// HTTP on 127.0.0.1: GET / answers "ok", POST / echoes the body. Counts
/// every request it sees.
class HttpFixture {
public:
    HttpFixture();
    ~HttpFixture();
    HttpFixture(const HttpFixture&) = delete;
    HttpFixture& operator=(const HttpFixture&) = delete;

    std::uint16_t port() const { return port_; }
    std::string url() const;
    int requests() const { return requests_.load(); }
    int connections() const { return connections_.load(); }
    void reset() { requests_ = 0, connections_ = 0; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::uint16_t port_ = 0;
    std::atomic<int> requests_{0};
    std::atomic<int> connections_{0};
    std::thread thread_;
};

/// TCP listener that writes one greeting line to each client and hangs up.
/// With tls=true it performs a server-side TLS handshake with a fresh
/// self-signed certificate instead.
class LineFixture {
public:
    explicit LineFixture(std::string greeting, bool tls = false);
    ~LineFixture();
    LineFixture(const LineFixture&) = delete;
    LineFixture& operator=(const LineFixture&) = delete;

    std::uint16_t port() const { return port_; }
    int connections() const { return connections_.load(); }
    int handshakes() const { return handshakes_.load(); }

private:
    void serve();

    std::string greeting_;
    bool tls_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stop_{false};
    std::atomic<int> connections_{0};
    std::atomic<int> handshakes_{0};
    void* ssl_ctx_ = nullptr;
    std::thread thread_;
};

/// UDP DNS responder: every A query gets 127.0.0.1.
class DnsFixture {
public:
    DnsFixture();
    ~DnsFixture();
    DnsFixture(const DnsFixture&) = delete;
    DnsFixture& operator=(const DnsFixture&) = delete;

    std::uint16_t port() const { return port_; }
    int queries() const { return queries_.load(); }

private:
    void serve();

    int fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stop_{false};
    std::atomic<int> queries_{0};
    std::thread thread_;
};

/// Every fixture a communication run needs, and endpoints aimed at them.
struct LoopbackSet {
    HttpFixture http;
    LineFixture ftp{"220 fixture FTP ready"};
    LineFixture ssh{"SSH-2.0-fixture"};
    LineFixture smtp{"220 fixture ESMTP"};
    LineFixture messaging{"", true};
    LineFixture cloud{"", true};
    DnsFixture dns;

    Endpoints endpoints() const;
};

/// Fresh directory below the system temp dir, mode 0755 so dropped
/// identities can traverse it; removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& prefix = "sbx-test");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// Runs `fn` in a forked child and returns its exit status (or 128+signal).
/// Whatever the child writes to `out` comes back through a pipe.
int run_in_child(const std::function<int(int out_fd)>& fn, std::string& output);

/// Drops to uid/gid (no supplementary groups). Returns false on failure.
bool become(uid_t uid, gid_t gid);

}  // namespace sandboxeval::testing
