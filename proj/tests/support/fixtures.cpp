#include "fixtures.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <grp.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <stdexcept>

#include <httplib.h>
#include <openssl/err.h>
#include <openssl/evp.h>
#include <openssl/ssl.h>
#include <openssl/x509.h>

namespace sandboxeval::testing {

namespace fs = std::filesystem;

namespace {

// Counts accepted sockets on their way into httplib's worker pool.
class CountingQueue : public httplib::TaskQueue {
public:
    CountingQueue(std::atomic<int>& counter) : counter_(counter), pool_(4) {}
    bool enqueue(std::function<void()> fn) override
    {
        ++counter_;
        return pool_.enqueue(std::move(fn));
    }
    void shutdown() override { pool_.shutdown(); }

private:
    std::atomic<int>& counter_;
    httplib::ThreadPool pool_;
};

int listen_loopback(int type, std::uint16_t& port)
{
    int fd = ::socket(AF_INET, type | SOCK_CLOEXEC, 0);
    if (fd < 0) throw std::runtime_error("fixture: socket failed");
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(fd);
        throw std::runtime_error("fixture: bind failed");
    }
    if (type == SOCK_STREAM && ::listen(fd, 64) != 0) {
        ::close(fd);
        throw std::runtime_error("fixture: listen failed");
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    port = ntohs(addr.sin_port);
    return fd;
}

bool wait_readable(int fd, int ms)
{
    pollfd p{fd, POLLIN, 0};
    return ::poll(&p, 1, ms) > 0;
}

// Self-signed P-256 certificate valid for a day.
SSL_CTX* make_server_ctx()
{
    SSL_CTX* ctx = SSL_CTX_new(TLS_server_method());
    EVP_PKEY* key = EVP_EC_gen("P-256");
    X509* cert = X509_new();
    ASN1_INTEGER_set(X509_get_serialNumber(cert), 1);
    X509_gmtime_adj(X509_getm_notBefore(cert), 0);
    X509_gmtime_adj(X509_getm_notAfter(cert), 86400);
    X509_set_pubkey(cert, key);
    X509_NAME* name = X509_get_subject_name(cert);
    X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_ASC, reinterpret_cast<const unsigned char*>("localhost"), -1,
                               -1, 0);
    X509_set_issuer_name(cert, name);
    X509_sign(cert, key, EVP_sha256());
    SSL_CTX_use_certificate(ctx, cert);
    SSL_CTX_use_PrivateKey(ctx, key);
    X509_free(cert);
    EVP_PKEY_free(key);
    return ctx;
}

}  // namespace

// ---------------------------------------------------------------------------

struct HttpFixture::Impl {
    httplib::Server server;
};

HttpFixture::HttpFixture() : impl_(std::make_unique<Impl>())
{
    auto& svr = impl_->server;
    svr.new_task_queue = [this] { return new CountingQueue(connections_); };
    svr.Get("/.*", [this](const httplib::Request&, httplib::Response& res) {
        ++requests_;
        res.set_content("ok", "text/plain");
    });
    svr.Post("/.*", [this](const httplib::Request& req, httplib::Response& res) {
        ++requests_;
        res.set_content(req.body, "text/plain");
    });
    const int port = svr.bind_to_any_port("127.0.0.1");
    if (port <= 0) throw std::runtime_error("fixture: http bind failed");
    port_ = static_cast<std::uint16_t>(port);
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    svr.wait_until_ready();
}

HttpFixture::~HttpFixture()
{
    impl_->server.stop();
    if (thread_.joinable()) thread_.join();
}

std::string HttpFixture::url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/"; }

// ---------------------------------------------------------------------------

LineFixture::LineFixture(std::string greeting, bool tls) : greeting_(std::move(greeting)), tls_(tls)
{
    if (tls_) ssl_ctx_ = make_server_ctx();
    listen_fd_ = listen_loopback(SOCK_STREAM, port_);
    thread_ = std::thread([this] { serve(); });
}

LineFixture::~LineFixture()
{
    stop_ = true;
    if (thread_.joinable()) thread_.join();
    ::close(listen_fd_);
    if (ssl_ctx_) SSL_CTX_free(static_cast<SSL_CTX*>(ssl_ctx_));
}

void LineFixture::serve()
{
    while (!stop_) {
        if (!wait_readable(listen_fd_, 50)) continue;
        int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
        if (fd < 0) continue;
        ++connections_;
        timeval tv{2, 0};
        ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
        ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
        if (tls_) {
            SSL* ssl = SSL_new(static_cast<SSL_CTX*>(ssl_ctx_));
            SSL_set_fd(ssl, fd);
            if (SSL_accept(ssl) == 1) {
                ++handshakes_;
                SSL_shutdown(ssl);
            }
            SSL_free(ssl);
            ERR_clear_error();
        } else {
            const std::string line = greeting_ + "\r\n";
            (void)::send(fd, line.data(), line.size(), MSG_NOSIGNAL);
        }
        ::close(fd);
    }
}

// ---------------------------------------------------------------------------

DnsFixture::DnsFixture()
{
    fd_ = listen_loopback(SOCK_DGRAM, port_);
    thread_ = std::thread([this] { serve(); });
}

DnsFixture::~DnsFixture()
{
    stop_ = true;
    if (thread_.joinable()) thread_.join();
    ::close(fd_);
}

void DnsFixture::serve()
{
    unsigned char buf[512];
    while (!stop_) {
        if (!wait_readable(fd_, 50)) continue;
        sockaddr_in peer{};
        socklen_t len = sizeof peer;
        auto n = ::recvfrom(fd_, buf, sizeof buf, 0, reinterpret_cast<sockaddr*>(&peer), &len);
        if (n < 12) continue;
        ++queries_;
        // Header and question copied back, one A record appended.
        std::string reply(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(n));
        reply[2] = static_cast<char>(0x81);
        reply[3] = static_cast<char>(0x80);
        reply[6] = 0;
        reply[7] = 1;
        reply[8] = reply[9] = reply[10] = reply[11] = 0;
        const unsigned char answer[] = {0xc0, 0x0c, 0, 1, 0, 1, 0, 0, 0, 60, 0, 4, 127, 0, 0, 1};
        reply.append(reinterpret_cast<const char*>(answer), sizeof answer);
        ::sendto(fd_, reply.data(), reply.size(), 0, reinterpret_cast<sockaddr*>(&peer), len);
    }
}

// ---------------------------------------------------------------------------

Endpoints LoopbackSet::endpoints() const
{
    Endpoints e;
    e.ping = {"127.0.0.1", http.port()};
    e.dns_name = "fixture.test";
    e.dns_resolver = Endpoint{"127.0.0.1", dns.port()};
    e.http_url = http.url();
    e.ftp = {"127.0.0.1", ftp.port()};
    e.ssh = {"127.0.0.1", ssh.port()};
    e.smtp = {"127.0.0.1", smtp.port()};
    e.messaging = {"127.0.0.1", messaging.port()};
    e.cloud_storage = {"127.0.0.1", cloud.port()};
    return e;
}

// ---------------------------------------------------------------------------

TempDir::TempDir(const std::string& prefix)
{
    std::string tmpl = (fs::temp_directory_path() / (prefix + "-XXXXXX")).string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
    fs::permissions(path_, fs::perms(0755));
}

TempDir::~TempDir()
{
    std::error_code ec;
    // Restore access below before removing; tests leave mode-000 directories.
    for (auto it = fs::recursive_directory_iterator(path_, fs::directory_options::skip_permission_denied, ec);
         !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
        if (it->is_directory(ec) && !it->is_symlink(ec)) fs::permissions(it->path(), fs::perms(0755), ec);
    }
    fs::remove_all(path_, ec);
}

// ---------------------------------------------------------------------------

int run_in_child(const std::function<int(int)>& fn, std::string& output)
{
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0) return -1;
    pid_t pid = ::fork();
    if (pid < 0) return -1;
    if (pid == 0) {
        ::close(fds[0]);
        int rc = 1;
        try {
            rc = fn(fds[1]);
        } catch (...) {
            rc = 120;
        }
        ::close(fds[1]);
        ::_exit(rc);
    }
    ::close(fds[1]);
    output.clear();
    char buf[4096];
    for (;;) {
        auto n = ::read(fds[0], buf, sizeof buf);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        output.append(buf, static_cast<std::size_t>(n));
    }
    ::close(fds[0]);
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return 128 + WTERMSIG(status);
}

bool become(uid_t uid, gid_t gid)
{
    return ::setgroups(0, nullptr) == 0 && ::setgid(gid) == 0 && ::setuid(uid) == 0;
}

}  // namespace sandboxeval::testing
