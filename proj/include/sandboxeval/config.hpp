#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sandboxeval/model.hpp"

namespace sandboxeval {

/// Resource budget for proxy operations. Values are clamped to the
/// build-time ceilings below; configuration can lower but never raise them.
struct Budget {
    static constexpr double kMaxCpuSeconds = 10.0;
    static constexpr std::uint64_t kMaxBytes = 16ull << 20;
    static constexpr int kMaxRequests = 50;
    static constexpr double kMaxTimeoutSeconds = 30.0;

    double cpu_seconds = 2.0;
    std::uint64_t max_bytes = 1ull << 20;
    int max_requests = 5;
    double timeout_seconds = 3.0;

    /// Throws ConfigError on non-positive values; clamps to the ceilings.
    Budget bounded() const;

    friend bool operator==(const Budget&, const Budget&) = default;
};

struct Endpoint {
    std::string host;
    std::uint16_t port = 0;

    /// "host:port" or "[v6]:port". Throws ConfigError when malformed.
    static Endpoint parse(std::string_view text);
    std::string str() const;

    friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

struct Url {
    std::string scheme;  // "http" or "https"
    std::string host;
    std::uint16_t port = 0;
    std::string path = "/";

    /// Throws ConfigError when malformed or not http(s).
    static Url parse(std::string_view text);
    std::string str() const;
};

/// Targets for the communication and congestion probes. Defaults point at
/// documentation-reserved names.
struct Endpoints {
    Endpoint ping{"example.com", 443};  // port used by the transport fallback
    std::string dns_name = "example.com";
    std::optional<Endpoint> dns_resolver;  // nullopt: first resolver in /etc/resolv.conf
    std::string http_url = "http://example.com/";
    Endpoint ftp{"example.com", 21};
    Endpoint ssh{"example.com", 22};
    Endpoint smtp{"example.com", 25};
    Endpoint messaging{"api.twilio.com", 443};
    Endpoint cloud_storage{"storage.googleapis.com", 443};
    std::optional<std::string> congestion_url;  // nullopt: http_url

    void validate() const;
    friend bool operator==(const Endpoints&, const Endpoints&) = default;
};

enum class Isolation { InProcess, Subprocess };

std::string_view to_string(Isolation i);
std::optional<Isolation> parse_isolation(std::string_view s);

struct Selection {
    std::set<std::string> probes;         // empty: no id restriction
    std::set<Category> categories;        // empty: no category restriction
    std::optional<ExecutionMode> mode;    // default-mode filter

    friend bool operator==(const Selection&, const Selection&) = default;
};

std::vector<std::filesystem::path> default_critical_paths();
std::vector<std::filesystem::path> default_content_roots();

struct RunConfig {
    Selection selection;
    std::map<std::string, ExecutionMode> mode_overrides;
    std::filesystem::path scratch_root;
    double per_probe_timeout = 30.0;
    Budget budget;
    Endpoints endpoints;
    std::vector<std::filesystem::path> critical_paths = default_critical_paths();
    std::vector<std::filesystem::path> content_roots = default_content_roots();
    std::vector<std::filesystem::path> read_exemplars{"/etc/passwd", "/etc/hostname", "/etc/shadow"};
    std::vector<std::filesystem::path> execute_exemplars{"/bin/sh", "/usr/bin/env"};
    std::filesystem::path metadata_root = "/";
    std::vector<std::filesystem::path> sentinel_roots;  // empty: critical paths plus working directory
    std::vector<std::filesystem::path> sentinel_exclude;  // subtrees other processes write to during a run
    int max_depth = 10;
    int max_listed = 10000;  // paths kept per listing; counts stay exact
    RedactLevel redact = RedactLevel::Standard;
    Isolation isolation = Isolation::Subprocess;
    int jobs = 1;  // concurrent non-exclusive probes

    /// Checks ranges, endpoints and scratch/critical-path disjointness.
    /// Throws ConfigError.
    void validate() const;

    /// Scratch root, canonicalised where possible.
    std::filesystem::path canonical_scratch() const;

    std::vector<std::filesystem::path> effective_sentinel_roots() const;

    /// Effective mode for a probe after overrides.
    ExecutionMode mode_for(const ProbeSpec& spec) const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

inline constexpr std::string_view kConfigSchema = "sandboxeval-config/1";

Json config_to_json(const RunConfig& c);

/// Missing fields keep their defaults. Throws ConfigError.
RunConfig config_from_json(const Json& j);

/// sha256 of the canonical (key-sorted, compact) configuration document.
std::string config_digest(const RunConfig& c);

}  // namespace sandboxeval
