#include "sandboxeval/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "sandboxeval/digest.hpp"
#include "sandboxeval/registry.hpp"

namespace sandboxeval {

namespace fs = std::filesystem;

Budget Budget::bounded() const
{
    if (!(cpu_seconds > 0) || max_bytes == 0 || max_requests <= 0 || !(timeout_seconds > 0))
        throw ConfigError("budget values must be positive");
    Budget b = *this;
    b.cpu_seconds = std::min(cpu_seconds, kMaxCpuSeconds);
    b.max_bytes = std::min(max_bytes, kMaxBytes);
    b.max_requests = std::min(max_requests, kMaxRequests);
    b.timeout_seconds = std::min(timeout_seconds, kMaxTimeoutSeconds);
    return b;
}

namespace {

std::uint16_t parse_port(std::string_view s, std::string_view whole)
{
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size() || value == 0 || value > 65535)
        throw ConfigError("malformed endpoint '" + std::string(whole) + "': bad port");
    return static_cast<std::uint16_t>(value);
}

bool valid_host(std::string_view h)
{
    if (h.empty() || h.size() > 253) return false;
    return std::all_of(h.begin(), h.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == ':' || c == '_';
    });
}

}  // namespace

Endpoint Endpoint::parse(std::string_view text)
{
    Endpoint e;
    std::string_view host, port;
    if (!text.empty() && text.front() == '[') {
        auto close = text.find(']');
        if (close == std::string_view::npos || close + 1 >= text.size() || text[close + 1] != ':')
            throw ConfigError("malformed endpoint '" + std::string(text) + "'");
        host = text.substr(1, close - 1);
        port = text.substr(close + 2);
    } else {
        auto colon = text.rfind(':');
        if (colon == std::string_view::npos) throw ConfigError("malformed endpoint '" + std::string(text) + "': no port");
        host = text.substr(0, colon);
        port = text.substr(colon + 1);
        if (host.find(':') != std::string_view::npos)
            throw ConfigError("malformed endpoint '" + std::string(text) + "': bracket IPv6 literals");
    }
    if (!valid_host(host)) throw ConfigError("malformed endpoint '" + std::string(text) + "': bad host");
    e.host = std::string(host);
    e.port = parse_port(port, text);
    return e;
}

std::string Endpoint::str() const
{
    if (host.find(':') != std::string::npos) return "[" + host + "]:" + std::to_string(port);
    return host + ":" + std::to_string(port);
}

Url Url::parse(std::string_view text)
{
    Url u;
    auto sep = text.find("://");
    if (sep == std::string_view::npos) throw ConfigError("malformed url '" + std::string(text) + "'");
    u.scheme = std::string(text.substr(0, sep));
    if (u.scheme != "http" && u.scheme != "https")
        throw ConfigError("unsupported url scheme in '" + std::string(text) + "'");
    auto rest = text.substr(sep + 3);
    const auto slash = static_cast<std::size_t>(std::find(rest.begin(), rest.end(), '/') - rest.begin());
    auto authority = rest.substr(0, slash);
    u.path = slash == rest.size() ? "/" : std::string(rest.substr(slash));
    if (authority.find('@') != std::string_view::npos)
        throw ConfigError("credentials are not allowed in url '" + std::string(text) + "'");
    std::uint16_t default_port = u.scheme == "https" ? 443 : 80;
    if (!authority.empty() && authority.front() == '[') {
        auto close = authority.find(']');
        if (close == std::string_view::npos) throw ConfigError("malformed url '" + std::string(text) + "'");
        u.host = std::string(authority.substr(1, close - 1));
        auto tail = authority.substr(close + 1);
        u.port = tail.empty() ? default_port : parse_port(tail.substr(1), text);
    } else {
        auto colon = authority.find(':');
        u.host = std::string(authority.substr(0, colon));
        u.port = colon == std::string_view::npos ? default_port : parse_port(authority.substr(colon + 1), text);
    }
    if (!valid_host(u.host)) throw ConfigError("malformed url '" + std::string(text) + "': bad host");
    return u;
}

std::string Url::str() const
{
    std::string host_part = host.find(':') != std::string::npos ? "[" + host + "]" : host;
    return scheme + "://" + host_part + ":" + std::to_string(port) + path;
}

void Endpoints::validate() const
{
    for (const auto* e : {&ping, &ftp, &ssh, &smtp, &messaging, &cloud_storage})
        if (!valid_host(e->host) || e->port == 0) throw ConfigError("malformed endpoint '" + e->str() + "'");
    if (dns_resolver && (!valid_host(dns_resolver->host) || dns_resolver->port == 0))
        throw ConfigError("malformed resolver endpoint '" + dns_resolver->str() + "'");
    if (!valid_host(dns_name)) throw ConfigError("malformed dns name '" + dns_name + "'");
    Url::parse(http_url);
    if (congestion_url) Url::parse(*congestion_url);
}

std::string_view to_string(Isolation i) { return i == Isolation::InProcess ? "in-process" : "subprocess"; }

std::optional<Isolation> parse_isolation(std::string_view s)
{
    if (s == "in-process" || s == "in_process") return Isolation::InProcess;
    if (s == "subprocess") return Isolation::Subprocess;
    return std::nullopt;
}

std::vector<fs::path> default_critical_paths()
{
    return {"/etc/passwd", "/etc/shadow", "/root", "/usr/bin", "/boot", "/var/log"};
}

std::vector<fs::path> default_content_roots()
{
    return {"/usr", "/sys", "/opt", "/lib", "/lib64", "/proc", "/tmp"};
}

namespace {

fs::path best_canonical(const fs::path& p)
{
    std::error_code ec;
    auto c = fs::weakly_canonical(p, ec);
    return ec ? p.lexically_normal() : c;
}

bool is_within(const fs::path& inner, const fs::path& outer)
{
    auto i = inner.begin();
    for (auto o = outer.begin(); o != outer.end(); ++o, ++i) {
        if (o->empty()) continue;
        if (i == inner.end() || *i != *o) return false;
    }
    return true;
}

}  // namespace

fs::path RunConfig::canonical_scratch() const { return best_canonical(scratch_root); }

void RunConfig::validate() const
{
    if (per_probe_timeout < 1.0) throw ConfigError("per-probe timeout must be at least 1 second");
    if (max_depth < 1) throw ConfigError("max depth must be a positive integer");
    if (max_listed < 1) throw ConfigError("max listed must be a positive integer");
    if (jobs < 1) throw ConfigError("jobs must be a positive integer");
    (void)budget.bounded();
    endpoints.validate();
    if (scratch_root.empty()) throw ConfigError("scratch root is not set");
    const auto scratch = canonical_scratch();
    if (scratch == scratch.root_path()) throw ConfigError("scratch root must not be the filesystem root");
    for (const auto& critical : critical_paths) {
        auto c = best_canonical(critical);
        if (is_within(c, scratch) || is_within(scratch, c))
            throw ConfigError("scratch root " + scratch.string() + " overlaps critical path " + c.string());
    }
    const auto& registry = all_probes();
    for (const auto& id : selection.probes)
        if (registry.find(id) == nullptr) throw ConfigError("unknown probe id '" + id + "'");
    for (const auto& [id, mode] : mode_overrides)
        if (registry.find(id) == nullptr) throw ConfigError("mode override for unknown probe id '" + id + "'");
}

std::vector<fs::path> RunConfig::effective_sentinel_roots() const
{
    if (!sentinel_roots.empty()) return sentinel_roots;
    auto roots = critical_paths;
    std::error_code ec;
    auto cwd = fs::current_path(ec);
    if (!ec) roots.push_back(cwd);
    return roots;
}

ExecutionMode RunConfig::mode_for(const ProbeSpec& spec) const
{
    if (auto it = mode_overrides.find(spec.id.str()); it != mode_overrides.end()) return it->second;
    return spec.default_mode;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace {

Json paths_to_json(const std::vector<fs::path>& v)
{
    Json a = Json::array();
    for (const auto& p : v) a.push_back(p.string());
    return a;
}

std::vector<fs::path> paths_from_json(const Json& j, const char* field)
{
    if (!j.is_array()) throw ConfigError(std::string("config field '") + field + "' must be an array of paths");
    std::vector<fs::path> out;
    for (const auto& e : j) {
        if (!e.is_string()) throw ConfigError(std::string("config field '") + field + "' must hold strings");
        out.emplace_back(e.get<std::string>());
    }
    return out;
}

template <typename T>
T get_number(const Json& j, const char* field)
{
    if (!j.is_number()) throw ConfigError(std::string("config field '") + field + "' must be a number");
    return j.get<T>();
}

std::string get_string(const Json& j, const char* field)
{
    if (!j.is_string()) throw ConfigError(std::string("config field '") + field + "' must be a string");
    return j.get<std::string>();
}

}  // namespace

Json config_to_json(const RunConfig& c)
{
    Json j;
    j["schema"] = kConfigSchema;
    Json sel;
    sel["probes"] = Json::array();
    for (const auto& p : c.selection.probes) sel["probes"].push_back(p);
    sel["categories"] = Json::array();
    for (auto cat : c.selection.categories) sel["categories"].push_back(to_string(cat));
    sel["mode"] = c.selection.mode ? Json(to_string(*c.selection.mode)) : Json(nullptr);
    j["selection"] = sel;
    Json overrides = Json::object();
    for (const auto& [id, mode] : c.mode_overrides) overrides[id] = to_string(mode);
    j["mode_overrides"] = overrides;
    j["scratch_root"] = c.scratch_root.string();
    j["per_probe_timeout"] = c.per_probe_timeout;
    j["budget"] = {{"cpu_seconds", c.budget.cpu_seconds},
                   {"max_bytes", c.budget.max_bytes},
                   {"max_requests", c.budget.max_requests},
                   {"timeout", c.budget.timeout_seconds}};
    const auto& e = c.endpoints;
    j["endpoints"] = {{"ping", e.ping.str()},
                      {"dns_name", e.dns_name},
                      {"dns_resolver", e.dns_resolver ? Json(e.dns_resolver->str()) : Json("system")},
                      {"http_url", e.http_url},
                      {"ftp", e.ftp.str()},
                      {"ssh", e.ssh.str()},
                      {"smtp", e.smtp.str()},
                      {"messaging", e.messaging.str()},
                      {"cloud_storage", e.cloud_storage.str()},
                      {"congestion_url", e.congestion_url ? Json(*e.congestion_url) : Json(nullptr)}};
    j["critical_paths"] = paths_to_json(c.critical_paths);
    j["content_roots"] = paths_to_json(c.content_roots);
    j["read_exemplars"] = paths_to_json(c.read_exemplars);
    j["execute_exemplars"] = paths_to_json(c.execute_exemplars);
    j["metadata_root"] = c.metadata_root.string();
    j["sentinel_roots"] = paths_to_json(c.sentinel_roots);
    j["sentinel_exclude"] = paths_to_json(c.sentinel_exclude);
    j["max_depth"] = c.max_depth;
    j["max_listed"] = c.max_listed;
    j["redact"] = to_string(c.redact);
    j["isolation"] = to_string(c.isolation);
    j["jobs"] = c.jobs;
    return j;
}

RunConfig config_from_json(const Json& j)
{
    if (!j.is_object()) throw ConfigError("configuration document must be a JSON object");
    RunConfig c;
    if (auto it = j.find("schema"); it != j.end() && *it != kConfigSchema)
        throw ConfigError("unsupported configuration schema '" + it->dump() + "', expected '" +
                          std::string(kConfigSchema) + "'");
    try {
        if (auto it = j.find("selection"); it != j.end()) {
            const auto& sel = *it;
            if (sel.contains("probes"))
                for (const auto& p : sel.at("probes")) c.selection.probes.insert(get_string(p, "selection.probes"));
            if (sel.contains("categories"))
                for (const auto& s : sel.at("categories")) {
                    auto cat = parse_category(get_string(s, "selection.categories"));
                    if (!cat) throw ConfigError("unknown category " + s.dump());
                    c.selection.categories.insert(*cat);
                }
            if (sel.contains("mode") && !sel.at("mode").is_null()) {
                auto m = parse_mode(get_string(sel.at("mode"), "selection.mode"));
                if (!m) throw ConfigError("unknown mode " + sel.at("mode").dump());
                c.selection.mode = m;
            }
        }
        if (auto it = j.find("mode_overrides"); it != j.end())
            for (const auto& [id, mode] : it->items()) {
                auto m = parse_mode(get_string(mode, "mode_overrides"));
                if (!m) throw ConfigError("unknown mode " + mode.dump() + " for " + id);
                c.mode_overrides[id] = *m;
            }
        if (auto it = j.find("scratch_root"); it != j.end()) c.scratch_root = get_string(*it, "scratch_root");
        if (auto it = j.find("per_probe_timeout"); it != j.end())
            c.per_probe_timeout = get_number<double>(*it, "per_probe_timeout");
        if (auto it = j.find("budget"); it != j.end()) {
            const auto& b = *it;
            if (b.contains("cpu_seconds")) c.budget.cpu_seconds = get_number<double>(b.at("cpu_seconds"), "budget.cpu_seconds");
            if (b.contains("max_bytes")) c.budget.max_bytes = get_number<std::uint64_t>(b.at("max_bytes"), "budget.max_bytes");
            if (b.contains("max_requests")) c.budget.max_requests = get_number<int>(b.at("max_requests"), "budget.max_requests");
            if (b.contains("timeout")) c.budget.timeout_seconds = get_number<double>(b.at("timeout"), "budget.timeout");
            c.budget = c.budget.bounded();
        }
        if (auto it = j.find("endpoints"); it != j.end()) {
            const auto& e = *it;
            auto& t = c.endpoints;
            if (e.contains("ping")) t.ping = Endpoint::parse(get_string(e.at("ping"), "endpoints.ping"));
            if (e.contains("dns_name")) t.dns_name = get_string(e.at("dns_name"), "endpoints.dns_name");
            if (e.contains("dns_resolver")) {
                auto r = get_string(e.at("dns_resolver"), "endpoints.dns_resolver");
                t.dns_resolver = r == "system" ? std::nullopt : std::optional(Endpoint::parse(r));
            }
            if (e.contains("http_url")) t.http_url = get_string(e.at("http_url"), "endpoints.http_url");
            if (e.contains("ftp")) t.ftp = Endpoint::parse(get_string(e.at("ftp"), "endpoints.ftp"));
            if (e.contains("ssh")) t.ssh = Endpoint::parse(get_string(e.at("ssh"), "endpoints.ssh"));
            if (e.contains("smtp")) t.smtp = Endpoint::parse(get_string(e.at("smtp"), "endpoints.smtp"));
            if (e.contains("messaging")) t.messaging = Endpoint::parse(get_string(e.at("messaging"), "endpoints.messaging"));
            if (e.contains("cloud_storage"))
                t.cloud_storage = Endpoint::parse(get_string(e.at("cloud_storage"), "endpoints.cloud_storage"));
            if (e.contains("congestion_url") && !e.at("congestion_url").is_null())
                t.congestion_url = get_string(e.at("congestion_url"), "endpoints.congestion_url");
            t.validate();
        }
        if (auto it = j.find("critical_paths"); it != j.end()) c.critical_paths = paths_from_json(*it, "critical_paths");
        if (auto it = j.find("content_roots"); it != j.end()) c.content_roots = paths_from_json(*it, "content_roots");
        if (auto it = j.find("read_exemplars"); it != j.end()) c.read_exemplars = paths_from_json(*it, "read_exemplars");
        if (auto it = j.find("execute_exemplars"); it != j.end())
            c.execute_exemplars = paths_from_json(*it, "execute_exemplars");
        if (auto it = j.find("metadata_root"); it != j.end()) c.metadata_root = get_string(*it, "metadata_root");
        if (auto it = j.find("sentinel_roots"); it != j.end()) c.sentinel_roots = paths_from_json(*it, "sentinel_roots");
        if (auto it = j.find("sentinel_exclude"); it != j.end())
            c.sentinel_exclude = paths_from_json(*it, "sentinel_exclude");
        if (auto it = j.find("max_depth"); it != j.end()) c.max_depth = get_number<int>(*it, "max_depth");
        if (auto it = j.find("max_listed"); it != j.end()) c.max_listed = get_number<int>(*it, "max_listed");
        if (auto it = j.find("redact"); it != j.end()) {
            auto r = parse_redact(get_string(*it, "redact"));
            if (!r) throw ConfigError("unknown redact level " + it->dump());
            c.redact = *r;
        }
        if (auto it = j.find("isolation"); it != j.end()) {
            auto i = parse_isolation(get_string(*it, "isolation"));
            if (!i) throw ConfigError("unknown isolation " + it->dump());
            c.isolation = *i;
        }
        if (auto it = j.find("jobs"); it != j.end()) c.jobs = get_number<int>(*it, "jobs");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("configuration: ") + e.what());
    }
    return c;
}

std::string config_digest(const RunConfig& c)
{
    // nlohmann::json (unordered variant) sorts keys, which makes the dump canonical.
    nlohmann::json canonical = nlohmann::json::parse(config_to_json(c).dump());
    return "sha256:" + sha256_hex(canonical.dump());
}

}  // namespace sandboxeval
