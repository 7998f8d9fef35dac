#include "sandboxeval/recon.hpp"

#include <dirent.h>
#include <fcntl.h>
#include <grp.h>
#include <ifaddrs.h>
#include <linux/if_packet.h>
#include <mntent.h>
#include <net/if.h>
#include <netdb.h>
#include <pwd.h>
#include <sys/statvfs.h>
#include <sys/sysinfo.h>
#include <sys/utsname.h>
#include <unistd.h>
#include <utmpx.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "sandboxeval/walk.hpp"

extern char** environ;

namespace sandboxeval {

namespace fs = std::filesystem;

namespace {

Evidence make_evidence(std::string kind) { return Evidence{std::move(kind), Json::object(), false, std::nullopt}; }

bool is_permission_errno(int err) { return err == EACCES || err == EPERM; }

std::optional<std::string> read_first_line(const fs::path& p, int* err = nullptr)
{
    std::ifstream in(p);
    if (!in) {
        if (err) *err = errno;
        return std::nullopt;
    }
    std::string line;
    std::getline(in, line);
    return line;
}

std::map<std::string, std::string> read_key_values(const fs::path& p, char sep)
{
    std::map<std::string, std::string> out;
    std::ifstream in(p);
    for (std::string line; std::getline(in, line);) {
        auto pos = line.find(sep);
        if (pos == std::string::npos) continue;
        auto key = line.substr(0, pos);
        auto value = line.substr(pos + 1);
        auto trim = [](std::string& s) {
            s.erase(0, s.find_first_not_of(" \t\""));
            auto last = s.find_last_not_of(" \t\"");
            s.erase(last == std::string::npos ? 0 : last + 1);
        };
        trim(key);
        trim(value);
        out[key] = value;
    }
    return out;
}

std::string user_name(uid_t uid)
{
    static std::unordered_map<uid_t, std::string> cache;
    if (auto it = cache.find(uid); it != cache.end()) return it->second;
    struct passwd pw {};
    struct passwd* result = nullptr;
    char buf[4096];
    std::string name = std::to_string(uid);
    if (::getpwuid_r(uid, &pw, buf, sizeof buf, &result) == 0 && result != nullptr) name = pw.pw_name;
    cache.emplace(uid, name);
    return name;
}

std::string group_name(gid_t gid)
{
    static std::unordered_map<gid_t, std::string> cache;
    if (auto it = cache.find(gid); it != cache.end()) return it->second;
    struct group gr {};
    struct group* result = nullptr;
    char buf[8192];
    std::string name = std::to_string(gid);
    if (::getgrgid_r(gid, &gr, buf, sizeof buf, &result) == 0 && result != nullptr) name = gr.gr_name;
    cache.emplace(gid, name);
    return name;
}

std::string iso_time(std::time_t t)
{
    std::tm tm {};
    ::gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// --- facets ----------------------------------------------------------------

Observation platform()
{
    auto ev = make_evidence("sysinfo.platform");
    struct utsname u {};
    if (::uname(&u) != 0) return Observation::denied(ev, std::string("uname: ") + std::strerror(errno));
    auto& p = ev.payload;
    p["system"] = u.sysname;
    p["node"] = u.nodename;
    p["release"] = u.release;
    p["version"] = u.version;
    p["machine"] = u.machine;
    auto os = read_key_values("/etc/os-release", '=');
    if (os.empty()) os = read_key_values("/usr/lib/os-release", '=');
    p["os_pretty_name"] = os.contains("PRETTY_NAME") ? os["PRETTY_NAME"] : "";
    p["os_id"] = os.contains("ID") ? os["ID"] : "";
    p["os_version_id"] = os.contains("VERSION_ID") ? os["VERSION_ID"] : "";
    return Observation::accessed(ev);
}

Observation cpu()
{
    auto ev = make_evidence("sysinfo.cpu");
    auto& p = ev.payload;
    p["logical_online"] = ::sysconf(_SC_NPROCESSORS_ONLN);
    p["logical_configured"] = ::sysconf(_SC_NPROCESSORS_CONF);
    {
        std::ifstream info("/proc/cpuinfo");
        for (std::string line; std::getline(info, line);) {
            if (line.rfind("model name", 0) == 0) {
                auto pos = line.find(':');
                if (pos != std::string::npos) p["model"] = line.substr(pos + 2);
                break;
            }
        }
    }
    if (auto stat = read_first_line("/proc/stat"); stat && stat->rfind("cpu ", 0) == 0) {
        std::istringstream is(stat->substr(4));
        const char* names[] = {"user", "nice", "system", "idle", "iowait", "irq", "softirq", "steal"};
        Json times = Json::object();
        for (const char* n : names) {
            long long v = 0;
            if (!(is >> v)) break;
            times[n] = v;
        }
        p["times_ticks"] = times;
    }
    double load[3] = {};
    if (::getloadavg(load, 3) == 3) p["load_average"] = {load[0], load[1], load[2]};
    return Observation::accessed(ev);
}

Observation memory()
{
    auto ev = make_evidence("sysinfo.memory");
    struct sysinfo si {};
    if (::sysinfo(&si) != 0) {
        int err = errno;
        return is_permission_errno(err) ? Observation::denied(ev, std::strerror(err))
                                        : Observation::unavailable(ev);
    }
    auto& p = ev.payload;
    const auto unit = static_cast<std::uint64_t>(si.mem_unit);
    p["total_bytes"] = si.totalram * unit;
    p["free_bytes"] = si.freeram * unit;
    p["shared_bytes"] = si.sharedram * unit;
    p["buffer_bytes"] = si.bufferram * unit;
    p["swap_total_bytes"] = si.totalswap * unit;
    p["swap_free_bytes"] = si.freeswap * unit;
    auto meminfo = read_key_values("/proc/meminfo", ':');
    if (auto it = meminfo.find("MemAvailable"); it != meminfo.end()) p["available"] = it->second;
    p["type"] = "physical";
    return Observation::accessed(ev);
}

Observation disk()
{
    auto ev = make_evidence("sysinfo.disk");
    Json partitions = Json::array();
    FILE* mounts = ::setmntent("/proc/self/mounts", "r");
    if (mounts != nullptr) {
        while (auto* m = ::getmntent(mounts)) {
            std::string type = m->mnt_type;
            std::string device = m->mnt_fsname;
            if (is_volatile_filesystem(type) || type == "devtmpfs" || type == "autofs" || type == "nsfs") continue;
            struct statvfs vfs {};
            if (::statvfs(m->mnt_dir, &vfs) != 0 || vfs.f_blocks == 0) continue;
            const std::uint64_t total = vfs.f_blocks * vfs.f_frsize;
            const std::uint64_t avail = vfs.f_bavail * vfs.f_frsize;
            const std::uint64_t freeb = vfs.f_bfree * vfs.f_frsize;
            partitions.push_back({{"device", device},
                                  {"mount_point", m->mnt_dir},
                                  {"type", type},
                                  {"total_bytes", total},
                                  {"free_bytes", avail},
                                  {"used_bytes", total - freeb},
                                  {"used_percent", total ? 100.0 * double(total - freeb) / double(total) : 0.0}});
        }
        ::endmntent(mounts);
    }
    if (partitions.empty()) {
        struct statvfs vfs {};
        if (::statvfs("/", &vfs) != 0) {
            int err = errno;
            return is_permission_errno(err) ? Observation::denied(ev, std::strerror(err))
                                            : Observation::unavailable(ev);
        }
        const std::uint64_t total = vfs.f_blocks * vfs.f_frsize;
        partitions.push_back({{"device", "/"},
                              {"mount_point", "/"},
                              {"type", filesystem_type("/")},
                              {"total_bytes", total},
                              {"free_bytes", vfs.f_bavail * vfs.f_frsize},
                              {"used_bytes", total - vfs.f_bfree * vfs.f_frsize},
                              {"used_percent", 0.0}});
    }
    ev.payload["partitions"] = partitions;
    return Observation::accessed(ev);
}

Observation network()
{
    auto ev = make_evidence("sysinfo.network");
    auto& p = ev.payload;
    char host[256] = {};
    if (::gethostname(host, sizeof host - 1) == 0) p["hostname"] = host;
    struct ifaddrs* addrs = nullptr;
    if (::getifaddrs(&addrs) != 0) {
        int err = errno;
        if (p.contains("hostname")) return Observation::accessed(ev, "interfaces unavailable");
        return is_permission_errno(err) ? Observation::denied(ev, std::strerror(err)) : Observation::unavailable(ev);
    }
    Json interfaces = Json::object();
    for (auto* a = addrs; a != nullptr; a = a->ifa_next) {
        auto& iface = interfaces[a->ifa_name];
        if (!iface.contains("addresses")) {
            iface["up"] = (a->ifa_flags & IFF_UP) != 0;
            iface["loopback"] = (a->ifa_flags & IFF_LOOPBACK) != 0;
            iface["addresses"] = Json::array();
        }
        if (a->ifa_addr == nullptr) continue;
        const int family = a->ifa_addr->sa_family;
        if (family == AF_INET || family == AF_INET6) {
            char buf[NI_MAXHOST] = {};
            socklen_t len = family == AF_INET ? sizeof(sockaddr_in) : sizeof(sockaddr_in6);
            if (::getnameinfo(a->ifa_addr, len, buf, sizeof buf, nullptr, 0, NI_NUMERICHOST) == 0)
                iface["addresses"].push_back(buf);
        } else if (family == AF_PACKET) {
            const auto* ll = reinterpret_cast<const sockaddr_ll*>(a->ifa_addr);
            char mac[32] = {};
            int off = 0;
            for (int i = 0; i < ll->sll_halen && i < 8; ++i)
                off += std::snprintf(mac + off, sizeof mac - off, i ? ":%02x" : "%02x", ll->sll_addr[i]);
            iface["hardware_address"] = mac;
        }
    }
    ::freeifaddrs(addrs);
    p["interfaces"] = interfaces;
    return Observation::accessed(ev);
}

Observation processes()
{
    auto ev = make_evidence("sysinfo.pid");
    DIR* d = ::opendir("/proc");
    if (d == nullptr) {
        int err = errno;
        return is_permission_errno(err) ? Observation::denied(ev, "/proc: " + std::string(std::strerror(err)))
                                        : Observation::unavailable(ev);
    }
    const uid_t self = ::getuid();
    Json list = Json::array();
    int own = 0, other = 0;
    while (auto* ent = ::readdir(d)) {
        const char* name = ent->d_name;
        if (!std::all_of(name, name + std::strlen(name), [](char c) { return c >= '0' && c <= '9'; })) continue;
        fs::path dir = fs::path("/proc") / name;
        struct stat st {};
        if (::stat(dir.c_str(), &st) != 0) continue;
        std::string comm = read_first_line(dir / "comm").value_or("?");
        uid_t uid = st.st_uid;
        auto status = read_key_values(dir / "status", ':');
        if (auto it = status.find("Uid"); it != status.end()) uid = static_cast<uid_t>(std::stoul(it->second));
        (uid == self ? own : other) += 1;
        list.push_back({{"pid", std::atoi(name)}, {"name", comm}, {"user", user_name(uid)}});
    }
    ::closedir(d);
    auto& p = ev.payload;
    p["visible_count"] = own + other;
    p["own_count"] = own;
    p["other_user_count"] = other;
    p["processes"] = list;
    if (own + other == 0) return Observation::unavailable(ev, "source unavailable: process table empty");
    if (other == 0) return Observation::denied(ev, "only the caller's own processes are visible");
    return Observation::accessed(ev);
}

Observation sensors()
{
    auto ev = make_evidence("sysinfo.sensor");
    Json readings = Json::array();
    int sources = 0;
    int denied = 0;
    auto sample = [&](const fs::path& file, const std::string& kind) {
        ++sources;
        int err = 0;
        auto v = read_first_line(file, &err);
        if (!v) {
            if (is_permission_errno(err)) ++denied;
            return;
        }
        readings.push_back({{"source", file.string()}, {"kind", kind}, {"value", *v}});
    };
    std::error_code ec;
    for (const auto& dir : {fs::path("/sys/class/hwmon"), fs::path("/sys/class/thermal"),
                            fs::path("/sys/class/power_supply")}) {
        for (auto it = fs::directory_iterator(dir, ec); !ec && it != fs::directory_iterator(); it.increment(ec)) {
            for (auto f = fs::directory_iterator(it->path(), ec); !ec && f != fs::directory_iterator();
                 f.increment(ec)) {
                auto name = f->path().filename().string();
                if (name.rfind("temp", 0) == 0 && name.find("_input") != std::string::npos) sample(f->path(), "temperature");
                else if (name.rfind("fan", 0) == 0 && name.find("_input") != std::string::npos) sample(f->path(), "fan");
                else if (name == "temp") sample(f->path(), "temperature");
                else if (name == "capacity") sample(f->path(), "battery_capacity");
                else if (name == "status" && dir.filename() == "power_supply") sample(f->path(), "battery_status");
            }
            ec.clear();
        }
        ec.clear();
    }
    ev.payload["source_count"] = sources;
    ev.payload["readings"] = readings;
    if (!readings.empty()) return Observation::accessed(ev);
    if (denied > 0) return Observation::denied(ev, "sensor interfaces present but unreadable");
    return Observation::unavailable(ev);
}

Observation users()
{
    auto ev = make_evidence("sysinfo.user");
    Json accounts = Json::array();
    ::setpwent();
    while (auto* pw = ::getpwent())
        accounts.push_back({{"name", pw->pw_name},
                            {"uid", pw->pw_uid},
                            {"gid", pw->pw_gid},
                            {"home", pw->pw_dir},
                            {"shell", pw->pw_shell}});
    ::endpwent();

    const std::string self = user_name(::getuid());
    Json sessions = Json::array();
    int foreign = 0;
    ::setutxent();
    while (auto* u = ::getutxent()) {
        if (u->ut_type != USER_PROCESS) continue;
        std::string name(u->ut_user, strnlen(u->ut_user, sizeof u->ut_user));
        std::string line(u->ut_line, strnlen(u->ut_line, sizeof u->ut_line));
        if (name != self) ++foreign;
        sessions.push_back({{"user", name}, {"line", line}, {"pid", u->ut_pid}});
    }
    ::endutxent();

    int fd = ::open("/etc/shadow", O_RDONLY | O_CLOEXEC);
    const bool shadow_readable = fd >= 0;
    if (fd >= 0) ::close(fd);

    auto& p = ev.payload;
    p["account_count"] = accounts.size();
    p["accounts"] = accounts;
    p["sessions"] = sessions;
    p["foreign_session_count"] = foreign;
    p["shadow_readable"] = shadow_readable;
    if (shadow_readable || foreign > 0) return Observation::accessed(ev);
    return Observation::denied(ev, "no protected account details or other users' sessions visible");
}

Observation environment()
{
    auto ev = make_evidence("sysinfo.environment");
    std::map<std::string, std::string> vars;
    for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
        std::string_view entry(*e);
        auto eq = entry.find('=');
        if (eq == std::string_view::npos) continue;
        vars[std::string(entry.substr(0, eq))] = std::string(entry.substr(eq + 1));
    }
    Json v = Json::object();
    for (const auto& [k, val] : vars) v[k] = val;
    ev.payload["count"] = vars.size();
    ev.payload["variables"] = v;
    if (vars.empty()) return Observation::unavailable(ev, "source unavailable: empty environment");
    return Observation::accessed(ev);
}

Observation locale()
{
    auto ev = make_evidence("sysinfo.locale");
    auto& p = ev.payload;
    std::string tz;
    std::string source;
    if (const char* env = std::getenv("TZ"); env != nullptr && *env != '\0') {
        tz = *env == ':' ? env + 1 : env;
        source = "TZ";
    } else if (auto line = read_first_line("/etc/timezone"); line && !line->empty()) {
        tz = *line;
        source = "/etc/timezone";
    } else {
        std::error_code ec;
        auto target = fs::read_symlink("/etc/localtime", ec);
        if (!ec) {
            auto s = target.string();
            auto pos = s.find("zoneinfo/");
            tz = pos == std::string::npos ? s : s.substr(pos + 9);
            source = "/etc/localtime";
        }
    }
    ::tzset();
    if (tz.empty()) {
        tz = ::tzname[0];
        source = "tzname";
    }
    p["timezone"] = tz;
    p["timezone_source"] = source;
    p["tzname"] = {::tzname[0], ::tzname[1]};
    std::time_t now = std::time(nullptr);
    std::tm local {};
    ::localtime_r(&now, &local);
    p["utc_offset_seconds"] = local.tm_gmtoff;
    auto env_or = [](const char* name) {
        const char* v = std::getenv(name);
        return std::string(v ? v : "");
    };
    p["lc_all"] = env_or("LC_ALL");
    p["lc_ctype"] = env_or("LC_CTYPE");
    p["lang"] = env_or("LANG");
    std::string effective = "C";
    for (const char* n : {"LC_ALL", "LC_CTYPE", "LANG"})
        if (auto v = env_or(n); !v.empty()) {
            effective = v;
            break;
        }
    p["effective_locale"] = effective;
    return Observation::accessed(ev);
}

}  // namespace

std::string permission_triplet(unsigned bits)
{
    std::string s = "---";
    if (bits & 4) s[0] = 'r';
    if (bits & 2) s[1] = 'w';
    if (bits & 1) s[2] = 'x';
    return s;
}

Observation probe_system(SystemFacet facet)
{
    switch (facet) {
    case SystemFacet::Platform: return platform();
    case SystemFacet::Cpu: return cpu();
    case SystemFacet::Memory: return memory();
    case SystemFacet::Disk: return disk();
    case SystemFacet::Network: return network();
    case SystemFacet::Pid: return processes();
    case SystemFacet::Sensor: return sensors();
    case SystemFacet::User: return users();
    case SystemFacet::Environment: return environment();
    case SystemFacet::Locale: break;
    }
    return locale();
}

std::optional<fs::path> resolve_scope(DirScope scope, const std::optional<fs::path>& working)
{
    fs::path cwd;
    if (working) {
        cwd = fs::absolute(*working).lexically_normal();
    } else {
        std::error_code ec;
        cwd = fs::current_path(ec);
        if (ec) return std::nullopt;
    }
    switch (scope) {
    case DirScope::Working: return cwd;
    case DirScope::Parent: return cwd.has_relative_path() ? cwd.parent_path() : cwd;
    case DirScope::Root: break;
    }
    return cwd.root_path();
}

Observation enumerate_directory(const fs::path& root, int max_depth, int max_listed)
{
    auto ev = make_evidence("directory");
    auto& p = ev.payload;
    p["root"] = root.string();
    p["max_depth"] = max_depth;
    p["follows_symlinks"] = false;
    Json entries = Json::array();
    WalkStats stats;
    int listed = 0;
    int rc = walk_tree(root, max_depth, [&](const WalkEntry& e) {
        if (listed < max_listed) {
            entries.push_back(e.path.string());
            ++listed;
        }
    }, stats);
    if (rc != 0) {
        p["error"] = std::strerror(rc);
        if (is_permission_errno(rc)) return Observation::denied(ev, root.string() + ": " + std::strerror(rc));
        return Observation::unavailable(ev, root.string() + ": " + std::strerror(rc));
    }
    p["root_filesystem"] = filesystem_type(root);
    p["entry_count"] = stats.entries;
    p["file_count"] = stats.files;
    p["directory_count"] = stats.directories;
    p["skipped_count"] = stats.skipped;
    p["listed_truncated"] = stats.entries > static_cast<std::size_t>(listed);
    Json mounts = Json::object();
    for (const auto& [path, type] : stats.mounts) mounts[path] = type;
    p["mounts"] = mounts;
    p["entries"] = entries;
    return Observation::accessed(ev);
}

Observation probe_directory(DirScope scope, bool enumerate, int max_depth, int max_listed,
                            const std::optional<fs::path>& working)
{
    auto dir = resolve_scope(scope, working);
    if (!dir) {
        auto ev = make_evidence("directory");
        return Observation::denied(ev, "working directory cannot be resolved");
    }
    if (!enumerate) {
        auto ev = make_evidence("directory");
        ev.payload["path"] = dir->string();
        struct stat st {};
        if (::stat(dir->c_str(), &st) != 0) {
            int err = errno;
            ev.payload["error"] = std::strerror(err);
            return is_permission_errno(err) ? Observation::denied(ev, std::strerror(err))
                                            : Observation::unavailable(ev, std::strerror(err));
        }
        return Observation::accessed(ev);
    }
    return enumerate_directory(*dir, max_depth, max_listed);
}

Observation probe_metadata(MetadataKind kind, const fs::path& root, int max_depth, int max_listed)
{
    const char* kinds[] = {"meta.ownership", "meta.permission", "meta.attributes"};
    auto ev = make_evidence(kinds[static_cast<int>(kind)]);
    Json entries = Json::array();
    int listed = 0;
    WalkStats stats;
    int rc = walk_tree(root, max_depth, [&](const WalkEntry& e) {
        if (listed >= max_listed) return;
        ++listed;
        Json row;
        row["path"] = e.path.string();
        switch (kind) {
        case MetadataKind::Ownership:
            row["owner"] = user_name(e.st.st_uid);
            row["group"] = group_name(e.st.st_gid);
            break;
        case MetadataKind::Permission: {
            char mode[8];
            std::snprintf(mode, sizeof mode, "%04o", static_cast<unsigned>(e.st.st_mode & 07777));
            row["mode"] = mode;
            row["user"] = permission_triplet((e.st.st_mode >> 6) & 7);
            row["group"] = permission_triplet((e.st.st_mode >> 3) & 7);
            row["other"] = permission_triplet(e.st.st_mode & 7);
            break;
        }
        case MetadataKind::Attributes:
            row["size"] = static_cast<std::int64_t>(e.st.st_size);
            row["change_time"] = iso_time(e.st.st_ctime);
            row["modify_time"] = iso_time(e.st.st_mtime);
            break;
        }
        entries.push_back(std::move(row));
    }, stats);
    auto& p = ev.payload;
    p["root"] = root.string();
    if (rc != 0) {
        p["error"] = std::strerror(rc);
        if (is_permission_errno(rc)) return Observation::denied(ev, root.string() + ": " + std::strerror(rc));
        return Observation::unavailable(ev, root.string() + ": " + std::strerror(rc));
    }
    p["entry_count"] = stats.entries;
    p["skipped_count"] = stats.skipped;
    p["listed_truncated"] = stats.entries > static_cast<std::size_t>(listed);
    p["entries"] = entries;
    return Observation::accessed(ev);
}

}  // namespace sandboxeval
