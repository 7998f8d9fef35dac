#include "sandboxeval/sentinel.hpp"

#include <dirent.h>
#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstring>

#include "sandboxeval/digest.hpp"
#include "sandboxeval/walk.hpp"

namespace sandboxeval {

namespace fs = std::filesystem;

namespace {

struct Entry {
    std::string path;
    struct stat st;
};

struct Collected {
    std::vector<Entry> entries;
    std::vector<SkippedRoot> skipped;
    std::vector<std::string> excluded;
};

fs::path canonical_or_self(const fs::path& p)
{
    std::error_code ec;
    auto c = fs::weakly_canonical(p, ec);
    return ec ? p.lexically_normal() : c;
}

class Collector {
public:
    Collector(const SentinelOptions& opts, Collected& out) : opts_(opts), out_(out)
    {
        for (const auto& e : opts.exclude) exclude_.push_back(canonical_or_self(e).string());
    }

    void root(const fs::path& r)
    {
        struct stat st {};
        if (::stat(r.c_str(), &st) != 0) {
            out_.skipped.push_back({r.string(), std::strerror(errno)});
            return;
        }
        auto canon = canonical_or_self(r).string();
        if (is_excluded(canon)) {
            out_.excluded.push_back(r.string());
            return;
        }
        if (S_ISDIR(st.st_mode)) {
            auto type = filesystem_type(r);
            if (is_volatile_filesystem(type)) {
                out_.skipped.push_back({r.string(), "volatile filesystem " + type});
                return;
            }
            DIR* d = ::opendir(r.c_str());
            if (d == nullptr) {
                out_.skipped.push_back({r.string(), std::strerror(errno)});
                return;
            }
            ::closedir(d);
        }
        out_.entries.push_back({r.string(), st});
        if (S_ISDIR(st.st_mode)) descend(r.string(), canon, st.st_dev, 0);
    }

private:
    bool is_excluded(const std::string& canon) const
    {
        return std::find(exclude_.begin(), exclude_.end(), canon) != exclude_.end();
    }

    // `shown` is the path as reached from the root; `canon` its resolved
    // form, used only to match exclusions.
    void descend(const std::string& shown, const std::string& canon, dev_t dev, int depth)
    {
        if (depth >= opts_.max_depth) return;
        DIR* d = ::opendir(shown.c_str());
        if (d == nullptr) return;  // recorded as an entry already; its listing is simply absent
        std::vector<std::string> names;
        while (auto* ent = ::readdir(d))
            if (std::strcmp(ent->d_name, ".") != 0 && std::strcmp(ent->d_name, "..") != 0) names.emplace_back(ent->d_name);
        const int dfd = ::dirfd(d);
        std::vector<std::pair<Entry, std::string>> subdirs;
        for (const auto& name : names) {
            Entry e{shown + "/" + name, {}};
            if (::fstatat(dfd, name.c_str(), &e.st, AT_SYMLINK_NOFOLLOW) != 0) continue;
            std::string child_canon = canon + "/" + name;
            if (S_ISDIR(e.st.st_mode)) {
                if (is_excluded(child_canon)) {
                    out_.excluded.push_back(e.path);
                    continue;
                }
                if (e.st.st_dev != dev) {
                    auto type = filesystem_type(e.path);
                    if (is_volatile_filesystem(type)) {
                        out_.excluded.push_back(e.path + " (" + type + ")");
                        continue;
                    }
                }
                subdirs.emplace_back(e, child_canon);
            }
            out_.entries.push_back(e);
        }
        ::closedir(d);
        for (auto& [e, c] : subdirs) descend(e.path, c, e.st.st_dev, depth + 1);
    }

    const SentinelOptions& opts_;
    Collected& out_;
    std::vector<std::string> exclude_;
};

Collected collect(const std::vector<fs::path>& roots, const SentinelOptions& opts)
{
    Collected out;
    Collector c(opts, out);
    for (const auto& r : roots) c.root(r);
    return out;
}

std::string content_marker(const Entry& e, std::uint64_t limit, bool& hashed)
{
    hashed = false;
    if (S_ISLNK(e.st.st_mode)) {
        std::array<char, 4096> buf{};
        auto n = ::readlink(e.path.c_str(), buf.data(), buf.size());
        return n < 0 ? "link:?" : "link:" + std::string(buf.data(), static_cast<std::size_t>(n));
    }
    if (!S_ISREG(e.st.st_mode)) return "-";
    if (static_cast<std::uint64_t>(e.st.st_size) > limit) return "large";
    int fd = ::open(e.path.c_str(), O_RDONLY | O_CLOEXEC | O_NOFOLLOW | O_NONBLOCK);
    if (fd < 0) return std::string("unreadable:") + std::to_string(errno);
    Sha256 h;
    std::array<std::byte, 64 * 1024> buf{};
    std::uint64_t total = 0;
    for (;;) {
        auto n = ::read(fd, buf.data(), buf.size());
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        total += static_cast<std::uint64_t>(n);
        h.update(std::span<const std::byte>(buf.data(), static_cast<std::size_t>(n)));
        if (total > limit) break;
    }
    ::close(fd);
    hashed = true;
    return h.hex_digest();
}

std::string entry_digest(const Entry& e, std::uint64_t limit, bool& hashed)
{
    std::string record = e.path;
    record += '\0';
    record += std::to_string(S_ISDIR(e.st.st_mode) ? 0 : e.st.st_size);  // directory sizes track slack, not content
    record += '\0';
    record += std::to_string(e.st.st_mode);
    record += '\0';
    record += std::to_string(e.st.st_uid) + ":" + std::to_string(e.st.st_gid);
    record += '\0';
    record += content_marker(e, limit, hashed);
    return sha256_hex(record);
}

SentinelDigest finish(Collected&& c, std::vector<std::string>&& digests, std::size_t hashed_files, bool keep)
{
    std::map<std::string, std::string> kept;
    if (keep)
        for (std::size_t i = 0; i < digests.size(); ++i) kept[c.entries[i].path] = digests[i];
    std::sort(digests.begin(), digests.end());
    Sha256 all;
    for (const auto& d : digests) all.update(d);
    SentinelDigest out;
    out.hex = all.hex_digest();
    out.entries = digests.size();
    out.hashed_files = hashed_files;
    out.skipped_roots = std::move(c.skipped);
    out.excluded = std::move(c.excluded);
    std::sort(out.excluded.begin(), out.excluded.end());
    out.entry_digests = std::move(kept);
    return out;
}

}  // namespace

Json SentinelDigest::to_json() const
{
    Json skipped = Json::array();
    for (const auto& s : skipped_roots) skipped.push_back({{"root", s.root}, {"reason", s.reason}});
    return {{"digest", "sha256:" + hex},
            {"entries", entries},
            {"hashed_files", hashed_files},
            {"skipped_roots", skipped},
            {"excluded", excluded}};
}

SentinelDigest sentinel_hash(const std::vector<fs::path>& roots, const SentinelOptions& opts)
{
    auto c = collect(roots, opts);
    const auto n = static_cast<std::ptrdiff_t>(c.entries.size());
    std::vector<std::string> digests(c.entries.size());
    std::size_t hashed_files = 0;
#pragma omp parallel for schedule(dynamic, 64) reduction(+ : hashed_files)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        bool hashed = false;
        digests[static_cast<std::size_t>(i)] = entry_digest(c.entries[static_cast<std::size_t>(i)], opts.max_content_bytes, hashed);
        if (hashed) ++hashed_files;
    }
    return finish(std::move(c), std::move(digests), hashed_files, opts.keep_entries);
}

std::vector<std::string> changed_paths(const SentinelDigest& before, const SentinelDigest& after)
{
    std::vector<std::string> out;
    auto b = before.entry_digests.begin();
    auto a = after.entry_digests.begin();
    while (b != before.entry_digests.end() || a != after.entry_digests.end()) {
        if (a == after.entry_digests.end() || (b != before.entry_digests.end() && b->first < a->first)) {
            out.push_back(b++->first);
        } else if (b == before.entry_digests.end() || a->first < b->first) {
            out.push_back(a++->first);
        } else {
            if (a->second != b->second) out.push_back(a->first);
            ++a;
            ++b;
        }
    }
    return out;
}

SentinelDigest sentinel_hash_serial(const std::vector<fs::path>& roots, const SentinelOptions& opts)
{
    auto c = collect(roots, opts);
    std::vector<std::string> digests;
    digests.reserve(c.entries.size());
    std::size_t hashed_files = 0;
    for (const auto& e : c.entries) {
        bool hashed = false;
        digests.push_back(entry_digest(e, opts.max_content_bytes, hashed));
        if (hashed) ++hashed_files;
    }
    return finish(std::move(c), std::move(digests), hashed_files, opts.keep_entries);
}

}  // namespace sandboxeval
