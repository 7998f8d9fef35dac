#include "sandboxeval/access.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <sys/statvfs.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sandboxeval {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::pair<AccessOp, std::string_view>, 7> kOpNames{{
    {AccessOp::Read, "read"},
    {AccessOp::Write, "write"},
    {AccessOp::Execute, "execute"},
    {AccessOp::CreateIn, "create_in"},
    {AccessOp::DeleteFrom, "delete_from"},
    {AccessOp::Chmod, "chmod"},
    {AccessOp::Chown, "chown"},
}};

// Capability numbers from linux/capability.h.
constexpr int kCapChown = 0;
constexpr int kCapDacOverride = 1;
constexpr int kCapDacReadSearch = 2;
constexpr int kCapFowner = 3;

enum class PermClass { Owner, Group, Other };

constexpr unsigned kRead = 4;
constexpr unsigned kWrite = 2;
constexpr unsigned kExec = 1;

std::string_view class_name(PermClass c)
{
    switch (c) {
    case PermClass::Owner: return "owner";
    case PermClass::Group: return "group";
    case PermClass::Other: break;
    }
    return "other";
}

std::string_view bit_name(unsigned bit)
{
    if (bit == kRead) return "read";
    if (bit == kWrite) return "write";
    return "execute";
}

PermClass class_of(const struct stat& st, const Credentials& who)
{
    if (st.st_uid == who.uid) return PermClass::Owner;
    if (who.in_group(st.st_gid)) return PermClass::Group;
    return PermClass::Other;
}

unsigned class_bits(mode_t mode, PermClass c)
{
    switch (c) {
    case PermClass::Owner: return (mode >> 6) & 7u;
    case PermClass::Group: return (mode >> 3) & 7u;
    case PermClass::Other: break;
    }
    return mode & 7u;
}

struct Check {
    bool ok;
    std::string basis;
};

// Mirrors the kernel's discretionary check: class bits first, then the
// capability overrides.
Check permission(const struct stat& st, unsigned want, const Credentials& who)
{
    const auto cls = class_of(st, who);
    const bool is_dir = S_ISDIR(st.st_mode);
    std::string missing;
    for (unsigned bit : {kRead, kWrite, kExec}) {
        if ((want & bit) == 0) continue;
        if ((class_bits(st.st_mode, cls) & bit) == 0) {
            if (!missing.empty()) missing += ", ";
            missing += std::string(class_name(cls)) + " " + std::string(bit_name(bit)) + " bit clear";
        }
    }
    if (missing.empty()) {
        std::string basis(class_name(cls));
        basis += " bits permit";
        for (unsigned bit : {kRead, kWrite, kExec})
            if (want & bit) basis += " " + std::string(bit_name(bit));
        return {true, basis};
    }
    if (who.cap_dac_override) {
        if (is_dir || (want & kExec) == 0 || (st.st_mode & 0111) != 0) return {true, "CAP_DAC_OVERRIDE"};
        return {false, "no execute bit for any class"};
    }
    if (who.cap_dac_read_search && (want & kWrite) == 0 && ((want & kExec) == 0 || is_dir))
        return {true, "CAP_DAC_READ_SEARCH"};
    return {false, missing};
}

bool has_cap(std::uint64_t mask, int cap) { return (mask >> cap) & 1u; }

std::string errno_text(int err) { return std::strerror(err); }

unsigned long mount_flags_of(const fs::path& p)
{
    struct statvfs vfs {};
    if (::statvfs(p.c_str(), &vfs) != 0) return 0;
    return vfs.f_flag;
}

std::optional<std::string> mount_restriction(unsigned long flags, AccessOp op)
{
    if (op == AccessOp::Execute && (flags & ST_NOEXEC)) return "noexec mount";
    if (op != AccessOp::Read && op != AccessOp::Execute && (flags & ST_RDONLY)) return "read-only filesystem";
    return std::nullopt;
}

// Every directory from the root down to and including `dir` must grant search.
std::optional<std::string> traversal_denied(const fs::path& dir, const Credentials& who)
{
    fs::path prefix;
    for (const auto& part : dir) {
        prefix /= part;
        struct stat st {};
        if (::stat(prefix.c_str(), &st) != 0) return "unreachable: " + prefix.string() + ": " + errno_text(errno);
        if (!S_ISDIR(st.st_mode)) return "unreachable: " + prefix.string() + " is not a directory";
        auto c = permission(st, kExec, who);
        if (!c.ok) return "search denied on " + prefix.string() + " (" + c.basis + ")";
    }
    return std::nullopt;
}

// nullopt when the header cannot be read by this process.
std::optional<bool> looks_like_script(const fs::path& p)
{
    int fd = ::open(p.c_str(), O_RDONLY | O_CLOEXEC | O_NOFOLLOW);
    if (fd < 0) return std::nullopt;
    char head[2] = {};
    auto n = ::read(fd, head, sizeof head);
    ::close(fd);
    return n == 2 && head[0] == '#' && head[1] == '!';
}

AccessPrediction deny(AccessOp op, const fs::path& target, std::string basis)
{
    return {op, target, Prediction::Deny, std::move(basis)};
}

AccessPrediction allow(AccessOp op, const fs::path& target, std::string basis)
{
    return {op, target, Prediction::Allow, std::move(basis)};
}

AccessPrediction on_object(const fs::path& shown, const fs::path& actual, const struct stat& st, AccessOp op,
                           const Credentials& who, unsigned long mount_flags)
{
    if (auto why = mount_restriction(mount_flags, op)) return deny(op, shown, *why);
    switch (op) {
    case AccessOp::Read: {
        auto c = permission(st, kRead, who);
        return {op, shown, c.ok ? Prediction::Allow : Prediction::Deny, c.basis};
    }
    case AccessOp::Write: {
        auto c = permission(st, S_ISDIR(st.st_mode) ? (kWrite | kExec) : kWrite, who);
        return {op, shown, c.ok ? Prediction::Allow : Prediction::Deny, c.basis};
    }
    case AccessOp::Execute: {
        if (S_ISDIR(st.st_mode)) {
            auto c = permission(st, kExec, who);
            return {op, shown, c.ok ? Prediction::Allow : Prediction::Deny, "search: " + c.basis};
        }
        if (!S_ISREG(st.st_mode)) return deny(op, shown, "not a regular file");
        auto c = permission(st, kExec, who);
        if (!c.ok) return deny(op, shown, c.basis);
        const auto script = looks_like_script(actual);
        if (script.value_or(false)) {
            auto r = permission(st, kRead, who);
            if (!r.ok) return deny(op, shown, "interpreter rule: " + r.basis);
            return allow(op, shown, "interpreter rule: " + c.basis + "; " + r.basis);
        }
        // An unreadable header is taken to be a binary, which needs no read bit.
        return allow(op, shown, (script ? "binary rule: " : "binary rule (header unreadable): ") + c.basis);
    }
    case AccessOp::Chmod:
        if (st.st_uid == who.uid) return allow(op, shown, "caller owns target");
        if (who.cap_fowner) return allow(op, shown, "CAP_FOWNER");
        return deny(op, shown, "caller does not own target");
    case AccessOp::Chown:
        if (who.cap_chown) return allow(op, shown, "CAP_CHOWN");
        return deny(op, shown, "changing owner requires CAP_CHOWN");
    case AccessOp::CreateIn:
    case AccessOp::DeleteFrom: break;
    }
    return deny(op, shown, "not an object-level operation");
}

}  // namespace

std::string_view to_string(AccessOp op)
{
    for (const auto& [v, name] : kOpNames)
        if (v == op) return name;
    return "?";
}

std::optional<AccessOp> parse_access_op(std::string_view s)
{
    for (const auto& [v, name] : kOpNames)
        if (name == s) return v;
    return std::nullopt;
}

std::string_view to_string(Prediction p) { return p == Prediction::Allow ? "allow" : "deny"; }

bool Credentials::in_group(gid_t g) const
{
    return g == gid || std::find(groups.begin(), groups.end(), g) != groups.end();
}

Credentials Credentials::current()
{
    Credentials c;
    c.uid = ::geteuid();
    c.gid = ::getegid();
    int n = ::getgroups(0, nullptr);
    if (n > 0) {
        c.groups.resize(static_cast<std::size_t>(n));
        n = ::getgroups(n, c.groups.data());
        c.groups.resize(static_cast<std::size_t>(std::max(n, 0)));
    }
    std::uint64_t eff = 0;
    std::ifstream status("/proc/self/status");
    for (std::string line; std::getline(status, line);) {
        if (line.rfind("CapEff:", 0) == 0) {
            eff = std::stoull(line.substr(7), nullptr, 16);
            break;
        }
    }
    c.cap_chown = has_cap(eff, kCapChown);
    c.cap_dac_override = has_cap(eff, kCapDacOverride);
    c.cap_dac_read_search = has_cap(eff, kCapDacReadSearch);
    c.cap_fowner = has_cap(eff, kCapFowner);
    return c;
}

AccessPrediction infer_access(const fs::path& target, AccessOp op) { return infer_access(target, op, Credentials::current()); }

AccessPrediction infer_access(const fs::path& target_in, AccessOp op, const Credentials& who)
{
    std::error_code ec;
    fs::path target = target_in.is_absolute() ? target_in : fs::absolute(target_in, ec);
    if (ec) return deny(op, target_in, "unreachable: " + ec.message());
    target = target.lexically_normal();
    if (target.has_relative_path() && !target.has_filename()) target = target.parent_path();

    const bool on_target = op == AccessOp::Read || op == AccessOp::Write || op == AccessOp::Execute ||
                           op == AccessOp::Chmod || op == AccessOp::Chown;

    // Operations on the object itself follow symbolic links.
    struct stat lst {};
    if (on_target && ::lstat(target.c_str(), &lst) == 0 && S_ISLNK(lst.st_mode)) {
        auto resolved = fs::canonical(target, ec);
        if (ec) return deny(op, target_in, "unreachable: " + ec.message());
        target = resolved;
    }

    fs::path parent = target.has_relative_path() ? target.parent_path() : target;
    auto canonical_parent = fs::canonical(parent, ec);
    if (ec) return deny(op, target_in, "unreachable: " + parent.string() + ": " + ec.message());
    if (auto why = traversal_denied(canonical_parent, who)) return deny(op, target_in, *why);

    if (on_target) {
        struct stat st {};
        if (::stat(target.c_str(), &st) != 0) {
            int err = errno;
            return deny(op, target_in, err == ENOENT ? "target missing" : "unreachable: " + errno_text(err));
        }
        return on_object(target_in, target, st, op, who, mount_flags_of(target));
    }

    // Entry-level operations consult the parent directory.
    struct stat pst {};
    if (::stat(canonical_parent.c_str(), &pst) != 0)
        return deny(op, target_in, "unreachable: " + errno_text(errno));
    if (auto why = mount_restriction(mount_flags_of(canonical_parent), op)) return deny(op, target_in, *why);
    auto c = permission(pst, kWrite | kExec, who);
    if (!c.ok) return deny(op, target_in, "parent " + c.basis);

    if (op == AccessOp::CreateIn) return allow(op, target_in, "parent " + c.basis);

    struct stat tst {};
    fs::path entry = canonical_parent / target.filename();
    if (::lstat(entry.c_str(), &tst) != 0) return deny(op, target_in, "target missing");
    if ((pst.st_mode & S_ISVTX) && tst.st_uid != who.uid && pst.st_uid != who.uid && !who.cap_fowner)
        return deny(op, target_in, "sticky parent: caller owns neither entry nor directory");
    return allow(op, target_in, "parent " + c.basis);
}

AccessPrediction infer_from_stat(const fs::path& target, const struct stat& st, AccessOp op, const Credentials& who,
                                 unsigned long mount_flags)
{
    return on_object(target, target, st, op, who, mount_flags);
}

AccessPrediction infer_chown(const fs::path& target, uid_t new_owner, const Credentials& who)
{
    auto reach = infer_access(target, AccessOp::Chmod, who);
    if (reach.basis.rfind("unreachable", 0) == 0 || reach.basis == "target missing" ||
        reach.basis.rfind("search denied", 0) == 0 || reach.basis == "read-only filesystem")
        return {AccessOp::Chown, target, Prediction::Deny, reach.basis};
    if (who.cap_chown) return {AccessOp::Chown, target, Prediction::Allow, "CAP_CHOWN"};
    struct stat st {};
    if (::stat(target.c_str(), &st) == 0 && st.st_uid == who.uid && new_owner == st.st_uid)
        return {AccessOp::Chown, target, Prediction::Allow, "caller already owns target"};
    return {AccessOp::Chown, target, Prediction::Deny, "changing owner requires CAP_CHOWN"};
}

}  // namespace sandboxeval
