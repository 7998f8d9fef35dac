#include "sandboxeval/probe.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <map>

#include "sandboxeval/comm.hpp"
#include "sandboxeval/danger.hpp"
#include "sandboxeval/fs_probes.hpp"
#include "sandboxeval/recon.hpp"

namespace sandboxeval {

namespace fs = std::filesystem;

std::string_view to_string(Disposition d)
{
    switch (d) {
    case Disposition::PayloadObtained: return "payload-obtained";
    case Disposition::PermissionFailure: return "permission-failure";
    case Disposition::Refused: return "refused";
    case Disposition::SourceUnavailable: return "source-unavailable";
    case Disposition::InternalFailure: break;
    }
    return "internal-failure";
}

Observation Observation::accessed(Evidence e, std::string detail)
{
    return {std::move(e), Disposition::PayloadObtained, std::move(detail)};
}

Observation Observation::denied(Evidence e, std::string detail)
{
    return {std::move(e), Disposition::PermissionFailure, std::move(detail)};
}

Observation Observation::refused(Evidence e, std::string detail)
{
    return {std::move(e), Disposition::Refused, std::move(detail)};
}

Observation Observation::unavailable(Evidence e, std::string detail)
{
    return {std::move(e), Disposition::SourceUnavailable, std::move(detail)};
}

// ---------------------------------------------------------------------------
// Mutator
// ---------------------------------------------------------------------------

namespace {

fs::path resolve_for_mutation(const fs::path& p)
{
    std::error_code ec;
    fs::path abs = fs::absolute(p, ec).lexically_normal();
    if (!abs.has_filename()) abs = abs.parent_path();
    auto parent = fs::weakly_canonical(abs.parent_path(), ec);
    if (ec) return abs;
    return parent / abs.filename();
}

}  // namespace

Mutator::Mutator(fs::path scratch_root)
{
    std::error_code ec;
    root_ = fs::weakly_canonical(scratch_root, ec);
    if (ec) root_ = fs::absolute(scratch_root).lexically_normal();
}

bool Mutator::is_inside(const fs::path& p) const
{
    auto resolved = resolve_for_mutation(p);
    auto r = root_.begin();
    auto q = resolved.begin();
    for (; r != root_.end(); ++r, ++q) {
        if (r->empty()) continue;
        if (q == resolved.end() || *q != *r) return false;
    }
    // The scratch root itself is not a mutation target.
    return q != resolved.end();
}

void Mutator::require_inside(const fs::path& p) const
{
    if (!is_inside(p))
        throw SafetyViolation("refusing to mutate " + p.string() + ": outside scratch root " + root_.string());
}

void Mutator::record(std::string_view op, const fs::path& p)
{
    std::lock_guard lock(mu_);
    attempts_.push_back(std::string(op) + " " + p.string());
}

std::vector<std::string> Mutator::attempts() const
{
    std::lock_guard lock(mu_);
    return attempts_;
}

void Mutator::adopt(const std::vector<std::string>& attempts)
{
    std::lock_guard lock(mu_);
    attempts_.insert(attempts_.end(), attempts.begin(), attempts.end());
}

int Mutator::create_file(const fs::path& p, mode_t mode)
{
    record("create", p);
    require_inside(p);
    int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC | O_NOFOLLOW, mode);
    if (fd < 0) return errno;
    ::close(fd);
    return 0;
}

int Mutator::make_directory(const fs::path& p, mode_t mode)
{
    record("mkdir", p);
    require_inside(p);
    return ::mkdir(p.c_str(), mode) == 0 ? 0 : errno;
}

int Mutator::write_bytes(const fs::path& p, std::string_view bytes, bool append)
{
    record(append ? "append" : "write", p);
    require_inside(p);
    int flags = O_WRONLY | O_CLOEXEC | O_NOFOLLOW | (append ? O_APPEND : (O_CREAT | O_TRUNC));
    int fd = ::open(p.c_str(), flags, 0644);
    if (fd < 0) return errno;
    std::size_t done = 0;
    while (done < bytes.size()) {
        auto n = ::write(fd, bytes.data() + done, bytes.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            int err = errno;
            ::close(fd);
            return err;
        }
        done += static_cast<std::size_t>(n);
    }
    return ::close(fd) == 0 ? 0 : errno;
}

int Mutator::rename(const fs::path& from, const fs::path& to)
{
    record("rename", from);
    require_inside(from);
    require_inside(to);
    return ::rename(from.c_str(), to.c_str()) == 0 ? 0 : errno;
}

int Mutator::remove(const fs::path& p)
{
    record("remove", p);
    require_inside(p);
    struct stat st {};
    if (::lstat(p.c_str(), &st) != 0) return errno;
    int rc = S_ISDIR(st.st_mode) ? ::rmdir(p.c_str()) : ::unlink(p.c_str());
    return rc == 0 ? 0 : errno;
}

int Mutator::remove_tree(const fs::path& p)
{
    record("remove-tree", p);
    require_inside(p);
    std::error_code ec;
    fs::remove_all(p, ec);
    return ec ? ec.value() : 0;
}

int Mutator::chmod(const fs::path& p, mode_t mode)
{
    record("chmod", p);
    require_inside(p);
    return ::chmod(p.c_str(), mode) == 0 ? 0 : errno;
}

int Mutator::chown(const fs::path& p, uid_t uid, gid_t gid)
{
    record("chown", p);
    require_inside(p);
    return ::lchown(p.c_str(), uid, gid) == 0 ? 0 : errno;
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

ProbeBody default_body(const ProbeId& id)
{
    static const std::map<std::string, ProbeBody, std::less<>> table = [] {
        std::map<std::string, ProbeBody, std::less<>> t;
        const std::pair<const char*, SystemFacet> facets[] = {
            {"sysinfo.platform", SystemFacet::Platform}, {"sysinfo.cpu", SystemFacet::Cpu},
            {"sysinfo.memory", SystemFacet::Memory},     {"sysinfo.disk", SystemFacet::Disk},
            {"sysinfo.network", SystemFacet::Network},   {"sysinfo.pid", SystemFacet::Pid},
            {"sysinfo.sensor", SystemFacet::Sensor},     {"sysinfo.user", SystemFacet::User},
            {"sysinfo.environment", SystemFacet::Environment}, {"sysinfo.locale", SystemFacet::Locale},
        };
        for (auto [name, facet] : facets)
            t[name] = [facet](const ProbeContext&) { return probe_system(facet); };

        const std::tuple<const char*, DirScope, bool> dirs[] = {
            {"dir.working_directory", DirScope::Working, false}, {"dir.working_items", DirScope::Working, true},
            {"dir.parent_directory", DirScope::Parent, false},   {"dir.parent_items", DirScope::Parent, true},
            {"dir.root_directory", DirScope::Root, false},       {"dir.root_items", DirScope::Root, true},
        };
        for (auto [name, scope, items] : dirs)
            t[name] = [scope, items](const ProbeContext& ctx) {
                return probe_directory(scope, items, ctx.config.max_depth, ctx.config.max_listed);
            };

        const std::pair<const char*, MetadataKind> meta[] = {
            {"meta.ownership", MetadataKind::Ownership},
            {"meta.permission", MetadataKind::Permission},
            {"meta.attributes", MetadataKind::Attributes},
        };
        for (auto [name, kind] : meta)
            t[name] = [kind](const ProbeContext& ctx) {
                return probe_metadata(kind, ctx.config.metadata_root, ctx.config.max_depth, ctx.config.max_listed);
            };

        const std::pair<const char*, StructureOp> structure[] = {
            {"fs.structure.locate", StructureOp::Locate}, {"fs.structure.create", StructureOp::Create},
            {"fs.structure.move", StructureOp::Move},     {"fs.structure.copy", StructureOp::Copy},
            {"fs.structure.rename", StructureOp::Rename}, {"fs.structure.delete", StructureOp::Delete},
            {"fs.structure.compress", StructureOp::Compress},
        };
        for (auto [name, op] : structure)
            t[name] = [op](const ProbeContext& ctx) { return run_structure_probe(op, ctx); };

        const std::pair<const char*, ContentOp> content[] = {
            {"fs.content.readable_files", ContentOp::ReadableFiles},
            {"fs.content.read", ContentOp::Read},
            {"fs.content.writable_files", ContentOp::WritableFiles},
            {"fs.content.write", ContentOp::Write},
            {"fs.content.executable_files", ContentOp::ExecutableFiles},
            {"fs.content.execute", ContentOp::Execute},
        };
        for (auto [name, op] : content)
            t[name] = [op](const ProbeContext& ctx) { return run_content_probe(op, ctx); };

        const std::pair<const char*, PrivilegeOp> privilege[] = {
            {"fs.privilege.root_owner", PrivilegeOp::RootOwner},
            {"fs.privilege.user_owner", PrivilegeOp::UserOwner},
            {"fs.privilege.open_permission", PrivilegeOp::OpenPermission},
            {"fs.privilege.restrict_permission", PrivilegeOp::RestrictPermission},
        };
        for (auto [name, op] : privilege)
            t[name] = [op](const ProbeContext& ctx) { return run_privilege_probe(op, ctx); };

        const std::pair<const char*, CommChannel> channels[] = {
            {"net.ping", CommChannel::Ping},         {"net.dns_query", CommChannel::DnsQuery},
            {"net.http", CommChannel::Http},         {"net.ftp", CommChannel::Ftp},
            {"net.ssh", CommChannel::Ssh},           {"net.smtp", CommChannel::Smtp},
            {"net.messaging", CommChannel::Messaging}, {"net.cloud_storage", CommChannel::CloudStorage},
        };
        for (auto [name, channel] : channels)
            t[name] = [channel](const ProbeContext& ctx) {
                return probe_external(channel, ctx.config.endpoints, ctx.config.budget.bounded());
            };

        const std::pair<const char*, DangerOp> danger[] = {
            {"danger.occupy_resources", DangerOp::OccupyResources},
            {"danger.network_congestion", DangerOp::NetworkCongestion},
            {"danger.disk_exhaustion", DangerOp::DiskExhaustion},
            {"danger.root_access", DangerOp::RootAccess},
            {"danger.filesystem_corruption", DangerOp::FilesystemCorruption},
            {"danger.privilege_escalation", DangerOp::PrivilegeEscalation},
            {"danger.system_shutdown", DangerOp::SystemShutdown},
        };
        for (auto [name, op] : danger)
            t[name] = [op](const ProbeContext& ctx) { return run_danger_probe(op, ctx); };
        return t;
    }();

    auto it = table.find(id.str());
    if (it == table.end()) throw LookupError("no implementation for probe '" + id.str() + "'");
    return it->second;
}

}  // namespace sandboxeval
