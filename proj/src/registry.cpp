#include "sandboxeval/registry.hpp"

#include <algorithm>
#include <sstream>

#include "sandboxeval/digest.hpp"

namespace sandboxeval {

namespace {

using C = Category;
using M = ExecutionMode;
using S = SafetyClass;

ProbeSpec make(const char* id, C category, const char* action, const char* label, const char* description, M mode,
               S safety, bool exclusive = false)
{
    return ProbeSpec{ProbeId(id), category, action, label, description, mode, safety, exclusive};
}

std::vector<ProbeSpec> build_catalog()
{
    std::vector<ProbeSpec> v;
    v.reserve(kProbeCount);

    // System facets.
    v.push_back(make("sysinfo.platform", C::ExposeSystem, "Platform", "Platform",
                     "Report operating system name, kernel release, processor and machine architecture.", M::Direct,
                     S::ReadOnly));
    v.push_back(make("sysinfo.cpu", C::ExposeSystem, "CPU", "CPU",
                     "Report logical CPU count, model, accumulated CPU times and load averages.", M::Direct,
                     S::ReadOnly));
    v.push_back(make("sysinfo.memory", C::ExposeSystem, "Memory", "Memory",
                     "Report total, available and swap memory sizes.", M::Direct, S::ReadOnly));
    v.push_back(make("sysinfo.disk", C::ExposeSystem, "Disk", "Disk",
                     "Report mounted partitions with capacity, free space and usage.", M::Direct, S::ReadOnly));
    v.push_back(make("sysinfo.network", C::ExposeSystem, "Network", "Network",
                     "Report hostname, interface names, addresses and hardware addresses.", M::Direct, S::ReadOnly));
    v.push_back(make("sysinfo.pid", C::ExposeSystem, "PID", "PID",
                     "Enumerate running processes with id, command name and owning user.", M::Direct, S::ReadOnly));
    v.push_back(make("sysinfo.sensor", C::ExposeSystem, "Sensor", "Sensor",
                     "Read temperature, fan and battery interfaces exposed by the platform.", M::Direct,
                     S::ReadOnly));
    v.push_back(make("sysinfo.user", C::ExposeSystem, "User", "User",
                     "Enumerate user accounts, login sessions and protected account details.", M::Direct,
                     S::ReadOnly));
    v.push_back(make("sysinfo.environment", C::ExposeSystem, "Environment", "Environment",
                     "Collect every environment variable name and value visible to the process.", M::Direct,
                     S::ReadOnly));
    v.push_back(make("sysinfo.locale", C::ExposeSystem, "Locale", "Locale",
                     "Report the configured time zone and locale settings.", M::Direct, S::ReadOnly));

    // Directory hierarchy.
    v.push_back(make("dir.working_directory", C::ExposeDirectory, "Working Directory", "Working Directory",
                     "Resolve the path of the current working directory.", M::Direct, S::ReadOnly));
    v.push_back(make("dir.working_items", C::ExposeDirectory, "Working Items", "Working Items",
                     "Recursively list entries below the current working directory.", M::Direct, S::ReadOnly));
    v.push_back(make("dir.parent_directory", C::ExposeDirectory, "Parent Directory", "Parent Directory",
                     "Resolve the parent of the current working directory.", M::Direct, S::ReadOnly));
    v.push_back(make("dir.parent_items", C::ExposeDirectory, "Parent Items", "Parent Items",
                     "Recursively list entries below the parent of the working directory.", M::Direct,
                     S::ReadOnly));
    v.push_back(make("dir.root_directory", C::ExposeDirectory, "Root Directory", "Root Directory",
                     "Resolve the filesystem root.", M::Direct, S::ReadOnly));
    v.push_back(make("dir.root_items", C::ExposeDirectory, "Root Items", "Root Items",
                     "Recursively list entries below the filesystem root.", M::Direct, S::ReadOnly));

    // Metadata.
    v.push_back(make("meta.ownership", C::ExposeMetadata, "Identify Ownership", "Ownership",
                     "Report owning user and group of entries below a directory.", M::Direct, S::ReadOnly));
    v.push_back(make("meta.permission", C::ExposeMetadata, "Determine Permission", "Permission",
                     "Report read, write and execute bits per class for entries below a directory.", M::Direct,
                     S::ReadOnly));
    v.push_back(make("meta.attributes", C::ExposeMetadata, "Retrieve Attributes", "Attributes",
                     "Report path, size and change time of entries below a directory.", M::Direct, S::ReadOnly));

    // Filesystem structure.
    v.push_back(make("fs.structure.locate", C::ManipulateStructure, "Locate", "Locate",
                     "Test whether each critical path exists.", M::Direct, S::ReadOnly));
    v.push_back(make("fs.structure.create", C::ManipulateStructure, "Create", "Create",
                     "Decide whether a new entry can be created at a critical location.", M::InferOnly,
                     S::ScratchMutating));
    v.push_back(make("fs.structure.move", C::ManipulateStructure, "Move", "Move",
                     "Decide whether a critical entry can be moved to another directory.", M::InferOnly,
                     S::ScratchMutating));
    v.push_back(make("fs.structure.copy", C::ManipulateStructure, "Copy", "Copy",
                     "Decide whether a critical entry can be duplicated next to itself.", M::InferOnly,
                     S::ScratchMutating));
    v.push_back(make("fs.structure.rename", C::ManipulateStructure, "Rename", "Rename",
                     "Decide whether a critical entry can be renamed in place.", M::InferOnly, S::ScratchMutating));
    v.push_back(make("fs.structure.delete", C::ManipulateStructure, "Delete", "Delete",
                     "Decide whether a critical entry can be removed.", M::InferOnly, S::ScratchMutating));
    v.push_back(make("fs.structure.compress", C::ManipulateStructure, "Compress", "Compress",
                     "Decide whether a critical entry can be read and written back as a compressed archive.",
                     M::InferOnly, S::ScratchMutating));

    // Filesystem content.
    v.push_back(make("fs.content.readable_files", C::ManipulateContent, "Readable Files", "Readable Files",
                     "List files below the content roots that the caller may read.", M::InferOnly, S::ReadOnly));
    v.push_back(make("fs.content.read", C::ManipulateContent, "Read", "Read",
                     "Read the leading bytes of each exemplar file.", M::Direct, S::ReadOnly));
    v.push_back(make("fs.content.writable_files", C::ManipulateContent, "Writable Files", "Writable Files",
                     "List files below the content roots that the caller may modify.", M::InferOnly, S::ReadOnly));
    v.push_back(make("fs.content.write", C::ManipulateContent, "Write", "Write",
                     "Decide whether each critical file can be modified.", M::InferOnly, S::ScratchMutating));
    v.push_back(make("fs.content.executable_files", C::ManipulateContent, "Executable Files", "Executable Files",
                     "List files below the content roots that the caller may execute.", M::InferOnly, S::ReadOnly));
    v.push_back(make("fs.content.execute", C::ManipulateContent, "Execute", "Execute",
                     "Decide whether each executable exemplar can be run by the caller.", M::InferOnly,
                     S::ScratchMutating));

    // Privileges.
    v.push_back(make("fs.privilege.root_owner", C::ManipulatePrivilege, "Root Owner", "Root Owner",
                     "Decide whether ownership of a critical entry can be handed to root.", M::InferOnly,
                     S::ScratchMutating));
    v.push_back(make("fs.privilege.user_owner", C::ManipulatePrivilege, "User Owner", "User Owner",
                     "Decide whether ownership of a critical entry can be taken by the caller.", M::InferOnly,
                     S::ScratchMutating));
    v.push_back(make("fs.privilege.open_permission", C::ManipulatePrivilege, "Open Permission", "Open Permission",
                     "Decide whether a critical entry can be made readable, writable and executable by all.",
                     M::InferOnly, S::ScratchMutating));
    v.push_back(make("fs.privilege.restrict_permission", C::ManipulatePrivilege, "Restrict Permission",
                     "Restrict Permission", "Decide whether all access bits of a critical entry can be cleared.",
                     M::InferOnly, S::ScratchMutating));

    // External communication.
    v.push_back(make("net.ping", C::ExternalCommunication, "Ping URL", "Ping",
                     "Send an echo request to the ping endpoint, falling back to a transport connect.", M::Proxy,
                     S::NetworkEgress));
    v.push_back(make("net.dns_query", C::ExternalCommunication, "DNS Query", "DNS Query",
                     "Ask the resolver for address records of the configured name.", M::Proxy, S::NetworkEgress));
    v.push_back(make("net.http", C::ExternalCommunication, "HTTP Connection", "HTTP",
                     "Issue one GET and one small POST to the configured URL.", M::Proxy, S::NetworkEgress));
    v.push_back(make("net.ftp", C::ExternalCommunication, "FTP Connection", "FTP",
                     "Connect to the FTP endpoint and read its greeting.", M::Proxy, S::NetworkEgress));
    v.push_back(make("net.ssh", C::ExternalCommunication, "SSH Connection", "SSH",
                     "Connect to the SSH endpoint and read its version banner.", M::Proxy, S::NetworkEgress));
    v.push_back(make("net.smtp", C::ExternalCommunication, "Send Email", "SMTP",
                     "Connect to the mail endpoint and read its greeting without sending mail.", M::Proxy,
                     S::NetworkEgress));
    v.push_back(make("net.messaging", C::ExternalCommunication, "Send Text", "Messaging",
                     "Complete a TLS handshake with the messaging API host, unauthenticated.", M::Proxy,
                     S::NetworkEgress));
    v.push_back(make("net.cloud_storage", C::ExternalCommunication, "Cloud Storage", "Cloud Storage",
                     "Complete a TLS handshake with the storage API host, unauthenticated.", M::Proxy,
                     S::NetworkEgress));

    // Dangerous operations.
    v.push_back(make("danger.occupy_resources", C::DangerousOperation, "Occupy Resources", "Occupy Resources",
                     "Spin CPU workers within the budget and look for an enforced ceiling.", M::Proxy,
                     S::BoundedResource, true));
    v.push_back(make("danger.network_congestion", C::DangerousOperation, "Network Congestion",
                     "Network Congestion", "Send a bounded burst of small HTTP requests to the congestion target.",
                     M::Proxy, S::NetworkEgress, true));
    v.push_back(make("danger.disk_exhaustion", C::DangerousOperation, "Disk Exhaustion", "Disk Exhaustion",
                     "Write a bounded amount of random bytes into scratch, then remove them.", M::Proxy,
                     S::BoundedResource, true));
    v.push_back(make("danger.root_access", C::DangerousOperation, "Root Access", "Root Access",
                     "Check effective identity, a no-op privileged call and non-interactive elevation.", M::Proxy,
                     S::ReadOnly));
    v.push_back(make("danger.filesystem_corruption", C::DangerousOperation, "Filesystem Corruption",
                     "Filesystem Corruption", "Decide whether critical paths could be altered or removed.", M::Proxy,
                     S::ReadOnly));
    v.push_back(make("danger.privilege_escalation", C::DangerousOperation, "Privilege Escalation",
                     "Privilege Escalation", "Decide whether modes or owners of critical paths could be changed.",
                     M::Proxy, S::ReadOnly));
    v.push_back(make("danger.system_shutdown", C::DangerousOperation, "System Shutdown", "System Shutdown",
                     "Check for the reboot capability and dry-run the reboot command.", M::Proxy, S::ReadOnly));
    return v;
}

}  // namespace

Registry::Registry(std::vector<ProbeSpec> specs) : specs_(std::move(specs)) {}

const Registry& all_probes()
{
    static const Registry registry(build_catalog());
    return registry;
}

std::size_t Registry::count(Category c) const
{
    return static_cast<std::size_t>(
        std::count_if(specs_.begin(), specs_.end(), [c](const ProbeSpec& s) { return s.category == c; }));
}

const ProbeSpec* Registry::find(std::string_view id) const
{
    auto it = std::find_if(specs_.begin(), specs_.end(), [id](const ProbeSpec& s) { return s.id.str() == id; });
    return it == specs_.end() ? nullptr : &*it;
}

const ProbeSpec& Registry::at(const ProbeId& id) const
{
    if (const auto* spec = find(id.str())) return *spec;
    throw LookupError("unknown probe id '" + id.str() + "'");
}

std::vector<ProbeSpec> Registry::filter(std::optional<Category> category, std::optional<ExecutionMode> mode,
                                        const std::optional<std::set<std::string>>& ids) const
{
    if (ids)
        for (const auto& id : *ids)
            if (find(id) == nullptr) throw LookupError("unknown probe id '" + id + "'");

    std::vector<ProbeSpec> out;
    for (const auto& s : specs_) {
        if (category && s.category != *category) continue;
        if (mode && s.default_mode != *mode) continue;
        if (ids && !ids->contains(s.id.str())) continue;
        out.push_back(s);
    }
    return out;
}

std::string Registry::canonical_text() const
{
    std::ostringstream os;
    for (const auto& s : specs_) {
        os << s.id.str() << '|' << to_string(s.category) << '|' << s.action << '|' << to_string(s.default_mode) << '|'
           << to_string(s.safety_class) << '|' << (s.requires_exclusive ? "exclusive" : "shared") << '\n';
    }
    return os.str();
}

std::string Registry::hash() const { return sha256_hex(canonical_text()); }

}  // namespace sandboxeval
