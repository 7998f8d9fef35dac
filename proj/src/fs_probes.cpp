#include "sandboxeval/fs_probes.hpp"

#include <fcntl.h>
#include <spawn.h>
#include <sys/stat.h>
#include <sys/statvfs.h>
#include <sys/wait.h>
#include <unistd.h>
#include <zlib.h>

#include <array>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>
#include <unordered_map>

#include "sandboxeval/digest.hpp"
#include "sandboxeval/walk.hpp"

extern char** environ;

namespace sandboxeval {

namespace fs = std::filesystem;

std::string_view to_string(StructureOp op)
{
    static constexpr std::array<std::string_view, 7> names{"locate", "create", "move", "copy",
                                                           "rename", "delete", "compress"};
    return names[static_cast<std::size_t>(op)];
}

std::string_view to_string(ContentOp op)
{
    static constexpr std::array<std::string_view, 6> names{"readable_files", "read",          "writable_files",
                                                           "write",          "executable_files", "execute"};
    return names[static_cast<std::size_t>(op)];
}

std::string_view to_string(PrivilegeOp op)
{
    static constexpr std::array<std::string_view, 4> names{"root_owner", "user_owner", "open_permission",
                                                           "restrict_permission"};
    return names[static_cast<std::size_t>(op)];
}

namespace {

Json prediction_json(const AccessPrediction& p)
{
    return {{"operation", to_string(p.operation)},
            {"target", p.target.string()},
            {"predicted", to_string(p.predicted)},
            {"basis", p.basis}};
}

bool is_dir_path(const fs::path& p)
{
    struct stat st {};
    return ::stat(p.c_str(), &st) == 0 && S_ISDIR(st.st_mode);
}

fs::path parent_of(const fs::path& p)
{
    auto n = p.lexically_normal();
    if (!n.has_filename()) n = n.parent_path();
    return n.has_relative_path() ? n.parent_path() : n;
}

std::string name_of(const fs::path& p)
{
    auto n = p.lexically_normal();
    if (!n.has_filename()) n = n.parent_path();
    auto name = n.filename().string();
    return name.empty() ? "root" : name;
}

Evidence base_evidence(std::string kind, FsMode mode)
{
    Evidence e{std::move(kind), Json::object(), false, std::nullopt};
    e.payload["mode"] = mode == FsMode::InferOnly ? "infer-only" : "scratch-active";
    e.payload["acl_checked"] = false;
    return e;
}

std::string errno_name(int err) { return err == 0 ? "ok" : std::strerror(err); }

bool is_permission_errno(int err) { return err == EACCES || err == EPERM || err == EROFS; }

// Result of a set of per-target judgements.
Observation conclude(Evidence ev, int allowed, int considered, int permission_failures, const char* verb)
{
    ev.payload["allowed_count"] = allowed;
    ev.payload["target_count"] = considered;
    if (allowed > 0) return Observation::accessed(std::move(ev));
    if (considered == 0) return Observation::denied(std::move(ev), "no targets available");
    if (permission_failures == 0 && std::string_view(verb) == "performed")
        return {std::move(ev), Disposition::InternalFailure, "operation failed for reasons other than permission"};
    return Observation::denied(std::move(ev),
                               std::string("all ") + std::to_string(considered) + " targets " + verb + " deny");
}

std::string read_prefix(const fs::path& p, std::size_t max, int& err)
{
    err = 0;
    int fd = ::open(p.c_str(), O_RDONLY | O_CLOEXEC | O_NONBLOCK);
    if (fd < 0) {
        err = errno;
        return {};
    }
    std::string buf(max, '\0');
    auto n = ::read(fd, buf.data(), buf.size());
    if (n < 0) err = errno;
    ::close(fd);
    buf.resize(n < 0 ? 0 : static_cast<std::size_t>(n));
    return buf;
}

std::string read_all(const fs::path& p, int& err, std::size_t cap = 1 << 20)
{
    err = 0;
    int fd = ::open(p.c_str(), O_RDONLY | O_CLOEXEC | O_NONBLOCK);
    if (fd < 0) {
        err = errno;
        return {};
    }
    std::string out;
    char buf[8192];
    while (out.size() < cap) {
        auto n = ::read(fd, buf, sizeof buf);
        if (n < 0) {
            if (errno == EINTR) continue;
            err = errno;
            break;
        }
        if (n == 0) break;
        out.append(buf, static_cast<std::size_t>(n));
    }
    ::close(fd);
    return out;
}

std::string gzip(std::string_view data)
{
    z_stream zs{};
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK) return {};
    std::string out(deflateBound(&zs, data.size()) + 32, '\0');
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    deflate(&zs, Z_FINISH);
    out.resize(zs.total_out);
    deflateEnd(&zs);
    return out;
}

// Runs `path` with no arguments and stdin/stdout/stderr on /dev/null.
// Returns 0 when it exited with status 0, an errno from spawn otherwise, or
// -1 when it ran but failed.
int spawn_and_wait(const fs::path& path, std::chrono::seconds limit = std::chrono::seconds(5))
{
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    for (int fd : {0, 1, 2}) posix_spawn_file_actions_addopen(&actions, fd, "/dev/null", fd == 0 ? O_RDONLY : O_WRONLY, 0);
    std::string arg0 = path.string();
    char* argv[] = {arg0.data(), nullptr};
    pid_t pid = 0;
    int rc = ::posix_spawn(&pid, path.c_str(), &actions, nullptr, argv, environ);
    posix_spawn_file_actions_destroy(&actions);
    if (rc != 0) return rc;
    const auto deadline = std::chrono::steady_clock::now() + limit;
    int status = 0;
    while (true) {
        pid_t w = ::waitpid(pid, &status, WNOHANG);
        if (w == pid) break;
        if (w < 0 && errno != EINTR) return -1;
        if (std::chrono::steady_clock::now() > deadline) {
            ::kill(pid, SIGKILL);
            ::waitpid(pid, &status, 0);
            return -1;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (WIFEXITED(status) && WEXITSTATUS(status) == 0) return 0;
    // Shells report exec failures of the interpreter as 126/127.
    if (WIFEXITED(status) && (WEXITSTATUS(status) == 126 || WEXITSTATUS(status) == 127)) return EACCES;
    return -1;
}

FsMode fs_mode(ExecutionMode m) { return m == ExecutionMode::Direct ? FsMode::ScratchActive : FsMode::InferOnly; }

}  // namespace

// ---------------------------------------------------------------------------
// Requirements and stand-ins
// ---------------------------------------------------------------------------

std::vector<AccessPrediction> structure_requirements(StructureOp op, const fs::path& target, const Credentials& who)
{
    const auto parent = parent_of(target);
    const auto name = name_of(target);
    const bool dir = is_dir_path(target);
    std::vector<AccessPrediction> out;
    switch (op) {
    case StructureOp::Locate: break;
    case StructureOp::Create:
        out.push_back(infer_access((dir ? target : parent) / ".sandboxeval-probe", AccessOp::CreateIn, who));
        break;
    case StructureOp::Move:
        out.push_back(infer_access(target, AccessOp::DeleteFrom, who));
        // A directory changing parents rewrites its own ".." entry.
        if (dir) out.push_back(infer_access(target, AccessOp::Write, who));
        break;
    case StructureOp::Copy:
        out.push_back(infer_access(target, AccessOp::Read, who));
        if (dir) out.push_back(infer_access(target, AccessOp::Execute, who));
        out.push_back(infer_access(parent / (name + ".copy"), AccessOp::CreateIn, who));
        break;
    case StructureOp::Rename:
        out.push_back(infer_access(target, AccessOp::DeleteFrom, who));
        out.push_back(infer_access(parent / (name + ".renamed"), AccessOp::CreateIn, who));
        break;
    case StructureOp::Delete: out.push_back(infer_access(target, AccessOp::DeleteFrom, who)); break;
    case StructureOp::Compress:
        out.push_back(infer_access(target, AccessOp::Read, who));
        out.push_back(infer_access(parent / (name + ".gz"), AccessOp::CreateIn, who));
        break;
    }
    return out;
}

TargetSet make_standins(const std::vector<fs::path>& originals, const fs::path& dir, Mutator& mutator)
{
    TargetSet out;
    if (int err = mutator.make_directory(dir, 0755); err != 0 && err != EEXIST)
        throw Error("cannot create stand-in directory " + dir.string() + ": " + std::strerror(err));
    const bool can_chown = Credentials::current().cap_chown;
    for (std::size_t i = 0; i < originals.size(); ++i) {
        const auto& orig = originals[i];
        struct stat st {};
        struct stat pst {};
        if (::stat(orig.c_str(), &st) != 0 || ::stat(parent_of(orig).c_str(), &pst) != 0) continue;
        auto slot = dir / std::to_string(i);
        auto parent = slot / "parent";
        auto item = parent / name_of(orig);
        mutator.make_directory(slot, 0755);
        mutator.make_directory(parent, 0700);
        if (S_ISDIR(st.st_mode)) {
            mutator.make_directory(item, 0700);
        } else {
            mutator.write_bytes(item, "#!/bin/sh\nexit 0\n");
        }
        if (can_chown) {
            mutator.chown(item, st.st_uid, st.st_gid);
            mutator.chown(parent, pst.st_uid, pst.st_gid);
        }
        mutator.chmod(item, st.st_mode & 07777);
        mutator.chmod(parent, pst.st_mode & 07777);
        out.paths.push_back(item);
    }
    return out;
}

void remove_standins(const fs::path& dir, Mutator& mutator)
{
    std::vector<fs::path> dirs{dir};
    WalkStats stats;
    mutator.chmod(dir, 0700);
    // Walk breadth-wise, opening each directory before descending.
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        walk_tree(dirs[i], 1, [&](const WalkEntry& e) {
            if (S_ISDIR(e.st.st_mode)) {
                mutator.chmod(e.path, 0700);
                dirs.push_back(e.path);
            }
        }, stats);
    }
    mutator.remove_tree(dir);
}

// ---------------------------------------------------------------------------
// Structure
// ---------------------------------------------------------------------------

Observation probe_structure(StructureOp op, const TargetSet& targets, FsMode mode, Mutator& mutator,
                            const Credentials& who)
{
    auto ev = base_evidence("fs.structure", op == StructureOp::Locate ? FsMode::InferOnly : mode);
    ev.payload["operation"] = to_string(op);
    Json rows = Json::array();

    if (op == StructureOp::Locate) {
        ev.payload["mode"] = "direct";
        int found = 0, denied = 0;
        for (const auto& t : targets.paths) {
            struct stat st {};
            int err = ::lstat(t.c_str(), &st) == 0 ? 0 : errno;
            bool exists = err == 0;
            if (exists) ++found;
            if (is_permission_errno(err)) ++denied;
            Json row{{"target", t.string()}, {"exists", exists}};
            if (err != 0 && err != ENOENT) row["error"] = errno_name(err);
            if (exists) row["type"] = S_ISDIR(st.st_mode) ? "directory" : (S_ISREG(st.st_mode) ? "file" : "other");
            rows.push_back(std::move(row));
        }
        ev.payload["targets"] = rows;
        ev.payload["located_count"] = found;
        if (found > 0) return Observation::accessed(std::move(ev));
        if (denied > 0) return Observation::denied(std::move(ev), "existence checks refused");
        return Observation::denied(std::move(ev), "no target exists");
    }

    if (mode == FsMode::InferOnly) {
        int allowed = 0;
        for (const auto& t : targets.paths) {
            auto reqs = structure_requirements(op, t, who);
            bool ok = !reqs.empty() &&
                      std::all_of(reqs.begin(), reqs.end(), [](const AccessPrediction& p) { return p.allowed(); });
            Json preds = Json::array();
            for (const auto& p : reqs) preds.push_back(prediction_json(p));
            rows.push_back({{"target", t.string()}, {"predicted", ok ? "allow" : "deny"}, {"requirements", preds}});
            allowed += ok;
        }
        ev.payload["targets"] = rows;
        return conclude(std::move(ev), allowed, static_cast<int>(targets.paths.size()), 1, "predicted");
    }

    // Create writes next to (or into) the target, and the guard checks that path itself.
    if (op != StructureOp::Create)
        for (const auto& t : targets.paths) mutator.require_inside(t);

    int succeeded = 0, permission_failures = 0;
    const auto holding = mutator.scratch_root() / ("held-" + random_token(4));
    for (const auto& t : targets.paths) {
        auto reqs = structure_requirements(op, t, who);
        const bool predicted = !reqs.empty() &&
                               std::all_of(reqs.begin(), reqs.end(), [](const AccessPrediction& p) { return p.allowed(); });
        const auto parent = parent_of(t);
        const auto name = name_of(t);
        const bool dir = is_dir_path(t);
        int err = 0;
        std::string cleanup;
        fs::path created;
        switch (op) {
        case StructureOp::Locate: break;
        case StructureOp::Create: {
            // Left in place as evidence; stand-in trees and scratch are removed by their owners.
            created = (dir ? t : parent) / (".sandboxeval-probe-" + random_token(4));
            err = mutator.create_file(created, 0600);
            break;
        }
        case StructureOp::Move: {
            mutator.make_directory(holding, 0755);
            auto dest = holding / name;
            err = mutator.rename(t, dest);
            if (err == 0) cleanup = errno_name(mutator.rename(dest, t));
            break;
        }
        case StructureOp::Copy: {
            auto copy = parent / (name + ".copy");
            if (dir) {
                int rerr = 0;
                struct stat st {};
                err = ::stat(t.c_str(), &st) == 0 ? 0 : errno;
                if (err == 0) {
                    int fd = ::open(t.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
                    rerr = fd < 0 ? errno : 0;
                    if (fd >= 0) ::close(fd);
                }
                err = rerr != 0 ? rerr : mutator.make_directory(copy, 0700);
            } else {
                std::string content = read_all(t, err);
                if (err == 0) err = mutator.write_bytes(copy, content);
            }
            if (err == 0) cleanup = errno_name(mutator.remove(copy));
            break;
        }
        case StructureOp::Rename: {
            auto renamed = parent / (name + ".renamed");
            err = mutator.rename(t, renamed);
            if (err == 0) cleanup = errno_name(mutator.rename(renamed, t));
            break;
        }
        case StructureOp::Delete: err = mutator.remove(t); break;
        case StructureOp::Compress: {
            std::string content;
            if (dir) {
                int fd = ::open(t.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
                err = fd < 0 ? errno : 0;
                if (fd >= 0) ::close(fd);
                content = name;
            } else {
                content = read_all(t, err);
            }
            auto archive = parent / (name + ".gz");
            if (err == 0) err = mutator.write_bytes(archive, gzip(content));
            if (err == 0) cleanup = errno_name(mutator.remove(archive));
            break;
        }
        }
        Json row{{"target", t.string()},
                 {"performed", to_string(op)},
                 {"result", err == 0 ? "succeeded" : "failed"},
                 {"error", errno_name(err)},
                 {"predicted", predicted ? "allow" : "deny"}};
        if (!cleanup.empty()) row["cleanup"] = cleanup;
        if (err == 0 && !created.empty()) row["created"] = created.string();
        rows.push_back(std::move(row));
        if (err == 0) ++succeeded;
        else if (is_permission_errno(err)) ++permission_failures;
    }
    if (fs::exists(holding)) mutator.remove(holding);
    ev.payload["targets"] = rows;
    return conclude(std::move(ev), succeeded, static_cast<int>(targets.paths.size()), permission_failures, "performed");
}

// ---------------------------------------------------------------------------
// Privilege
// ---------------------------------------------------------------------------

Observation probe_privilege(PrivilegeOp op, const TargetSet& targets, FsMode mode, Mutator& mutator,
                            const Credentials& who)
{
    auto ev = base_evidence("fs.privilege", mode);
    ev.payload["operation"] = to_string(op);
    Json rows = Json::array();
    auto predict = [&](const fs::path& t) {
        switch (op) {
        case PrivilegeOp::RootOwner: return infer_chown(t, 0, who);
        case PrivilegeOp::UserOwner: return infer_chown(t, who.uid, who);
        case PrivilegeOp::OpenPermission:
        case PrivilegeOp::RestrictPermission: break;
        }
        return infer_access(t, AccessOp::Chmod, who);
    };

    if (mode == FsMode::InferOnly) {
        int allowed = 0;
        for (const auto& t : targets.paths) {
            auto p = predict(t);
            rows.push_back(prediction_json(p));
            allowed += p.allowed();
        }
        ev.payload["targets"] = rows;
        return conclude(std::move(ev), allowed, static_cast<int>(targets.paths.size()), 1, "predicted");
    }

    for (const auto& t : targets.paths) mutator.require_inside(t);
    int succeeded = 0, permission_failures = 0;
    for (const auto& t : targets.paths) {
        auto p = predict(t);
        struct stat st {};
        if (::lstat(t.c_str(), &st) != 0) {
            rows.push_back({{"target", t.string()}, {"result", "failed"}, {"error", errno_name(errno)}});
            continue;
        }
        const mode_t original = st.st_mode & 07777;
        int err = 0;
        Json row{{"target", t.string()}, {"predicted", to_string(p.predicted)}};
        char buf[8];
        auto octal = [&buf](mode_t m) {
            std::snprintf(buf, sizeof buf, "%04o", static_cast<unsigned>(m));
            return std::string(buf);
        };
        switch (op) {
        case PrivilegeOp::RootOwner: err = mutator.chown(t, 0, static_cast<gid_t>(-1)); break;
        case PrivilegeOp::UserOwner: err = mutator.chown(t, who.uid, static_cast<gid_t>(-1)); break;
        case PrivilegeOp::OpenPermission:
        case PrivilegeOp::RestrictPermission: {
            const mode_t applied = op == PrivilegeOp::OpenPermission ? (original | 0777) : (original & ~mode_t(0777));
            err = mutator.chmod(t, applied);
            row["mode_before"] = octal(original);
            row["mode_applied"] = octal(applied);
            if (err == 0) {
                mutator.chmod(t, original);
                struct stat after {};
                ::lstat(t.c_str(), &after);
                row["mode_restored"] = octal(after.st_mode & 07777);
            }
            break;
        }
        }
        row["result"] = err == 0 ? "succeeded" : "failed";
        row["error"] = errno_name(err);
        rows.push_back(std::move(row));
        if (err == 0) ++succeeded;
        else if (is_permission_errno(err)) ++permission_failures;
    }
    ev.payload["targets"] = rows;
    return conclude(std::move(ev), succeeded, static_cast<int>(targets.paths.size()), permission_failures, "performed");
}

// ---------------------------------------------------------------------------
// Content
// ---------------------------------------------------------------------------

Observation probe_content(ContentOp op, const std::vector<fs::path>& roots, int max_depth, int max_listed,
                          const TargetSet& targets, FsMode mode, Mutator& mutator, const Credentials& who)
{
    const bool list_variant =
        op == ContentOp::ReadableFiles || op == ContentOp::WritableFiles || op == ContentOp::ExecutableFiles;
    auto ev = base_evidence("fs.content", list_variant ? FsMode::InferOnly : mode);
    ev.payload["operation"] = to_string(op);

    if (list_variant) {
        if (roots.empty()) throw ConfigError("content listing needs at least one root");
        const AccessOp access = op == ContentOp::ReadableFiles   ? AccessOp::Read
                                : op == ContentOp::WritableFiles ? AccessOp::Write
                                                                 : AccessOp::Execute;
        ev.payload["access"] = to_string(access);
        ev.payload["max_depth"] = max_depth;
        ev.payload["follows_symlinks"] = false;
        std::unordered_map<dev_t, unsigned long> mount_flags;
        auto flags_for = [&](const WalkEntry& e) {
            auto it = mount_flags.find(e.st.st_dev);
            if (it != mount_flags.end()) return it->second;
            struct statvfs vfs {};
            unsigned long f = ::statvfs(e.path.c_str(), &vfs) == 0 ? vfs.f_flag : 0;
            mount_flags.emplace(e.st.st_dev, f);
            return f;
        };
        Json per_root = Json::array();
        Json accessible_roots = Json::array();
        std::size_t total_files = 0, total_dirs = 0, total_accessible = 0;
        int listed = 0;
        for (const auto& root : roots) {
            WalkStats stats;
            std::size_t accessible_files = 0, accessible_dirs = 0;
            Json files = Json::array();
            int rc = walk_tree(root, max_depth, [&](const WalkEntry& e) {
                const bool reg = S_ISREG(e.st.st_mode);
                const bool dir = S_ISDIR(e.st.st_mode);
                if (!reg && !dir) return;
                // A directory counts as writable when entries can be added to it.
                auto p = infer_from_stat(e.path, e.st, access, who, flags_for(e));
                if (!p.allowed()) return;
                if (dir) {
                    ++accessible_dirs;
                    return;
                }
                ++accessible_files;
                if (listed < max_listed) {
                    files.push_back(e.path.string());
                    ++listed;
                }
            }, stats);
            Json row{{"root", root.string()}};
            if (rc != 0) {
                row["error"] = errno_name(rc);
                per_root.push_back(std::move(row));
                continue;
            }
            row["file_count"] = stats.files;
            row["directory_count"] = stats.directories;
            row["accessible_file_count"] = accessible_files;
            row["accessible_directory_count"] = accessible_dirs;
            row["skipped_count"] = stats.skipped;
            row["files"] = files;
            per_root.push_back(std::move(row));
            total_files += stats.files;
            total_dirs += stats.directories;
            total_accessible += accessible_files;
            if (accessible_files + accessible_dirs > 0) accessible_roots.push_back(root.string());
        }
        ev.payload["accessible_roots"] = accessible_roots;
        ev.payload["total_files"] = total_files;
        ev.payload["total_directories"] = total_dirs;
        ev.payload["accessible_file_count"] = total_accessible;
        ev.payload["roots"] = per_root;
        if (!accessible_roots.empty()) return Observation::accessed(std::move(ev));
        return Observation::denied(std::move(ev), "no accessible entries below any root");
    }

    const AccessOp access = op == ContentOp::Read ? AccessOp::Read
                            : op == ContentOp::Write ? AccessOp::Write
                                                     : AccessOp::Execute;
    Json rows = Json::array();

    if (mode == FsMode::InferOnly) {
        int allowed = 0;
        for (const auto& t : targets.paths) {
            auto p = infer_access(t, access, who);
            rows.push_back(prediction_json(p));
            allowed += p.allowed();
        }
        ev.payload["targets"] = rows;
        return conclude(std::move(ev), allowed, static_cast<int>(targets.paths.size()), 1, "predicted");
    }

    if (op == ContentOp::Read) {
        // Reading is not a mutation, so exemplars are read in place.
        ev.payload["mode"] = "direct";
        int ok = 0, permission_failures = 0;
        for (const auto& t : targets.paths) {
            int err = 0;
            auto bytes = read_prefix(t, 256, err);
            Json row{{"target", t.string()}, {"result", err == 0 ? "succeeded" : "failed"}, {"error", errno_name(err)}};
            if (err == 0) {
                row["bytes_read"] = bytes.size();
                row["prefix_sha256"] = sha256_hex(bytes);
                ++ok;
            } else if (is_permission_errno(err)) {
                ++permission_failures;
            }
            rows.push_back(std::move(row));
        }
        ev.payload["targets"] = rows;
        if (ok > 0) return Observation::accessed(std::move(ev));
        if (targets.paths.empty()) return Observation::denied(std::move(ev), "no targets available");
        return Observation::denied(std::move(ev), "no exemplar could be read");
    }

    for (const auto& t : targets.paths) mutator.require_inside(t);
    int succeeded = 0, permission_failures = 0;
    for (const auto& t : targets.paths) {
        auto p = infer_access(t, access, who);
        int err = 0;
        if (op == ContentOp::Write) {
            if (is_dir_path(t)) {
                auto entry = t / ".sandboxeval-write";
                err = mutator.create_file(entry, 0600);
                if (err == 0) mutator.remove(entry);
            } else {
                err = mutator.write_bytes(t, "\n", true);
            }
        } else {
            err = spawn_and_wait(t);
            if (err == -1) err = EIO;
        }
        rows.push_back({{"target", t.string()},
                        {"predicted", to_string(p.predicted)},
                        {"result", err == 0 ? "succeeded" : "failed"},
                        {"error", errno_name(err)}});
        if (err == 0) ++succeeded;
        else if (is_permission_errno(err)) ++permission_failures;
    }
    ev.payload["targets"] = rows;
    return conclude(std::move(ev), succeeded, static_cast<int>(targets.paths.size()), permission_failures, "performed");
}

// ---------------------------------------------------------------------------
// Registered bodies
// ---------------------------------------------------------------------------

namespace {

struct StandinScope {
    Mutator& mutator;
    fs::path dir;
    TargetSet targets;

    StandinScope(Mutator& m, const std::vector<fs::path>& originals, std::string_view tag)
        : mutator(m), dir(m.scratch_root() / ("standins-" + std::string(tag) + "-" + random_token(4)))
    {
        targets = make_standins(originals, dir, mutator);
    }
    ~StandinScope() { remove_standins(dir, mutator); }
    StandinScope(const StandinScope&) = delete;
    StandinScope& operator=(const StandinScope&) = delete;
};

Json standin_map(const TargetSet& standins, const std::vector<fs::path>& originals)
{
    Json m = Json::object();
    std::size_t j = 0;
    for (std::size_t i = 0; i < originals.size() && j < standins.paths.size(); ++i) {
        if (standins.paths[j].parent_path().parent_path().filename() == std::to_string(i))
            m[standins.paths[j++].string()] = originals[i].string();
    }
    return m;
}

}  // namespace

Observation run_structure_probe(StructureOp op, const ProbeContext& ctx)
{
    const auto mode = fs_mode(ctx.mode);
    if (op == StructureOp::Locate || mode == FsMode::InferOnly)
        return probe_structure(op, TargetSet{ctx.config.critical_paths}, mode, ctx.mutator);
    StandinScope scope(ctx.mutator, ctx.config.critical_paths, to_string(op));
    auto obs = probe_structure(op, scope.targets, mode, ctx.mutator);
    obs.evidence.payload["standin_for"] = standin_map(scope.targets, ctx.config.critical_paths);
    return obs;
}

Observation run_content_probe(ContentOp op, const ProbeContext& ctx)
{
    const auto& cfg = ctx.config;
    const auto mode = fs_mode(ctx.mode);
    switch (op) {
    case ContentOp::ReadableFiles:
    case ContentOp::WritableFiles:
    case ContentOp::ExecutableFiles:
        return probe_content(op, cfg.content_roots, cfg.max_depth, cfg.max_listed, {}, mode, ctx.mutator);
    case ContentOp::Read: return probe_content(op, {}, 0, 0, TargetSet{cfg.read_exemplars}, mode, ctx.mutator);
    case ContentOp::Write:
    case ContentOp::Execute: break;
    }
    const auto& originals = op == ContentOp::Write ? cfg.critical_paths : cfg.execute_exemplars;
    if (mode == FsMode::InferOnly) return probe_content(op, {}, 0, 0, TargetSet{originals}, mode, ctx.mutator);
    StandinScope scope(ctx.mutator, originals, to_string(op));
    auto obs = probe_content(op, {}, 0, 0, scope.targets, mode, ctx.mutator);
    obs.evidence.payload["standin_for"] = standin_map(scope.targets, originals);
    return obs;
}

Observation run_privilege_probe(PrivilegeOp op, const ProbeContext& ctx)
{
    const auto mode = fs_mode(ctx.mode);
    if (mode == FsMode::InferOnly)
        return probe_privilege(op, TargetSet{ctx.config.critical_paths}, mode, ctx.mutator);
    StandinScope scope(ctx.mutator, ctx.config.critical_paths, to_string(op));
    auto obs = probe_privilege(op, scope.targets, mode, ctx.mutator);
    obs.evidence.payload["standin_for"] = standin_map(scope.targets, ctx.config.critical_paths);
    return obs;
}

}  // namespace sandboxeval
