#pragma once

#include <sys/types.h>

#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "sandboxeval/config.hpp"
#include "sandboxeval/model.hpp"

namespace sandboxeval {

/// What a probe body observed, before the executor maps it to an Outcome.
enum class Disposition {
    PayloadObtained,    // primary payload collected -> Accessed
    PermissionFailure,  // EACCES/EPERM or equivalent -> Denied
    Refused,            // connection refused, unreachable, network timeout -> Denied
    SourceUnavailable,  // facet source absent on this platform -> Denied
    InternalFailure,    // probe could not classify what happened -> Unknown
};

std::string_view to_string(Disposition d);

struct Observation {
    Evidence evidence;
    Disposition disposition = Disposition::InternalFailure;
    std::string detail;

    static Observation accessed(Evidence e, std::string detail = {});
    static Observation denied(Evidence e, std::string detail);
    static Observation refused(Evidence e, std::string detail);
    static Observation unavailable(Evidence e, std::string detail = "source unavailable");
};

/// Every mutating filesystem call made by a probe goes through here. The
/// guard refuses any path that does not resolve inside the scratch root and
/// keeps a log of attempted mutations for tests.
class Mutator {
public:
    explicit Mutator(std::filesystem::path scratch_root);

    const std::filesystem::path& scratch_root() const noexcept { return root_; }

    /// Throws SafetyViolation unless `p` resolves inside the scratch root.
    void require_inside(const std::filesystem::path& p) const;
    bool is_inside(const std::filesystem::path& p) const;

    // Each returns 0 or an errno value.
    int create_file(const std::filesystem::path& p, mode_t mode = 0644);
    int make_directory(const std::filesystem::path& p, mode_t mode = 0755);
    int write_bytes(const std::filesystem::path& p, std::string_view bytes, bool append = false);
    int rename(const std::filesystem::path& from, const std::filesystem::path& to);
    int remove(const std::filesystem::path& p);
    int remove_tree(const std::filesystem::path& p);
    int chmod(const std::filesystem::path& p, mode_t mode);
    int chown(const std::filesystem::path& p, uid_t uid, gid_t gid);

    std::vector<std::string> attempts() const;

    /// Appends attempts logged by a copy of this guard in a probe subprocess.
    void adopt(const std::vector<std::string>& attempts);

private:
    void record(std::string_view op, const std::filesystem::path& p);

    std::filesystem::path root_;
    mutable std::mutex mu_;
    std::vector<std::string> attempts_;
};

/// Inputs available to a probe body.
struct ProbeContext {
    const RunConfig& config;
    ExecutionMode mode;
    Mutator& mutator;
};

using ProbeBody = std::function<Observation(const ProbeContext&)>;

/// The registered implementation for each of the 51 probes.
ProbeBody default_body(const ProbeId& id);

}  // namespace sandboxeval
