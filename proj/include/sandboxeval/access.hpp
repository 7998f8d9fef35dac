#pragma once

#include <sys/stat.h>
#include <sys/types.h>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sandboxeval {

/// Operations whose feasibility can be predicted from ownership and mode bits.
///
/// Read/Write/Execute act on the target itself (for directories: list,
/// add an entry, search). CreateIn and DeleteFrom act on the target's name
/// inside its parent directory. Chown means handing the target to a
/// different user.
enum class AccessOp { Read, Write, Execute, CreateIn, DeleteFrom, Chmod, Chown };

std::string_view to_string(AccessOp op);
std::optional<AccessOp> parse_access_op(std::string_view s);

enum class Prediction { Allow, Deny };

std::string_view to_string(Prediction p);

struct AccessPrediction {
    AccessOp operation;
    std::filesystem::path target;
    Prediction predicted;
    std::string basis;  // which bit or ownership fact decided

    bool allowed() const { return predicted == Prediction::Allow; }
};

/// The identity the kernel checks file access against.
struct Credentials {
    uid_t uid = 0;
    gid_t gid = 0;
    std::vector<gid_t> groups;  // supplementary groups
    bool cap_dac_override = false;
    bool cap_dac_read_search = false;
    bool cap_fowner = false;
    bool cap_chown = false;

    /// Effective uid/gid, supplementary groups and effective capabilities of
    /// the calling process.
    static Credentials current();

    bool in_group(gid_t g) const;
};

/// Predicts whether `op` on `target` would succeed for `who`, reading only
/// ownership, mode bits and mount flags. Never throws; unreachable targets
/// are predicted Deny.
AccessPrediction infer_access(const std::filesystem::path& target, AccessOp op, const Credentials& who);
AccessPrediction infer_access(const std::filesystem::path& target, AccessOp op);

/// Same judgement for an object already reached by a directory walk:
/// traversal is taken as established and `st` is the object's own lstat.
/// `mount_flags` carries statvfs f_flag of the containing filesystem.
AccessPrediction infer_from_stat(const std::filesystem::path& target, const struct stat& st, AccessOp op,
                                 const Credentials& who, unsigned long mount_flags = 0);

/// chown(target, new_owner): allowed with CAP_CHOWN, or for a caller who
/// owns the target and leaves the owner unchanged.
AccessPrediction infer_chown(const std::filesystem::path& target, uid_t new_owner, const Credentials& who);

}  // namespace sandboxeval
