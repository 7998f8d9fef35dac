#pragma once

#include <sys/stat.h>

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <string>

namespace sandboxeval {

struct WalkEntry {
    std::filesystem::path path;
    struct stat st;
    int depth;  // 1 for direct children of the root
};

struct WalkStats {
    std::size_t entries = 0;
    std::size_t files = 0;
    std::size_t directories = 0;
    std::size_t skipped = 0;  // directories that could not be opened
    std::map<std::string, std::string> mounts;  // mount point -> filesystem type, for crossed mounts
};

/// Depth-first walk below `root` (the root itself is not visited). Symbolic
/// links are reported but never followed; directories at `max_depth` are
/// not descended into. Unreadable directories are counted and skipped.
/// Returns the errno of opening `root` itself, or 0.
int walk_tree(const std::filesystem::path& root, int max_depth, const std::function<void(const WalkEntry&)>& visit,
              WalkStats& stats);

/// Name of the filesystem type holding `p` ("proc", "sysfs", "tmpfs", ...).
std::string filesystem_type(const std::filesystem::path& p);

/// True for kernel pseudo-filesystems whose contents change on every read.
bool is_volatile_filesystem(const std::string& type);

}  // namespace sandboxeval
