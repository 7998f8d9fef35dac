#include "sandboxeval/walk.hpp"

#include <dirent.h>
#include <fcntl.h>
#include <linux/magic.h>
#include <sys/vfs.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <vector>

namespace sandboxeval {

namespace fs = std::filesystem;

std::string filesystem_type(const fs::path& p)
{
    struct statfs sfs {};
    if (::statfs(p.c_str(), &sfs) != 0) return "unknown";
    switch (static_cast<unsigned long>(sfs.f_type)) {
    case PROC_SUPER_MAGIC: return "proc";
    case SYSFS_MAGIC: return "sysfs";
    case TMPFS_MAGIC: return "tmpfs";
    case DEVPTS_SUPER_MAGIC: return "devpts";
    case CGROUP_SUPER_MAGIC: return "cgroup";
    case CGROUP2_SUPER_MAGIC: return "cgroup2";
    case DEBUGFS_MAGIC: return "debugfs";
    case TRACEFS_MAGIC: return "tracefs";
    case SECURITYFS_MAGIC: return "securityfs";
    case BPF_FS_MAGIC: return "bpf";
    case 0x19800202: return "mqueue";
    case HUGETLBFS_MAGIC: return "hugetlbfs";
    case OVERLAYFS_SUPER_MAGIC: return "overlay";
    case EXT4_SUPER_MAGIC: return "ext4";
    case XFS_SUPER_MAGIC: return "xfs";
    case BTRFS_SUPER_MAGIC: return "btrfs";
    case NFS_SUPER_MAGIC: return "nfs";
    case RAMFS_MAGIC: return "ramfs";
    case 0x65735546: return "fuse";
    case 0x62656570: return "configfs";
    default: break;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "0x%lx", static_cast<unsigned long>(sfs.f_type));
    return buf;
}

bool is_volatile_filesystem(const std::string& type)
{
    return type == "proc" || type == "sysfs" || type == "devpts" || type == "cgroup" || type == "cgroup2" ||
           type == "debugfs" || type == "tracefs" || type == "securityfs" || type == "bpf" || type == "mqueue" ||
           type == "configfs";
}

int walk_tree(const fs::path& root, int max_depth, const std::function<void(const WalkEntry&)>& visit,
              WalkStats& stats)
{
    struct Frame {
        fs::path dir;
        int depth;
        dev_t dev;
    };

    struct stat root_st {};
    if (::stat(root.c_str(), &root_st) != 0) return errno;
    if (!S_ISDIR(root_st.st_mode)) return ENOTDIR;
    {
        DIR* probe = ::opendir(root.c_str());
        if (probe == nullptr) return errno;
        ::closedir(probe);
    }

    std::vector<Frame> stack{{root, 0, root_st.st_dev}};
    while (!stack.empty()) {
        Frame frame = std::move(stack.back());
        stack.pop_back();

        DIR* d = ::opendir(frame.dir.c_str());
        if (d == nullptr) {
            ++stats.skipped;
            continue;
        }
        const int dfd = ::dirfd(d);
        std::vector<Frame> children;
        while (auto* ent = ::readdir(d)) {
            const char* name = ent->d_name;
            if (std::strcmp(name, ".") == 0 || std::strcmp(name, "..") == 0) continue;
            WalkEntry e{frame.dir / name, {}, frame.depth + 1};
            if (::fstatat(dfd, name, &e.st, AT_SYMLINK_NOFOLLOW) != 0) continue;
            ++stats.entries;
            if (S_ISDIR(e.st.st_mode)) {
                ++stats.directories;
                if (e.st.st_dev != frame.dev) stats.mounts[e.path.string()] = filesystem_type(e.path);
                if (e.depth < max_depth) children.push_back({e.path, e.depth, e.st.st_dev});
            } else if (S_ISREG(e.st.st_mode)) {
                ++stats.files;
            }
            visit(e);
        }
        ::closedir(d);
        for (auto it = children.rbegin(); it != children.rend(); ++it) stack.push_back(std::move(*it));
    }
    return 0;
}

}  // namespace sandboxeval
