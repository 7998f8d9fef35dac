#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sandboxeval/model.hpp"

namespace sandboxeval {

struct SentinelOptions {
    std::vector<std::filesystem::path> exclude;  // subtrees left out (the scratch root)
    std::uint64_t max_content_bytes = 1ull << 20;  // larger files contribute metadata only
    int max_depth = 64;
    bool keep_entries = false;  // fill SentinelDigest::entry_digests
};

struct SkippedRoot {
    std::string root;
    std::string reason;
    friend bool operator==(const SkippedRoot&, const SkippedRoot&) = default;
};

struct SentinelDigest {
    std::string hex;  // sha256 over the sorted per-entry digests
    std::size_t entries = 0;
    std::size_t hashed_files = 0;
    std::vector<SkippedRoot> skipped_roots;
    std::vector<std::string> excluded;  // excluded subtrees and volatile mounts met on the way
    std::map<std::string, std::string> entry_digests;  // path -> record digest, when kept

    Json to_json() const;
};

/// One record per entry below (and including) each root: path, size, mode,
/// owner, and a content hash for regular files up to max_content_bytes.
/// The result does not depend on visiting order. Content hashing runs on
/// an OpenMP team.
SentinelDigest sentinel_hash(const std::vector<std::filesystem::path>& roots, const SentinelOptions& opts = {});

/// Paths added, removed or changed between two digests taken with
/// keep_entries, sorted.
std::vector<std::string> changed_paths(const SentinelDigest& before, const SentinelDigest& after);

/// Single-threaded reference; must agree with sentinel_hash bit for bit.
SentinelDigest sentinel_hash_serial(const std::vector<std::filesystem::path>& roots,
                                    const SentinelOptions& opts = {});

}  // namespace sandboxeval
