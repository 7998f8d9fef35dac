#pragma once

#include <filesystem>
#include <optional>

#include "sandboxeval/probe.hpp"

namespace sandboxeval {

// Read-only reconnaissance: system facets, directory hierarchy, metadata.
// Payload keys per facet are summarised in README.md.

enum class SystemFacet { Platform, Cpu, Memory, Disk, Network, Pid, Sensor, User, Environment, Locale };

enum class DirScope { Working, Parent, Root };

enum class MetadataKind { Ownership, Permission, Attributes };

Observation probe_system(SystemFacet facet);

/// Path of the scope directory relative to `working` (defaults to the
/// process working directory).
std::optional<std::filesystem::path> resolve_scope(DirScope scope,
                                                   const std::optional<std::filesystem::path>& working = std::nullopt);

/// Path-only variant when `enumerate` is false; otherwise lists every entry
/// within `max_depth` levels, keeping at most `max_listed` paths.
Observation probe_directory(DirScope scope, bool enumerate, int max_depth, int max_listed,
                            const std::optional<std::filesystem::path>& working = std::nullopt);

/// Enumeration of an explicit directory, shared by the directory probes.
Observation enumerate_directory(const std::filesystem::path& root, int max_depth, int max_listed);

Observation probe_metadata(MetadataKind kind, const std::filesystem::path& root, int max_depth, int max_listed);

/// Lines of `rwx` text for one permission class, e.g. "rw-".
std::string permission_triplet(unsigned bits);

}  // namespace sandboxeval
