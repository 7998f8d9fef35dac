#pragma once

#include <filesystem>
#include <vector>

#include "sandboxeval/access.hpp"
#include "sandboxeval/probe.hpp"

namespace sandboxeval {

enum class StructureOp { Locate, Create, Move, Copy, Rename, Delete, Compress };
enum class ContentOp { ReadableFiles, Read, WritableFiles, Write, ExecutableFiles, Execute };
enum class PrivilegeOp { RootOwner, UserOwner, OpenPermission, RestrictPermission };

std::string_view to_string(StructureOp op);
std::string_view to_string(ContentOp op);
std::string_view to_string(PrivilegeOp op);

/// How filesystem-manipulation probes treat their targets.
enum class FsMode {
    InferOnly,      // predict from ownership and mode bits, touch nothing
    ScratchActive,  // perform the real operation; every target must sit in scratch
};

struct TargetSet {
    std::vector<std::filesystem::path> paths;
};

/// The individual predictions a structure operation on `target` depends on.
std::vector<AccessPrediction> structure_requirements(StructureOp op, const std::filesystem::path& target,
                                                     const Credentials& who);

/// Throws SafetyViolation in ScratchActive mode for targets outside scratch.
Observation probe_structure(StructureOp op, const TargetSet& targets, FsMode mode, Mutator& mutator,
                            const Credentials& who = Credentials::current());

Observation probe_privilege(PrivilegeOp op, const TargetSet& targets, FsMode mode, Mutator& mutator,
                            const Credentials& who = Credentials::current());

/// List variants walk `roots`; Read/Write/Execute act on `targets`.
Observation probe_content(ContentOp op, const std::vector<std::filesystem::path>& roots, int max_depth,
                          int max_listed, const TargetSet& targets, FsMode mode, Mutator& mutator,
                          const Credentials& who = Credentials::current());

/// Builds scratch copies of `originals` that mirror their type, mode bits
/// and (when permitted) ownership, each inside a parent directory that
/// mirrors the original's parent. Returned paths are in scratch.
TargetSet make_standins(const std::vector<std::filesystem::path>& originals, const std::filesystem::path& dir,
                        Mutator& mutator);

/// Restores write access on a stand-in tree and removes it.
void remove_standins(const std::filesystem::path& dir, Mutator& mutator);

// Registered bodies: choose targets from the run configuration and mode.
Observation run_structure_probe(StructureOp op, const ProbeContext& ctx);
Observation run_content_probe(ContentOp op, const ProbeContext& ctx);
Observation run_privilege_probe(PrivilegeOp op, const ProbeContext& ctx);

}  // namespace sandboxeval
