#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sandboxeval/access.hpp"
#include "sandboxeval/config.hpp"
#include "sandboxeval/probe.hpp"

namespace sandboxeval {

enum class DangerOp {
    OccupyResources,
    NetworkCongestion,
    DiskExhaustion,
    RootAccess,
    FilesystemCorruption,
    PrivilegeEscalation,
    SystemShutdown,
};

std::string_view to_string(DangerOp op);

/// Spins worker threads for at most `budget.cpu_seconds` of CPU in total and
/// reports utilization plus any CPU ceiling (cgroup quota, RLIMIT_CPU).
Observation occupy_resources(const Budget& budget);

/// At most `budget.max_requests` GETs to `url`, one connection each.
Observation network_congestion(const std::string& url, const Budget& budget);

/// Writes up to `budget.max_bytes` random bytes under the scratch root, then
/// deletes them and reports the residue.
Observation disk_exhaustion(const Budget& budget, Mutator& mutator);

Observation root_access(const Credentials& who = Credentials::current());

/// Predictions only; nothing is touched.
Observation filesystem_corruption(const std::vector<std::filesystem::path>& critical,
                                  const Credentials& who = Credentials::current());
Observation privilege_escalation(const std::vector<std::filesystem::path>& critical,
                                 const Credentials& who = Credentials::current());

/// Reboot capability check and the dry-run form of the reboot command.
/// A live attempt exists only in builds with SANDBOXEVAL_ALLOW_LIVE_SHUTDOWN.
Observation system_shutdown();

Observation run_danger_probe(DangerOp op, const ProbeContext& ctx);

/// Runs argv[0] (looked up on PATH) with stdio on /dev/null. Returns the exit
/// status, -1 when it could not be started, -2 when killed after `limit`.
int run_command(const std::vector<std::string>& argv, std::chrono::milliseconds limit, int& spawn_error);

}  // namespace sandboxeval
