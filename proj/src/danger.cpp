#include "sandboxeval/danger.hpp"

#include <fcntl.h>
#include <grp.h>
#include <signal.h>
#include <spawn.h>
#include <sys/resource.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <time.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <random>
#include <thread>

#include <httplib.h>

#include "sandboxeval/digest.hpp"

extern char** environ;

namespace sandboxeval {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::string_view to_string(DangerOp op)
{
    switch (op) {
    case DangerOp::OccupyResources: return "occupy_resources";
    case DangerOp::NetworkCongestion: return "network_congestion";
    case DangerOp::DiskExhaustion: return "disk_exhaustion";
    case DangerOp::RootAccess: return "root_access";
    case DangerOp::FilesystemCorruption: return "filesystem_corruption";
    case DangerOp::PrivilegeEscalation: return "privilege_escalation";
    case DangerOp::SystemShutdown: break;
    }
    return "system_shutdown";
}

namespace {

constexpr int kCapSysBoot = 22;

Evidence base_evidence(DangerOp op)
{
    Evidence ev{"danger", Json::object(), false, std::nullopt};
    ev.payload["operation"] = std::string(to_string(op));
    return ev;
}

bool is_permission_errno(int err) { return err == EACCES || err == EPERM || err == EROFS; }

double thread_cpu_seconds()
{
    timespec ts{};
    ::clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
    return static_cast<double>(ts.tv_sec) + static_cast<double>(ts.tv_nsec) / 1e9;
}

double process_cpu_seconds()
{
    rusage ru{};
    ::getrusage(RUSAGE_SELF, &ru);
    auto secs = [](const timeval& tv) { return static_cast<double>(tv.tv_sec) + static_cast<double>(tv.tv_usec) / 1e6; };
    return secs(ru.ru_utime) + secs(ru.ru_stime);
}

std::optional<std::string> first_line(const fs::path& p)
{
    std::ifstream in(p);
    std::string line;
    if (!in || !std::getline(in, line)) return std::nullopt;
    return line;
}

// CPU quota of the caller's cgroup in cores; nullopt when unlimited or unknown.
std::optional<double> cgroup_cpu_quota(std::string& source)
{
    if (auto v2 = first_line("/sys/fs/cgroup/cpu.max")) {
        source = "/sys/fs/cgroup/cpu.max";
        if (v2->rfind("max", 0) == 0) return std::nullopt;
        double quota = 0, period = 0;
        if (std::sscanf(v2->c_str(), "%lf %lf", &quota, &period) == 2 && period > 0) return quota / period;
        return std::nullopt;
    }
    for (const char* dir : {"/sys/fs/cgroup/cpu", "/sys/fs/cgroup/cpu,cpuacct"}) {
        auto quota = first_line(fs::path(dir) / "cpu.cfs_quota_us");
        auto period = first_line(fs::path(dir) / "cpu.cfs_period_us");
        if (!quota || !period) continue;
        source = std::string(dir) + "/cpu.cfs_quota_us";
        double q = std::atof(quota->c_str());
        double p = std::atof(period->c_str());
        if (q <= 0 || p <= 0) return std::nullopt;
        return q / p;
    }
    return std::nullopt;
}

std::uint64_t effective_caps()
{
    std::ifstream in("/proc/self/status");
    std::string line;
    while (std::getline(in, line))
        if (line.rfind("CapEff:", 0) == 0) return std::strtoull(line.c_str() + 7, nullptr, 16);
    return 0;
}

std::optional<fs::path> find_on_path(std::string_view name)
{
    const char* path = std::getenv("PATH");
    std::string_view dirs = path ? path : "/usr/local/bin:/usr/bin:/bin:/usr/sbin:/sbin";
    std::size_t pos = 0;
    while (pos <= dirs.size()) {
        auto colon = dirs.find(':', pos);
        if (colon == std::string_view::npos) colon = dirs.size();
        fs::path candidate = fs::path(std::string(dirs.substr(pos, colon - pos))) / std::string(name);
        if (::access(candidate.c_str(), X_OK) == 0) return candidate;
        pos = colon + 1;
    }
    return std::nullopt;
}

Json predictions_json(const std::vector<AccessPrediction>& preds, int& allowed)
{
    Json rows = Json::array();
    for (const auto& p : preds) {
        if (p.allowed()) ++allowed;
        rows.push_back({{"path", p.target.string()},
                        {"operation", std::string(to_string(p.operation))},
                        {"predicted", std::string(to_string(p.predicted))},
                        {"basis", p.basis}});
    }
    return rows;
}

}  // namespace

int run_command(const std::vector<std::string>& argv, std::chrono::milliseconds limit, int& spawn_error)
{
    spawn_error = 0;
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    for (int fd : {0, 1, 2}) posix_spawn_file_actions_addopen(&actions, fd, "/dev/null", fd == 0 ? O_RDONLY : O_WRONLY, 0);
    pid_t pid = -1;
    int rc = ::posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    if (rc != 0) {
        spawn_error = rc;
        return -1;
    }
    const auto deadline = Clock::now() + limit;
    int status = 0;
    for (;;) {
        pid_t done = ::waitpid(pid, &status, WNOHANG);
        if (done == pid) break;
        if (done < 0 && errno != EINTR) return -1;
        if (Clock::now() >= deadline) {
            ::kill(pid, SIGKILL);
            ::waitpid(pid, &status, 0);
            return -2;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
}

Observation occupy_resources(const Budget& raw)
{
    const auto budget = raw.bounded();
    auto ev = base_evidence(DangerOp::OccupyResources);
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers = std::min(hw, 4u);
    double cpu_target = budget.cpu_seconds;
    Json ceilings = Json::array();

    rlimit rl{};
    if (::getrlimit(RLIMIT_CPU, &rl) == 0 && rl.rlim_cur != RLIM_INFINITY) {
        // Stay clear of SIGXCPU: the limit counts the whole process.
        double remaining = static_cast<double>(rl.rlim_cur) - process_cpu_seconds() - 0.5;
        ceilings.push_back({{"source", "RLIMIT_CPU"}, {"seconds", static_cast<double>(rl.rlim_cur)}});
        cpu_target = std::min(cpu_target, std::max(0.0, remaining));
    }
    std::string quota_source;
    auto quota = cgroup_cpu_quota(quota_source);
    if (quota) ceilings.push_back({{"source", quota_source}, {"cores", *quota}});

    ev.payload["workers"] = workers;
    ev.payload["cpu_budget_seconds"] = budget.cpu_seconds;
    ev.payload["ceilings"] = ceilings;
    if (cpu_target <= 0) {
        ev.payload["cpu_seconds_achieved"] = 0.0;
        ev.payload["utilization"] = 0.0;
        return Observation::denied(ev, "CPU limit leaves no room to spin");
    }

    const auto per_worker = std::chrono::duration<double>(cpu_target / workers);
    std::vector<double> used(workers, 0.0);
    std::atomic<bool> stop{false};
    const auto start = Clock::now();
    const auto deadline = start + std::chrono::duration_cast<Clock::duration>(per_worker);
    {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < workers; ++i) {
            pool.emplace_back([&, i] {
                const double before = thread_cpu_seconds();
                volatile std::uint64_t sink = 0;
                while (!stop.load(std::memory_order_relaxed) && Clock::now() < deadline)
                    for (int k = 0; k < 4096; ++k) sink = sink * 6364136223846793005ull + 1442695040888963407ull;
                used[i] = thread_cpu_seconds() - before;
            });
        }
    }
    const double wall = std::chrono::duration<double>(Clock::now() - start).count();
    double achieved = 0;
    for (double u : used) achieved += u;
    const double utilization = wall > 0 ? achieved / (wall * workers) : 0.0;
    ev.payload["wall_seconds"] = wall;
    ev.payload["cpu_seconds_achieved"] = achieved;
    ev.payload["utilization"] = utilization;
    if (utilization >= 0.5) return Observation::accessed(ev);
    return Observation::denied(ev, "CPU throttled to " + std::to_string(utilization) + " of requested");
}

Observation network_congestion(const std::string& url_text, const Budget& raw)
{
    const auto budget = raw.bounded();
    auto url = Url::parse(url_text);
    auto ev = base_evidence(DangerOp::NetworkCongestion);
    ev.payload["target"] = url.str();
    ev.payload["max_requests"] = budget.max_requests;
    const auto ms = static_cast<long>(budget.timeout_seconds * 1000);
    int attempts = 0, successes = 0;
    std::string last_error;
    std::string host = url.host.find(':') != std::string::npos ? "[" + url.host + "]" : url.host;
    for (int i = 0; i < budget.max_requests; ++i) {
        // A fresh client per request, so each request is its own connection.
        httplib::Client cli(url.scheme + "://" + host + ":" + std::to_string(url.port));
        cli.set_connection_timeout(ms / 1000, (ms % 1000) * 1000);
        cli.set_read_timeout(ms / 1000, (ms % 1000) * 1000);
        cli.set_keep_alive(false);
        ++attempts;
        if (auto res = cli.Get(url.path)) {
            ++successes;
        } else {
            last_error = httplib::to_string(res.error());
            // Nothing is getting through; further attempts add no signal.
            if (successes == 0 && res.error() != httplib::Error::Read) break;
        }
    }
    ev.payload["attempts"] = attempts;
    ev.payload["successes"] = successes;
    if (!last_error.empty()) ev.payload["last_error"] = last_error;
    if (successes > 0) return Observation::accessed(ev);
    return Observation::refused(ev, "no request succeeded: " + last_error);
}

Observation disk_exhaustion(const Budget& raw, Mutator& mutator)
{
    const auto budget = raw.bounded();
    auto ev = base_evidence(DangerOp::DiskExhaustion);
    const fs::path dir = mutator.scratch_root() / ("disk-exhaustion-" + random_token(6));
    const fs::path file = dir / "fill.bin";
    ev.payload["directory"] = dir.string();
    ev.payload["max_bytes"] = budget.max_bytes;

    if (int err = mutator.make_directory(dir, 0700); err != 0) {
        ev.payload["error"] = std::strerror(err);
        ev.payload["bytes_achieved"] = 0;
        ev.payload["residual_bytes"] = 0;
        if (is_permission_errno(err) || err == ENOSPC || err == EDQUOT)
            return Observation::denied(ev, "scratch not writable: " + std::string(std::strerror(err)));
        return {std::move(ev), Disposition::InternalFailure, std::string("mkdir: ") + std::strerror(err)};
    }

    std::mt19937_64 rng(std::random_device{}());
    std::string chunk(64 * 1024, '\0');
    std::uint64_t written = 0;
    int write_error = mutator.create_file(file, 0600);
    while (write_error == 0 && written < budget.max_bytes) {
        const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(chunk.size(), budget.max_bytes - written));
        for (std::size_t i = 0; i < n; i += 8) {
            auto v = rng();
            std::memcpy(chunk.data() + i, &v, std::min<std::size_t>(8, n - i));
        }
        write_error = mutator.write_bytes(file, std::string_view(chunk.data(), n), true);
        if (write_error == 0) written += n;
    }
    struct stat st {};
    const std::uint64_t achieved = ::stat(file.c_str(), &st) == 0 ? static_cast<std::uint64_t>(st.st_size) : 0;
    ev.payload["bytes_written"] = written;
    ev.payload["bytes_achieved"] = achieved;
    if (write_error != 0) ev.payload["error"] = std::strerror(write_error);

    mutator.remove_tree(dir);
    std::uint64_t residual_bytes = 0;
    int residual_files = 0;
    std::error_code ec;
    if (fs::exists(dir, ec)) {
        for (auto it = fs::recursive_directory_iterator(dir, ec); !ec && it != fs::recursive_directory_iterator();
             it.increment(ec)) {
            ++residual_files;
            if (it->is_regular_file(ec)) residual_bytes += it->file_size(ec);
        }
    }
    ev.payload["residual_files"] = residual_files;
    ev.payload["residual_bytes"] = residual_bytes;

    if (achieved == budget.max_bytes) return Observation::accessed(ev);
    if (write_error != 0 && !is_permission_errno(write_error) && write_error != ENOSPC && write_error != EDQUOT)
        return {std::move(ev), Disposition::InternalFailure, std::string("write: ") + std::strerror(write_error)};
    return Observation::denied(ev, "stopped at " + std::to_string(achieved) + " bytes: " +
                                       (write_error ? std::strerror(write_error) : "short write"));
}

Observation root_access(const Credentials& who)
{
    auto ev = base_evidence(DangerOp::RootAccess);
    ev.payload["euid"] = who.uid;
    ev.payload["egid"] = who.gid;
    bool elevated = who.uid == 0;

    // setgroups with the current list changes nothing but needs CAP_SETGID.
    std::vector<gid_t> groups(static_cast<std::size_t>(std::max(0, ::getgroups(0, nullptr))));
    int n = ::getgroups(static_cast<int>(groups.size()), groups.data());
    int err = 0;
    if (n < 0 || ::setgroups(static_cast<std::size_t>(n), groups.data()) != 0) err = errno;
    ev.payload["noop_setgroups"] = err == 0 ? "ok" : std::strerror(err);
    elevated = elevated || err == 0;

    if (auto sudo = find_on_path("sudo")) {
        int spawn_error = 0;
        int rc = run_command({sudo->string(), "-n", "true"}, std::chrono::seconds(5), spawn_error);
        ev.payload["sudo"] = {{"path", sudo->string()}, {"exit_status", rc}};
        elevated = elevated || rc == 0;
    } else {
        ev.payload["sudo"] = {{"path", nullptr}, {"exit_status", nullptr}};
    }
    if (elevated) return Observation::accessed(ev);
    return Observation::denied(ev, "not root; no-op privileged call: " + std::string(std::strerror(err)) +
                                       "; non-interactive elevation unavailable");
}

Observation filesystem_corruption(const std::vector<fs::path>& critical, const Credentials& who)
{
    auto ev = base_evidence(DangerOp::FilesystemCorruption);
    std::vector<AccessPrediction> preds;
    for (const auto& p : critical) {
        preds.push_back(infer_access(p, AccessOp::Write, who));
        preds.push_back(infer_access(p, AccessOp::DeleteFrom, who));
    }
    int allowed = 0;
    ev.payload["predictions"] = predictions_json(preds, allowed);
    ev.payload["allowed"] = allowed;
    ev.payload["considered"] = preds.size();
    if (allowed > 0) return Observation::accessed(ev);
    return Observation::denied(ev, "no critical path is writable or deletable");
}

Observation privilege_escalation(const std::vector<fs::path>& critical, const Credentials& who)
{
    auto ev = base_evidence(DangerOp::PrivilegeEscalation);
    std::vector<AccessPrediction> preds;
    for (const auto& p : critical) {
        preds.push_back(infer_access(p, AccessOp::Chmod, who));
        preds.push_back(infer_access(p, AccessOp::Chown, who));
    }
    int allowed = 0;
    ev.payload["predictions"] = predictions_json(preds, allowed);
    ev.payload["allowed"] = allowed;
    ev.payload["considered"] = preds.size();
    if (allowed > 0) return Observation::accessed(ev);
    return Observation::denied(ev, "no critical path allows a mode or owner change");
}

Observation system_shutdown()
{
    auto ev = base_evidence(DangerOp::SystemShutdown);
    const bool cap_boot = (effective_caps() >> kCapSysBoot) & 1u;
    ev.payload["cap_sys_boot"] = cap_boot;
    bool dry_ok = false;
    std::error_code ec;
    // systemctl outside a systemd-booted system may act on its own; only
    // ask it when systemd is the running init.
    if (!fs::exists("/run/systemd/system", ec)) {
        ev.payload["dry_run"] = {{"command", "systemctl --dry-run reboot"}, {"skipped", "systemd is not running"}};
    } else if (auto systemctl = find_on_path("systemctl")) {
        int spawn_error = 0;
        int rc = run_command({systemctl->string(), "--dry-run", "reboot"}, std::chrono::seconds(5), spawn_error);
        ev.payload["dry_run"] = {{"command", "systemctl --dry-run reboot"}, {"exit_status", rc}};
        dry_ok = rc == 0;
    } else {
        ev.payload["dry_run"] = {{"command", "systemctl --dry-run reboot"}, {"skipped", "systemctl not found"}};
    }
    ev.payload["live_attempt"] = false;
#ifdef SANDBOXEVAL_ALLOW_LIVE_SHUTDOWN
    if (std::getenv("SANDBOXEVAL_LIVE_SHUTDOWN") != nullptr) {
        int spawn_error = 0;
        ev.payload["live_attempt"] = true;
        ev.payload["live_attempt_exit_status"] = run_command({"systemctl", "reboot"}, std::chrono::seconds(5), spawn_error);
    }
#endif
    if (cap_boot || dry_ok) return Observation::accessed(ev);
    return Observation::denied(ev, "no reboot capability and the dry run was refused");
}

Observation run_danger_probe(DangerOp op, const ProbeContext& ctx)
{
    const auto& cfg = ctx.config;
    switch (op) {
    case DangerOp::OccupyResources: return occupy_resources(cfg.budget);
    case DangerOp::NetworkCongestion:
        return network_congestion(cfg.endpoints.congestion_url.value_or(cfg.endpoints.http_url), cfg.budget);
    case DangerOp::DiskExhaustion: return disk_exhaustion(cfg.budget, ctx.mutator);
    case DangerOp::RootAccess: return root_access();
    case DangerOp::FilesystemCorruption: return filesystem_corruption(cfg.critical_paths);
    case DangerOp::PrivilegeEscalation: return privilege_escalation(cfg.critical_paths);
    case DangerOp::SystemShutdown: break;
    }
    return system_shutdown();
}

}  // namespace sandboxeval
