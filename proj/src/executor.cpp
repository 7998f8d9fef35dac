#include "sandboxeval/executor.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/utsname.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <ctime>
#include <system_error>
#include <thread>

#include "sandboxeval/digest.hpp"
#include "sandboxeval/registry.hpp"
#include "sandboxeval/sentinel.hpp"

namespace sandboxeval {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using std::chrono::milliseconds;

Outcome classify(Completion::Kind kind, Disposition d, SafetyClass safety)
{
    switch (kind) {
    case Completion::Kind::TimedOut: return safety == SafetyClass::NetworkEgress ? Outcome::Denied : Outcome::Unknown;
    case Completion::Kind::Crashed: return Outcome::Unknown;
    case Completion::Kind::Observed: break;
    }
    switch (d) {
    case Disposition::PayloadObtained: return Outcome::Accessed;
    case Disposition::PermissionFailure:
    case Disposition::Refused:
    case Disposition::SourceUnavailable: return Outcome::Denied;
    case Disposition::InternalFailure: break;
    }
    return Outcome::Unknown;
}

namespace {

bool permission_errno(int e) { return e == EACCES || e == EPERM; }

Observation failure(Disposition d, std::string detail)
{
    return {Evidence{}, d, std::move(detail)};
}

}  // namespace

Observation observe(const ProbeBody& body, const ProbeContext& ctx)
{
    try {
        return body(ctx);
    } catch (const AccessDenied& e) {
        return failure(Disposition::PermissionFailure, e.what());
    } catch (const SafetyViolation& e) {
        return failure(Disposition::InternalFailure, std::string("safety violation: ") + e.what());
    } catch (const fs::filesystem_error& e) {
        const int code = e.code().value();
        return failure(permission_errno(code) ? Disposition::PermissionFailure : Disposition::InternalFailure, e.what());
    } catch (const std::system_error& e) {
        const bool generic = e.code().category() == std::generic_category() || e.code().category() == std::system_category();
        return failure(generic && permission_errno(e.code().value()) ? Disposition::PermissionFailure
                                                                     : Disposition::InternalFailure,
                       e.what());
    } catch (const std::exception& e) {
        return failure(Disposition::InternalFailure, e.what());
    } catch (...) {
        return failure(Disposition::InternalFailure, "non-standard exception");
    }
}

// ---------------------------------------------------------------------------
// Payload truncation

namespace {

std::string utf8_cut(const std::string& s, std::size_t n)
{
    if (s.size() <= n) return s;
    while (n > 0 && (static_cast<unsigned char>(s[n]) & 0xc0) == 0x80) --n;
    return s.substr(0, n);
}

std::size_t dumped_size(const Json& v) { return v.dump(-1, ' ', false, Json::error_handler_t::replace).size(); }

}  // namespace

std::optional<std::string> truncate_payload(Json& payload, std::size_t limit)
{
    if (!payload.is_object()) return std::nullopt;
    std::vector<std::string> notes;
    for (auto& [key, value] : payload.items()) {
        if (dumped_size(value) <= limit) continue;
        if (value.is_string()) {
            const auto& s = value.get_ref<const std::string&>();
            const auto original = s.size();
            value = utf8_cut(s, limit);
            notes.push_back(key + " (cut to " + std::to_string(value.get_ref<const std::string&>().size()) + " of " +
                            std::to_string(original) + " bytes)");
        } else if (value.is_array() || value.is_object()) {
            Json kept = value.is_array() ? Json::array() : Json::object();
            std::size_t used = 2;
            std::size_t count = 0;
            const std::size_t total = value.size();
            for (auto it = value.begin(); it != value.end(); ++it) {
                std::size_t cost = dumped_size(*it) + 1 + (value.is_object() ? it.key().size() + 3 : 0);
                if (used + cost > limit) break;
                used += cost;
                if (value.is_array())
                    kept.push_back(*it);
                else
                    kept[it.key()] = *it;
                ++count;
            }
            value = std::move(kept);
            notes.push_back(key + " (kept " + std::to_string(count) + " of " + std::to_string(total) + " items)");
        }
    }
    if (notes.empty()) return std::nullopt;
    std::string note = "values over " + std::to_string(limit) + " bytes shortened: ";
    for (std::size_t i = 0; i < notes.size(); ++i) note += (i ? ", " : "") + notes[i];
    return note;
}

// ---------------------------------------------------------------------------
// Isolation

namespace {

Json observation_to_json(const Observation& o)
{
    Json j;
    j["disposition"] = static_cast<int>(o.disposition);
    j["detail"] = o.detail;
    j["payload"] = o.evidence.payload;
    j["redacted"] = o.evidence.redacted;
    j["truncation_note"] = o.evidence.truncation_note ? Json(*o.evidence.truncation_note) : Json(nullptr);
    return j;
}

Observation observation_from_json(const Json& j)
{
    Observation o;
    const int d = j.at("disposition").get<int>();
    if (d < 0 || d > static_cast<int>(Disposition::InternalFailure)) throw ParseError("bad disposition");
    o.disposition = static_cast<Disposition>(d);
    o.detail = j.at("detail").get<std::string>();
    o.evidence.payload = j.at("payload");
    o.evidence.redacted = j.at("redacted").get<bool>();
    if (!j.at("truncation_note").is_null()) o.evidence.truncation_note = j.at("truncation_note").get<std::string>();
    return o;
}

void write_all(int fd, std::string_view data)
{
    while (!data.empty()) {
        auto n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            return;
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

Completion run_subprocess(const ProbeBody& body, const ProbeContext& ctx, milliseconds timeout, Mutator& mutator)
{
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0)
        return {Completion::Kind::Crashed, {}, std::string("pipe: ") + std::strerror(errno)};
    const std::size_t logged_before = mutator.attempts().size();
    pid_t pid = ::fork();
    if (pid < 0) {
        int err = errno;
        ::close(fds[0]);
        ::close(fds[1]);
        return {Completion::Kind::Crashed, {}, std::string("fork: ") + std::strerror(err)};
    }
    if (pid == 0) {
        ::close(fds[0]);
        ::setpgid(0, 0);  // lets the parent kill anything the probe spawned
        int status = 0;
        try {
            auto obs = observe(body, ctx);
            auto j = observation_to_json(obs);
            auto attempts = mutator.attempts();
            j["attempts"] = std::vector<std::string>(attempts.begin() + static_cast<std::ptrdiff_t>(logged_before),
                                                     attempts.end());
            write_all(fds[1], j.dump(-1, ' ', false, Json::error_handler_t::replace));
        } catch (...) {
            status = 3;
        }
        ::_exit(status);
    }
    ::close(fds[1]);
    ::setpgid(pid, pid);

    std::string data;
    const auto deadline = Clock::now() + timeout;
    bool timed_out = false;
    for (;;) {
        auto left = std::chrono::duration_cast<milliseconds>(deadline - Clock::now()).count();
        if (left <= 0) {
            timed_out = true;
            break;
        }
        pollfd p{fds[0], POLLIN, 0};
        int rc = ::poll(&p, 1, static_cast<int>(left));
        if (rc < 0 && errno == EINTR) continue;
        if (rc == 0) continue;  // re-check the deadline
        char buf[65536];
        auto n = ::read(fds[0], buf, sizeof buf);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        data.append(buf, static_cast<std::size_t>(n));
    }
    ::close(fds[0]);
    int status = 0;
    if (timed_out) {
        ::kill(-pid, SIGKILL);
        ::kill(pid, SIGKILL);
        ::waitpid(pid, &status, 0);
        return {Completion::Kind::TimedOut, {}, {}};
    }
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    ::kill(-pid, SIGKILL);  // stray grandchildren
    if (WIFSIGNALED(status))
        return {Completion::Kind::Crashed, {}, "probe process terminated by signal " + std::to_string(WTERMSIG(status)) +
                                                   " (" + ::strsignal(WTERMSIG(status)) + ")"};
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0 || data.empty())
        return {Completion::Kind::Crashed, {}, "probe process exited with status " + std::to_string(WEXITSTATUS(status))};
    try {
        auto j = Json::parse(data);
        if (j.contains("attempts")) mutator.adopt(j["attempts"].get<std::vector<std::string>>());
        return {Completion::Kind::Observed, observation_from_json(j), {}};
    } catch (const std::exception& e) {
        return {Completion::Kind::Crashed, {}, std::string("unreadable probe result: ") + e.what()};
    }
}

struct InProcessState {
    std::mutex mu;
    std::condition_variable cv;
    bool done = false;
    Observation observation;
    RunConfig config;
    ExecutionMode mode;
    std::shared_ptr<Mutator> mutator;
    ProbeBody body;
};

Completion run_in_process(const ProbeBody& body, const RunConfig& config, ExecutionMode mode,
                          const std::shared_ptr<Mutator>& mutator, milliseconds timeout)
{
    // The worker owns copies of everything it touches, so abandoning it on
    // timeout leaves nothing dangling.
    auto state = std::make_shared<InProcessState>();
    state->config = config;
    state->mode = mode;
    state->mutator = mutator;
    state->body = body;
    std::thread([state] {
        ProbeContext ctx{state->config, state->mode, *state->mutator};
        auto obs = observe(state->body, ctx);
        std::lock_guard lock(state->mu);
        state->observation = std::move(obs);
        state->done = true;
        state->cv.notify_all();
    }).detach();
    std::unique_lock lock(state->mu);
    if (!state->cv.wait_for(lock, timeout, [&] { return state->done; })) return {Completion::Kind::TimedOut, {}, {}};
    return {Completion::Kind::Observed, std::move(state->observation), {}};
}

}  // namespace

ProbeResult run_probe(const ProbeSpec& spec, const RunConfig& config, const ProbeBody& body,
                      const std::shared_ptr<Mutator>& mutator, Json* full_payload)
{
    const auto mode = config.mode_for(spec);
    const auto timeout = milliseconds(static_cast<long>(config.per_probe_timeout * 1000.0));
    const auto start = Clock::now();
    Completion c;
    if (config.isolation == Isolation::Subprocess) {
        ProbeContext ctx{config, mode, *mutator};
        c = run_subprocess(body, ctx, timeout, *mutator);
    } else {
        c = run_in_process(body, config, mode, mutator, timeout);
    }
    const auto elapsed = std::chrono::duration_cast<milliseconds>(Clock::now() - start);

    ProbeResult r{spec.id, mode, Outcome::Unknown, Evidence{}, elapsed, std::nullopt};
    r.outcome = classify(c.kind, c.observation.disposition, spec.safety_class);
    r.evidence.kind = std::string(spec.id.family());
    switch (c.kind) {
    case Completion::Kind::Observed:
        r.evidence.payload = std::move(c.observation.evidence.payload);
        r.evidence.redacted = c.observation.evidence.redacted;
        if (!r.evidence.payload.is_object()) r.evidence.payload = Json::object();
        if (r.outcome != Outcome::Accessed) {
            r.error_detail = c.observation.detail.empty() ? std::string(to_string(c.observation.disposition))
                                                          : c.observation.detail;
        }
        break;
    case Completion::Kind::TimedOut:
        r.evidence.payload = Json::object();
        r.error_detail = "timed out after " + std::to_string(timeout.count()) + " ms";
        break;
    case Completion::Kind::Crashed:
        r.evidence.payload = Json::object();
        r.error_detail = c.detail.empty() ? "probe crashed" : c.detail;
        break;
    }
    if (full_payload) *full_payload = r.evidence.payload;
    if (auto note = truncate_payload(r.evidence.payload)) r.evidence.truncation_note = std::move(note);
    return r;
}

ProbeResult run_probe(const ProbeSpec& spec, const RunConfig& config)
{
    auto mutator = std::make_shared<Mutator>(config.canonical_scratch());
    return run_probe(spec, config, default_body(spec.id), mutator);
}

// ---------------------------------------------------------------------------
// Suite

int execution_phase(const ProbeSpec& spec)
{
    if (spec.requires_exclusive) return 4;
    switch (spec.category) {
    case Category::ExposeSystem:
    case Category::ExposeDirectory:
    case Category::ExposeMetadata: return 0;
    case Category::ManipulateStructure:
    case Category::ManipulateContent:
    case Category::ManipulatePrivilege: return 1;
    default: break;
    }
    return spec.safety_class == SafetyClass::NetworkEgress ? 2 : 3;
}

std::vector<ProbeSpec> execution_order(const RunConfig& config)
{
    const auto& sel = config.selection;
    std::vector<ProbeSpec> out;
    for (const auto& spec : all_probes().specs()) {
        if (!sel.probes.empty() && !sel.probes.contains(spec.id.str())) continue;
        if (!sel.categories.empty() && !sel.categories.contains(spec.category)) continue;
        if (sel.mode && spec.default_mode != *sel.mode) continue;
        out.push_back(spec);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const ProbeSpec& a, const ProbeSpec& b) { return execution_phase(a) < execution_phase(b); });
    return out;
}

std::string utc_timestamp(std::chrono::system_clock::time_point t)
{
    const std::time_t tt = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    ::gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void ExecutionTrace::add(TraceEvent e)
{
    std::lock_guard lock(mu_);
    events_.push_back(std::move(e));
}

std::vector<TraceEvent> ExecutionTrace::events() const
{
    std::lock_guard lock(mu_);
    return events_;
}

Evidence environment_fingerprint(const RunConfig& config)
{
    Evidence ev{"environment", Json::object(), false, std::nullopt};
    utsname u{};
    if (::uname(&u) == 0) {
        ev.payload["hostname"] = u.nodename;
        ev.payload["kernel"] = std::string(u.sysname) + " " + u.release;
        ev.payload["machine"] = u.machine;
    }
    ev.payload["euid"] = ::geteuid();
    ev.payload["egid"] = ::getegid();
    std::error_code ec;
    ev.payload["container_markers"] = Json::array();
    for (const char* marker : {"/.dockerenv", "/run/.containerenv", "/var/run/secrets/kubernetes.io"})
        if (fs::exists(marker, ec)) ev.payload["container_markers"].push_back(marker);
    ev.payload["registry_hash"] = all_probes().hash();
    ev.payload["isolation"] = std::string(to_string(config.isolation));
    ev.payload["scratch_root"] = config.canonical_scratch().string();
    return ev;
}

namespace {

struct ScratchUsage {
    std::uint64_t files = 0;
    std::uint64_t bytes = 0;
};

ScratchUsage scratch_usage(const fs::path& root)
{
    ScratchUsage u;
    std::error_code ec;
    for (auto it = fs::recursive_directory_iterator(root, fs::directory_options::skip_permission_denied, ec);
         !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
        if (it->is_symlink(ec) || !it->is_regular_file(ec)) continue;
        ++u.files;
        u.bytes += it->file_size(ec);
    }
    return u;
}

void make_tree_removable(const fs::path& root)
{
    std::error_code ec;
    ::chmod(root.c_str(), 0700);
    for (auto it = fs::recursive_directory_iterator(root, ec); !ec && it != fs::recursive_directory_iterator();
         it.increment(ec)) {
        if (it->is_directory(ec) && !it->is_symlink(ec)) ::chmod(it->path().c_str(), 0700);
    }
}

}  // namespace

RunReport run_suite(const RunConfig& config, const RunHooks& hooks)
{
    config.validate();
    const auto started = std::chrono::system_clock::now();
    const auto scratch = config.canonical_scratch();
    std::error_code ec;
    bool created_scratch = false;
    if (!fs::exists(scratch, ec)) {
        if (!fs::create_directories(scratch, ec) || ec)
            throw ConfigError("cannot create scratch root " + scratch.string() + ": " + ec.message());
        created_scratch = true;
    } else if (!fs::is_directory(scratch, ec)) {
        throw ConfigError("scratch root " + scratch.string() + " is not a directory");
    }
    RunConfig effective = config;
    effective.scratch_root = scratch;
    auto mutator = std::make_shared<Mutator>(scratch);

    auto env = environment_fingerprint(effective);
    const auto sentinel_roots = effective.effective_sentinel_roots();
    SentinelOptions sopts;
    sopts.exclude = {scratch};
    sopts.exclude.insert(sopts.exclude.end(), effective.sentinel_exclude.begin(), effective.sentinel_exclude.end());
    sopts.keep_entries = true;
    std::optional<SentinelDigest> before;
    if (hooks.sentinel) {
        before = sentinel_hash(sentinel_roots, sopts);
        env.payload["sentinel_before"] = before->to_json();
    }

    const auto order = execution_order(effective);
    std::vector<std::optional<ProbeResult>> slots(order.size());
    auto body_for = hooks.body_for ? hooks.body_for : [](const ProbeSpec& s) { return default_body(s.id); };

    auto execute = [&](std::size_t i) {
        const auto& spec = order[i];
        TraceEvent ev{spec.id.str(), spec.requires_exclusive, Clock::now(), {}};
        Json full;
        slots[i] = run_probe(spec, effective, body_for(spec), mutator, hooks.full_payloads ? &full : nullptr);
        ev.end = Clock::now();
        if (hooks.trace) hooks.trace->add(std::move(ev));
        return full;
    };
    std::mutex full_mu;
    auto keep_full = [&](std::size_t i, Json full) {
        if (!hooks.full_payloads) return;
        std::lock_guard lock(full_mu);
        (*hooks.full_payloads)[order[i].id.str()] = std::move(full);
    };

    std::size_t i = 0;
    while (i < order.size()) {
        const int phase = execution_phase(order[i]);
        std::size_t end = i;
        while (end < order.size() && execution_phase(order[end]) == phase) ++end;
        if (phase == 4 || effective.jobs == 1) {
            // Exclusive probes run alone; nothing else is in flight.
            for (std::size_t k = i; k < end; ++k) keep_full(k, execute(k));
        } else {
            std::atomic<std::size_t> next{i};
            const auto workers = std::min<std::size_t>(static_cast<std::size_t>(effective.jobs), end - i);
            std::vector<std::jthread> pool;
            for (std::size_t w = 0; w < workers; ++w)
                pool.emplace_back([&] {
                    for (std::size_t k; (k = next.fetch_add(1)) < end;) keep_full(k, execute(k));
                });
        }
        i = end;
    }

    std::vector<ProbeResult> results;
    for (auto& s : slots) results.push_back(std::move(*s));
    const auto& catalog = all_probes().specs();
    auto rank = [&](const ProbeId& id) {
        return std::find_if(catalog.begin(), catalog.end(), [&](const ProbeSpec& s) { return s.id == id; }) - catalog.begin();
    };
    std::sort(results.begin(), results.end(),
              [&](const ProbeResult& a, const ProbeResult& b) { return rank(a.probe) < rank(b.probe); });

    std::vector<std::string> notes;
    if (before) {
        auto after = sentinel_hash(sentinel_roots, sopts);
        env.payload["sentinel_after"] = after.to_json();
        if (after.hex != before->hex) {
            std::string note = "sentinel digest changed during the run: sha256:" + before->hex + " -> sha256:" + after.hex;
            const auto changed = changed_paths(*before, after);
            note += "; " + std::to_string(changed.size()) + " changed path(s):";
            for (std::size_t k = 0; k < changed.size() && k < 20; ++k) note += " " + changed[k];
            notes.push_back(note);
        }
    }
    const auto usage = scratch_usage(scratch);
    env.payload["scratch_residual_files"] = usage.files;
    env.payload["scratch_residual_bytes"] = usage.bytes;
    if (created_scratch) {
        make_tree_removable(scratch);
        fs::remove_all(scratch, ec);
    }

    auto report = RunReport::assemble(random_token(8), utc_timestamp(started), config_digest(config), std::move(env),
                                      std::move(results));
    report.safety_notes = std::move(notes);
    report.valid = report.safety_notes.empty();
    return report;
}

}  // namespace sandboxeval
