#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "sandboxeval/config.hpp"
#include "sandboxeval/model.hpp"
#include "sandboxeval/probe.hpp"

namespace sandboxeval {

/// Payload values whose serialized form exceeds this are shortened in the
/// report; the full value is kept for the sidecar.
inline constexpr std::size_t kPayloadValueLimit = 4096;

/// How one probe execution ended, before mapping to an Outcome.
struct Completion {
    enum class Kind { Observed, TimedOut, Crashed };
    Kind kind = Kind::Observed;
    Observation observation;  // meaningful for Observed
    std::string detail;       // for TimedOut and Crashed
};

/// The classification contract: payload -> Accessed; permission failure,
/// refusal, absent source -> Denied; internal failure or crash -> Unknown;
/// timeout -> Denied for NetworkEgress probes, Unknown otherwise.
Outcome classify(Completion::Kind kind, Disposition d, SafetyClass safety);

/// Runs `body`, turning escaping exceptions into Observations: AccessDenied
/// and EACCES/EPERM system errors become PermissionFailure, anything else
/// InternalFailure.
Observation observe(const ProbeBody& body, const ProbeContext& ctx);

/// Shortens oversized payload values in place and returns the note, if any.
std::optional<std::string> truncate_payload(Json& payload, std::size_t limit = kPayloadValueLimit);

struct TraceEvent {
    std::string probe;
    bool exclusive = false;
    std::chrono::steady_clock::time_point start;
    std::chrono::steady_clock::time_point end;
};

class ExecutionTrace {
public:
    void add(TraceEvent e);
    std::vector<TraceEvent> events() const;

private:
    mutable std::mutex mu_;
    std::vector<TraceEvent> events_;
};

using BodyLookup = std::function<ProbeBody(const ProbeSpec&)>;

struct RunHooks {
    BodyLookup body_for;                          // default: default_body
    ExecutionTrace* trace = nullptr;
    std::map<std::string, Json>* full_payloads = nullptr;  // untruncated payloads, by probe id
    bool sentinel = true;                         // hash sentinel roots before and after
};

/// Executes one probe under the configured isolation and timeout. Never
/// throws for probe failures; they fold into the result.
ProbeResult run_probe(const ProbeSpec& spec, const RunConfig& config, const ProbeBody& body,
                      const std::shared_ptr<Mutator>& mutator, Json* full_payload = nullptr);
ProbeResult run_probe(const ProbeSpec& spec, const RunConfig& config);

/// Selected specs in execution order: recon, filesystem, egress, the rest,
/// then exclusive probes.
std::vector<ProbeSpec> execution_order(const RunConfig& config);

/// Phase index used by execution_order (0 runs first).
int execution_phase(const ProbeSpec& spec);

Evidence environment_fingerprint(const RunConfig& config);

/// Validates `config` (ConfigError), runs the selection and assembles the
/// report. Results are listed in catalog order.
RunReport run_suite(const RunConfig& config, const RunHooks& hooks = {});

std::string utc_timestamp(std::chrono::system_clock::time_point t = std::chrono::system_clock::now());

}  // namespace sandboxeval
