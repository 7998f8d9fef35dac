#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sandboxeval/model.hpp"

namespace sandboxeval {

inline constexpr int kProfileVersion = 1;

/// Acceptable outcomes per probe. Probes without an entry take the default.
struct Policy {
    std::string name;
    std::string registry_hash;  // catalog the profile was written against
    OutcomeSet default_expectation;
    std::map<std::string, OutcomeSet> expectations;
    std::vector<std::string> warnings;  // e.g. registry hash mismatch

    OutcomeSet expected_for(const ProbeId& id) const;
};

/// Throws ConfigError naming the offending probe id or field.
Policy load_profile(const Json& doc);

/// A bundled profile name ("dyff-hardened", "unconfined") or a JSON file.
/// Throws ConfigError when neither resolves.
Policy resolve_profile(std::string_view name_or_path);

std::vector<std::string> bundled_profile_names();
Json bundled_profile(std::string_view name);  // throws LookupError

Json policy_to_json(const Policy& p);

struct Evaluation {
    std::vector<Verdict> verdicts;  // one per result, in report order
    VerdictStatus overall = VerdictStatus::Conform;

    std::size_t count(VerdictStatus s) const;
};

/// Conform iff no Violation and no Indeterminate.
Evaluation evaluate(const RunReport& report, const Policy& policy);

}  // namespace sandboxeval
