#include "sandboxeval/model.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <set>

#include "sandboxeval/registry.hpp"

namespace sandboxeval {

namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(std::string_view s, const std::array<std::pair<E, std::string_view>, N>& table)
{
    for (const auto& [value, name] : table)
        if (name == s) return value;
    return std::nullopt;
}

template <typename E, std::size_t N>
std::string_view name_of(E value, const std::array<std::pair<E, std::string_view>, N>& table)
{
    for (const auto& [v, name] : table)
        if (v == value) return name;
    return "?";
}

constexpr std::array<std::pair<Category, std::string_view>, 8> kCategoryNames{{
    {Category::ExposeSystem, "expose-system"},
    {Category::ExposeDirectory, "expose-directory"},
    {Category::ExposeMetadata, "expose-metadata"},
    {Category::ManipulateStructure, "manipulate-structure"},
    {Category::ManipulateContent, "manipulate-content"},
    {Category::ManipulatePrivilege, "manipulate-privilege"},
    {Category::ExternalCommunication, "external-communication"},
    {Category::DangerousOperation, "dangerous-operation"},
}};

constexpr std::array<std::pair<Category, std::string_view>, 8> kCategoryTitles{{
    {Category::ExposeSystem, "Expose System"},
    {Category::ExposeDirectory, "Expose Directory"},
    {Category::ExposeMetadata, "Expose Metadata"},
    {Category::ManipulateStructure, "Manipulate Structure"},
    {Category::ManipulateContent, "Manipulate Content"},
    {Category::ManipulatePrivilege, "Manipulate Privilege"},
    {Category::ExternalCommunication, "External Communication"},
    {Category::DangerousOperation, "Dangerous Operation"},
}};

constexpr std::array<std::pair<ExecutionMode, std::string_view>, 3> kModeNames{{
    {ExecutionMode::Direct, "direct"},
    {ExecutionMode::InferOnly, "infer-only"},
    {ExecutionMode::Proxy, "proxy"},
}};

constexpr std::array<std::pair<Outcome, std::string_view>, 3> kOutcomeNames{{
    {Outcome::Accessed, "accessed"},
    {Outcome::Denied, "denied"},
    {Outcome::Unknown, "unknown"},
}};

constexpr std::array<std::pair<SafetyClass, std::string_view>, 4> kSafetyNames{{
    {SafetyClass::ReadOnly, "read-only"},
    {SafetyClass::ScratchMutating, "scratch-mutating"},
    {SafetyClass::BoundedResource, "bounded-resource"},
    {SafetyClass::NetworkEgress, "network-egress"},
}};

constexpr std::array<std::pair<RedactLevel, std::string_view>, 3> kRedactNames{{
    {RedactLevel::Off, "off"},
    {RedactLevel::Standard, "standard"},
    {RedactLevel::Strict, "strict"},
}};

constexpr std::array<std::pair<VerdictStatus, std::string_view>, 3> kVerdictNames{{
    {VerdictStatus::Conform, "conform"},
    {VerdictStatus::Violation, "violation"},
    {VerdictStatus::Indeterminate, "indeterminate"},
}};

}  // namespace

std::string_view to_string(Category c) { return name_of(c, kCategoryNames); }
std::string_view to_string(ExecutionMode m) { return name_of(m, kModeNames); }
std::string_view to_string(Outcome o) { return name_of(o, kOutcomeNames); }
std::string_view to_string(SafetyClass s) { return name_of(s, kSafetyNames); }
std::string_view to_string(RedactLevel r) { return name_of(r, kRedactNames); }
std::string_view to_string(VerdictStatus s) { return name_of(s, kVerdictNames); }
std::string_view display_name(Category c) { return name_of(c, kCategoryTitles); }

std::optional<Category> parse_category(std::string_view s) { return lookup(s, kCategoryNames); }
std::optional<ExecutionMode> parse_mode(std::string_view s) { return lookup(s, kModeNames); }
std::optional<Outcome> parse_outcome(std::string_view s) { return lookup(s, kOutcomeNames); }
std::optional<SafetyClass> parse_safety_class(std::string_view s) { return lookup(s, kSafetyNames); }
std::optional<RedactLevel> parse_redact(std::string_view s) { return lookup(s, kRedactNames); }

// ---------------------------------------------------------------------------

bool ProbeId::is_well_formed(std::string_view value)
{
    static const std::regex kPattern("[a-z]+(\\.[a-z_]+)+");
    return std::regex_match(value.begin(), value.end(), kPattern);
}

ProbeId::ProbeId(std::string value) : value_(std::move(value))
{
    if (!is_well_formed(value_)) throw LookupError("malformed probe id '" + value_ + "'");
}

std::string_view ProbeId::family() const
{
    std::string_view v = value_;
    return v.substr(0, v.find('.'));
}

std::vector<Outcome> OutcomeSet::members() const
{
    std::vector<Outcome> out;
    for (auto o : kAllOutcomes)
        if (contains(o)) out.push_back(o);
    return out;
}

int& OutcomeCounts::operator[](Outcome o)
{
    switch (o) {
    case Outcome::Accessed: return accessed;
    case Outcome::Denied: return denied;
    case Outcome::Unknown: break;
    }
    return unknown;
}

int OutcomeCounts::operator[](Outcome o) const { return const_cast<OutcomeCounts&>(*this)[o]; }

Summary summarize(std::span<const ProbeResult> results)
{
    const auto& registry = all_probes();
    std::map<Category, OutcomeCounts> rows;
    std::set<std::string> seen;
    for (const auto& r : results) {
        if (!seen.insert(r.probe.str()).second) throw Error("duplicate probe id in results: " + r.probe.str());
        rows[registry.at(r.probe).category][r.outcome] += 1;
    }
    Summary out;
    for (auto c : kAllCategories)
        if (auto it = rows.find(c); it != rows.end()) out.push_back({c, it->second});
    return out;
}

RunReport RunReport::assemble(std::string run_id, std::string started_at, std::string config_digest,
                              Evidence environment, std::vector<ProbeResult> results)
{
    RunReport r;
    r.run_id = std::move(run_id);
    r.started_at = std::move(started_at);
    r.config_digest = std::move(config_digest);
    r.environment = std::move(environment);
    r.summary = summarize(results);
    r.results = std::move(results);
    return r;
}

void RunReport::check_invariants() const
{
    if (summarize(results) != summary) throw IntegrityError("summary does not match recounted results");
    for (const auto& r : results)
        if (r.outcome == Outcome::Unknown && (!r.error_detail || r.error_detail->empty()))
            throw IntegrityError("unknown outcome without error detail for " + r.probe.str());
}

const ProbeResult* RunReport::find(const ProbeId& id) const
{
    auto it = std::find_if(results.begin(), results.end(), [&](const ProbeResult& r) { return r.probe == id; });
    return it == results.end() ? nullptr : &*it;
}

VerdictStatus judge(Outcome observed, OutcomeSet expected)
{
    if (observed == Outcome::Unknown) return VerdictStatus::Indeterminate;
    return expected.contains(observed) ? VerdictStatus::Conform : VerdictStatus::Violation;
}

}  // namespace sandboxeval
