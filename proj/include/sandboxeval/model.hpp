#pragma once

#include <array>
#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace sandboxeval {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An id, category or profile name that does not resolve.
struct LookupError : Error {
    using Error::Error;
};

/// Invalid run configuration; raised before any probe runs.
struct ConfigError : Error {
    using Error::Error;
};

/// A mutating operation aimed outside the scratch root, or a sentinel mismatch.
struct SafetyViolation : Error {
    using Error::Error;
};

/// Malformed or unsupported structured document.
struct ParseError : Error {
    using Error::Error;
};

/// A document that parses but breaks a model invariant.
struct IntegrityError : Error {
    using Error::Error;
};

/// Raised by probe bodies when the environment refused the action.
struct AccessDenied : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Enumerations
// ---------------------------------------------------------------------------

enum class Category {
    ExposeSystem,
    ExposeDirectory,
    ExposeMetadata,
    ManipulateStructure,
    ManipulateContent,
    ManipulatePrivilege,
    ExternalCommunication,
    DangerousOperation,
};

inline constexpr std::array kAllCategories{
    Category::ExposeSystem,        Category::ExposeDirectory,      Category::ExposeMetadata,
    Category::ManipulateStructure, Category::ManipulateContent,    Category::ManipulatePrivilege,
    Category::ExternalCommunication, Category::DangerousOperation,
};

enum class ExecutionMode { Direct, InferOnly, Proxy };

enum class Outcome { Accessed, Denied, Unknown };

inline constexpr std::array kAllOutcomes{Outcome::Accessed, Outcome::Denied, Outcome::Unknown};

enum class SafetyClass { ReadOnly, ScratchMutating, BoundedResource, NetworkEgress };

enum class RedactLevel { Off, Standard, Strict };

// Kebab-case names used on the command line and in every JSON document.
std::string_view to_string(Category c);
std::string_view to_string(ExecutionMode m);
std::string_view to_string(Outcome o);
std::string_view to_string(SafetyClass s);
std::string_view to_string(RedactLevel r);

/// Human-readable category title ("Expose System").
std::string_view display_name(Category c);

std::optional<Category> parse_category(std::string_view s);
std::optional<ExecutionMode> parse_mode(std::string_view s);
std::optional<Outcome> parse_outcome(std::string_view s);
std::optional<SafetyClass> parse_safety_class(std::string_view s);
std::optional<RedactLevel> parse_redact(std::string_view s);

// ---------------------------------------------------------------------------
// ProbeId
// ---------------------------------------------------------------------------

/// Dotted lowercase identifier `<family>.<action>[.<action>...]`.
class ProbeId {
public:
    /// Throws LookupError when `value` is not a well-formed id.
    explicit ProbeId(std::string value);

    static bool is_well_formed(std::string_view value);

    const std::string& str() const noexcept { return value_; }
    std::string_view family() const;

    friend auto operator<=>(const ProbeId&, const ProbeId&) = default;

private:
    std::string value_;
};

// ---------------------------------------------------------------------------
// Outcome sets
// ---------------------------------------------------------------------------

class OutcomeSet {
public:
    constexpr OutcomeSet() = default;
    constexpr OutcomeSet(std::initializer_list<Outcome> outcomes)
    {
        for (auto o : outcomes) insert(o);
    }

    constexpr void insert(Outcome o) { bits_ |= bit(o); }
    constexpr bool contains(Outcome o) const { return (bits_ & bit(o)) != 0; }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr bool is_subset_of(OutcomeSet other) const { return (bits_ & ~other.bits_) == 0; }

    std::vector<Outcome> members() const;

    friend constexpr bool operator==(OutcomeSet, OutcomeSet) = default;

private:
    static constexpr std::uint8_t bit(Outcome o) { return std::uint8_t(1u << static_cast<unsigned>(o)); }
    std::uint8_t bits_ = 0;
};

// ---------------------------------------------------------------------------
// Probe description and results
// ---------------------------------------------------------------------------

struct ProbeSpec {
    ProbeId id;
    Category category;
    std::string action;      // row name as it appears in the scenario tables
    std::string label;       // short name used in the category table
    std::string description;
    ExecutionMode default_mode;
    SafetyClass safety_class;
    bool requires_exclusive = false;
};

struct Evidence {
    std::string kind;
    Json payload = Json::object();
    bool redacted = false;
    std::optional<std::string> truncation_note;

    friend bool operator==(const Evidence&, const Evidence&) = default;
};

struct ProbeResult {
    ProbeId probe;
    ExecutionMode mode_used = ExecutionMode::Direct;
    Outcome outcome = Outcome::Unknown;
    Evidence evidence;
    std::chrono::milliseconds duration{0};
    std::optional<std::string> error_detail;

    friend bool operator==(const ProbeResult&, const ProbeResult&) = default;
};

struct OutcomeCounts {
    int accessed = 0;
    int denied = 0;
    int unknown = 0;

    int& operator[](Outcome o);
    int operator[](Outcome o) const;
    int total() const { return accessed + denied + unknown; }

    friend bool operator==(const OutcomeCounts&, const OutcomeCounts&) = default;
};

struct CategorySummary {
    Category category;
    OutcomeCounts counts;

    friend bool operator==(const CategorySummary&, const CategorySummary&) = default;
};

/// Rows in category order; categories without results are omitted.
using Summary = std::vector<CategorySummary>;

/// Per-category outcome counts. Throws LookupError for ids outside the
/// registry and Error on duplicate ids.
Summary summarize(std::span<const ProbeResult> results);

struct RunReport {
    std::string run_id;
    std::string started_at;  // UTC, ISO-8601 with a trailing 'Z'
    std::string config_digest;
    Evidence environment;
    std::vector<ProbeResult> results;
    Summary summary;
    bool valid = true;
    std::vector<std::string> safety_notes;

    /// Builds a report whose summary is recomputed from `results`.
    static RunReport assemble(std::string run_id, std::string started_at, std::string config_digest,
                              Evidence environment, std::vector<ProbeResult> results);

    /// Throws IntegrityError when the summary or Unknown details are inconsistent.
    void check_invariants() const;

    const ProbeResult* find(const ProbeId& id) const;

    friend bool operator==(const RunReport&, const RunReport&) = default;
};

// ---------------------------------------------------------------------------
// Policy and verdicts
// ---------------------------------------------------------------------------

enum class VerdictStatus { Conform, Violation, Indeterminate };

std::string_view to_string(VerdictStatus s);

struct Verdict {
    ProbeId probe;
    Outcome observed;
    OutcomeSet expected;
    VerdictStatus status;
};

/// Applies the verdict rule: Unknown is Indeterminate, membership decides the rest.
VerdictStatus judge(Outcome observed, OutcomeSet expected);

}  // namespace sandboxeval
