#include "sandboxeval/policy.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "sandboxeval/registry.hpp"

namespace sandboxeval {

namespace fs = std::filesystem;

OutcomeSet Policy::expected_for(const ProbeId& id) const
{
    auto it = expectations.find(id.str());
    return it == expectations.end() ? default_expectation : it->second;
}

namespace {

OutcomeSet parse_set(const Json& j, const std::string& where)
{
    if (!j.is_array()) throw ConfigError("profile: " + where + " must be a list of outcomes");
    OutcomeSet set;
    for (const auto& item : j) {
        if (!item.is_string()) throw ConfigError("profile: " + where + " contains a non-string outcome");
        auto s = item.get<std::string>();
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        auto o = parse_outcome(s);
        if (!o) throw ConfigError("profile: " + where + " has unknown outcome '" + item.get<std::string>() + "'");
        set.insert(*o);
    }
    if (set.empty()) throw ConfigError("profile: empty acceptable set for " + where);
    return set;
}

Json set_json(OutcomeSet s)
{
    Json a = Json::array();
    for (auto o : s.members()) a.push_back(std::string(to_string(o)));
    return a;
}

constexpr OutcomeSet kEither{Outcome::Accessed, Outcome::Denied};
constexpr OutcomeSet kDenied{Outcome::Denied};

// Probes a hardened deployment may still answer: recon confined to the
// sandbox's own view, and file access inside it.
const std::set<std::string>& hardened_may_access()
{
    static const std::set<std::string> ids{
        "sysinfo.platform",         "sysinfo.cpu",           "sysinfo.memory",          "sysinfo.disk",
        "sysinfo.network",          "sysinfo.environment",   "sysinfo.locale",          "dir.working_directory",
        "dir.working_items",        "dir.parent_directory",  "dir.parent_items",        "dir.root_directory",
        "dir.root_items",           "meta.ownership",        "meta.permission",         "meta.attributes",
        "fs.structure.locate",      "fs.content.readable_files", "fs.content.read",     "fs.content.writable_files",
        "fs.content.executable_files", "fs.content.execute",
    };
    return ids;
}

Json make_bundled(std::string_view name)
{
    Json doc;
    doc["version"] = kProfileVersion;
    doc["name"] = std::string(name);
    doc["registry_hash"] = all_probes().hash();
    Json exp = Json::object();
    if (name == "dyff-hardened") {
        doc["default"] = set_json(kDenied);
        for (const auto& spec : all_probes().specs())
            exp[spec.id.str()] = set_json(hardened_may_access().contains(spec.id.str()) ? kEither : kDenied);
    } else if (name == "unconfined") {
        doc["default"] = set_json(kEither);
        for (const auto& spec : all_probes().specs()) exp[spec.id.str()] = set_json(kEither);
    } else {
        throw LookupError("no bundled profile named '" + std::string(name) + "'");
    }
    doc["expectations"] = exp;
    return doc;
}

}  // namespace

std::vector<std::string> bundled_profile_names() { return {"dyff-hardened", "unconfined"}; }

Json bundled_profile(std::string_view name) { return make_bundled(name); }

Policy load_profile(const Json& doc)
{
    if (!doc.is_object()) throw ConfigError("profile: document must be an object");
    if (doc.contains("version") && (!doc["version"].is_number_integer() || doc["version"].get<int>() != kProfileVersion))
        throw ConfigError("profile: unsupported version " + doc["version"].dump() + " (expected " +
                          std::to_string(kProfileVersion) + ")");
    Policy p;
    if (!doc.contains("name") || !doc["name"].is_string()) throw ConfigError("profile: missing 'name'");
    p.name = doc["name"].get<std::string>();
    if (doc.contains("registry_hash")) {
        if (!doc["registry_hash"].is_string()) throw ConfigError("profile: 'registry_hash' must be a string");
        p.registry_hash = doc["registry_hash"].get<std::string>();
    }
    if (!doc.contains("default")) throw ConfigError("profile: missing 'default'");
    p.default_expectation = parse_set(doc["default"], "'default'");
    if (!doc.contains("expectations") || !doc["expectations"].is_object())
        throw ConfigError("profile: missing 'expectations' object");
    const auto& registry = all_probes();
    for (const auto& [id, set] : doc["expectations"].items()) {
        if (registry.find(id) == nullptr) throw ConfigError("profile: unknown probe id '" + id + "'");
        p.expectations[id] = parse_set(set, "'" + id + "'");
    }
    if (p.registry_hash.empty())
        p.warnings.push_back("profile carries no registry hash");
    else if (p.registry_hash != registry.hash())
        p.warnings.push_back("profile written against registry " + p.registry_hash + ", running " + registry.hash());
    return p;
}

Policy resolve_profile(std::string_view name_or_path)
{
    const auto names = bundled_profile_names();
    if (std::find(names.begin(), names.end(), name_or_path) != names.end()) return load_profile(make_bundled(name_or_path));
    const fs::path path{std::string(name_or_path)};
    std::ifstream in(path);
    if (!in) throw ConfigError("profile: cannot open '" + path.string() + "'");
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError("profile: " + path.string() + " is not valid JSON: " + e.what());
    }
    return load_profile(doc);
}

Json policy_to_json(const Policy& p)
{
    Json doc;
    doc["version"] = kProfileVersion;
    doc["name"] = p.name;
    doc["registry_hash"] = p.registry_hash;
    doc["default"] = set_json(p.default_expectation);
    Json exp = Json::object();
    for (const auto& [id, set] : p.expectations) exp[id] = set_json(set);
    doc["expectations"] = exp;
    return doc;
}

std::size_t Evaluation::count(VerdictStatus s) const
{
    return static_cast<std::size_t>(
        std::count_if(verdicts.begin(), verdicts.end(), [s](const Verdict& v) { return v.status == s; }));
}

Evaluation evaluate(const RunReport& report, const Policy& policy)
{
    Evaluation e;
    for (const auto& r : report.results) {
        const auto expected = policy.expected_for(r.probe);
        e.verdicts.push_back({r.probe, r.outcome, expected, judge(r.outcome, expected)});
    }
    if (e.count(VerdictStatus::Violation) > 0)
        e.overall = VerdictStatus::Violation;
    else if (e.count(VerdictStatus::Indeterminate) > 0)
        e.overall = VerdictStatus::Indeterminate;
    return e;
}

}  // namespace sandboxeval
