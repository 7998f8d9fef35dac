#include <doctest.h>

#include <fstream>

#include "../support/fixtures.hpp"
#include "../support/report_gen.hpp"
#include "sandboxeval/policy.hpp"
#include "sandboxeval/registry.hpp"

using namespace sandboxeval;
namespace fs = std::filesystem;

namespace {

const fs::path kGolden = SANDBOXEVAL_TEST_DATA;
const fs::path kProfiles = fs::path(SANDBOXEVAL_TEST_DATA) / ".." / ".." / "profiles";

Json read_json(const fs::path& p)
{
    std::ifstream in(p);
    return Json::parse(in);
}

Json minimal(Json expectations)
{
    return {{"version", 1}, {"name", "t"}, {"default", {"denied"}}, {"expectations", std::move(expectations)}};
}

std::string config_error(const Json& doc)
{
    try {
        load_profile(doc);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_SUITE("policy") {

TEST_CASE("bundled profiles load cleanly and match the shipped files")
{
    CHECK(bundled_profile_names() == std::vector<std::string>{"dyff-hardened", "unconfined"});
    for (const auto& name : bundled_profile_names()) {
        CAPTURE(name);
        const auto p = resolve_profile(name);
        CHECK(p.name == name);
        CHECK(p.warnings.empty());
        CHECK(p.expectations.size() == kProbeCount);
        CHECK(read_json(kProfiles / (name + ".json")) == bundled_profile(name));
        const auto from_file = resolve_profile((kProfiles / (name + ".json")).string());
        CHECK(policy_to_json(from_file) == policy_to_json(p));
    }
    CHECK_THROWS_AS(bundled_profile("nope"), LookupError);
}

TEST_CASE("hardened profile denies every communication and dangerous probe")
{
    const auto p = resolve_profile("dyff-hardened");
    for (const auto& spec : all_probes().specs()) {
        if (spec.category != Category::ExternalCommunication && spec.category != Category::DangerousOperation) continue;
        CHECK(p.expected_for(spec.id) == OutcomeSet{Outcome::Denied});
    }
}

TEST_CASE("profile errors name the problem")
{
    CHECK(config_error(minimal({{"net.htpp", {"denied"}}})).find("net.htpp") != std::string::npos);
    CHECK(config_error(minimal({{"net.http", Json::array()}})).find("empty") != std::string::npos);
    CHECK(config_error(minimal({{"net.http", {"maybe"}}})).find("maybe") != std::string::npos);
    auto v2 = minimal(Json::object());
    v2["version"] = 2;
    CHECK(config_error(v2).find("version") != std::string::npos);
    auto no_default = minimal(Json::object());
    no_default.erase("default");
    CHECK(config_error(no_default).find("default") != std::string::npos);
    CHECK_THROWS_AS(resolve_profile("/nonexistent/profile.json"), ConfigError);

    testing::TempDir dir;
    std::ofstream(dir.path() / "bad.json") << "{ not json";
    CHECK_THROWS_AS(resolve_profile((dir.path() / "bad.json").string()), ConfigError);
}

TEST_CASE("registry hash mismatch is a warning")
{
    auto doc = minimal(Json::object());
    doc["registry_hash"] = "0000";
    const auto p = load_profile(doc);
    REQUIRE(p.warnings.size() == 1);
    CHECK(p.warnings[0].find("0000") != std::string::npos);
}

TEST_CASE("outcome names are case-insensitive")
{
    const auto p = load_profile(minimal({{"net.http", {"Accessed", "DENIED"}}}));
    CHECK(p.expected_for(ProbeId("net.http")) == OutcomeSet{Outcome::Accessed, Outcome::Denied});
    CHECK(p.expected_for(ProbeId("net.ftp")) == OutcomeSet{Outcome::Denied});
}

TEST_CASE("verdict rule")
{
    const OutcomeSet denied{Outcome::Denied};
    CHECK(judge(Outcome::Denied, denied) == VerdictStatus::Conform);
    CHECK(judge(Outcome::Accessed, denied) == VerdictStatus::Violation);
    CHECK(judge(Outcome::Unknown, denied) == VerdictStatus::Indeterminate);
    CHECK(judge(Outcome::Unknown, OutcomeSet{Outcome::Unknown}) == VerdictStatus::Indeterminate);
}

TEST_CASE("table IV outcomes conform to the hardened profile")
{
    const auto policy = resolve_profile("dyff-hardened");
    auto report = testing::report_from_outcomes(kGolden / "table_iv_outcomes.txt");
    REQUIRE(report.results.size() == kProbeCount);
    auto e = evaluate(report, policy);
    CHECK(e.overall == VerdictStatus::Conform);
    CHECK(e.count(VerdictStatus::Violation) == 0);
    CHECK(e.verdicts.size() == kProbeCount);

    // Each communication probe flipped alone yields exactly one violation.
    for (auto& r : report.results) {
        if (all_probes().at(r.probe).category != Category::ExternalCommunication) continue;
        CAPTURE(r.probe.str());
        r.outcome = Outcome::Accessed;
        e = evaluate(report, policy);
        CHECK(e.overall == VerdictStatus::Violation);
        CHECK(e.count(VerdictStatus::Violation) == 1);
        r.outcome = Outcome::Unknown;
        e = evaluate(report, policy);
        CHECK(e.overall == VerdictStatus::Indeterminate);
        r.outcome = Outcome::Denied;
    }

    // Violation wins over indeterminate.
    report.results[0].outcome = Outcome::Unknown;
    report.results.back().outcome = Outcome::Accessed;
    CHECK(evaluate(report, policy).overall == VerdictStatus::Violation);
}

TEST_CASE("unconfined accepts anything determinate")
{
    const auto policy = resolve_profile("unconfined");
    auto report = testing::report_from_outcomes(kGolden / "table_iv_outcomes.txt");
    for (auto& r : report.results) r.outcome = Outcome::Accessed;
    CHECK(evaluate(report, policy).overall == VerdictStatus::Conform);
}

}
