// sandboxeval: list, run and check the probe catalog from the command line.
//
// Exit codes: 0 success (check: conform), 1 check found violations or
// indeterminate probes, 2 usage, configuration or runtime failure.

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sandboxeval/config.hpp"
#include "sandboxeval/digest.hpp"
#include "sandboxeval/executor.hpp"
#include "sandboxeval/policy.hpp"
#include "sandboxeval/registry.hpp"
#include "sandboxeval/report.hpp"

namespace fs = std::filesystem;
using namespace sandboxeval;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNonConform = 1;
constexpr int kExitError = 2;

struct RunFlags {
    std::string config_file;
    std::vector<std::string> probes;
    std::vector<std::string> categories;
    std::string mode;
    std::string scratch;
    double timeout = 0;
    int depth = 0;
    int jobs = 0;
    std::string redact;
    std::string report_file;
    std::string sidecar_file;
    std::string isolation;
    std::string format = "table";
};

void add_run_flags(CLI::App* cmd, RunFlags& f)
{
    cmd->add_option("--config", f.config_file, "configuration file (JSON)");
    cmd->add_option("--probe", f.probes, "probe id to run (repeatable)");
    cmd->add_option("--category", f.categories, "category to run (repeatable)");
    cmd->add_option("--mode", f.mode, "only probes whose default mode is this (direct, infer-only, proxy)");
    cmd->add_option("--scratch", f.scratch, "scratch root; the only place probes may write");
    cmd->add_option("--timeout", f.timeout, "per-probe timeout in seconds");
    cmd->add_option("--depth", f.depth, "maximum enumeration depth");
    cmd->add_option("--jobs", f.jobs, "concurrent non-exclusive probes");
    cmd->add_option("--redact", f.redact, "off, standard or strict");
    cmd->add_option("--report", f.report_file, "write the structured report here");
    cmd->add_option("--sidecar", f.sidecar_file, "write untruncated payloads here");
    cmd->add_option("--isolation", f.isolation, "in-process or subprocess");
    cmd->add_option("--format", f.format, "stdout format: table or json")->check(CLI::IsMember({"table", "json"}));
}

Json read_json_file(const std::string& path, const char* what)
{
    std::ifstream in(path);
    if (!in) throw ConfigError(std::string("cannot open ") + what + " '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string(what) + " '" + path + "' is not valid JSON: " + e.what());
    }
}

fs::path default_scratch()
{
    const char* tmp = std::getenv("TMPDIR");
    fs::path base = tmp && *tmp ? fs::path(tmp) : fs::temp_directory_path();
    return base / ("sandboxeval-" + random_token(6));
}

// Defaults, then the file, then SANDBOXEVAL_SCRATCH, then flags.
RunConfig build_config(const RunFlags& f)
{
    RunConfig c = f.config_file.empty() ? RunConfig{} : config_from_json(read_json_file(f.config_file, "configuration"));
    if (c.scratch_root.empty())
        if (const char* env = std::getenv("SANDBOXEVAL_SCRATCH"); env && *env) c.scratch_root = env;
    if (!f.scratch.empty()) c.scratch_root = f.scratch;
    if (c.scratch_root.empty()) c.scratch_root = default_scratch();
    if (!f.probes.empty()) c.selection.probes = {f.probes.begin(), f.probes.end()};
    if (!f.categories.empty()) {
        c.selection.categories.clear();
        for (const auto& name : f.categories) {
            auto cat = parse_category(name);
            if (!cat) throw ConfigError("unknown category '" + name + "'");
            c.selection.categories.insert(*cat);
        }
    }
    if (!f.mode.empty()) {
        auto m = parse_mode(f.mode);
        if (!m) throw ConfigError("unknown mode '" + f.mode + "'");
        c.selection.mode = m;
    }
    if (f.timeout != 0) c.per_probe_timeout = f.timeout;
    if (f.depth != 0) c.max_depth = f.depth;
    if (f.jobs != 0) c.jobs = f.jobs;
    if (!f.redact.empty()) {
        auto r = parse_redact(f.redact);
        if (!r) throw ConfigError("unknown redact level '" + f.redact + "'");
        c.redact = *r;
    }
    if (!f.isolation.empty()) {
        auto i = parse_isolation(f.isolation);
        if (!i) throw ConfigError("unknown isolation '" + f.isolation + "'");
        c.isolation = *i;
    }
    c.validate();
    return c;
}

// Opens (and truncates) an output file up front so an unwritable path fails
// before any probe runs.
std::ofstream open_output(const std::string& path, const char* what)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError(std::string("cannot write ") + what + " '" + path + "'");
    return out;
}

struct Outputs {
    std::ofstream report;
    std::ofstream sidecar;
};

Outputs open_outputs(const RunFlags& f)
{
    Outputs o;
    if (!f.report_file.empty()) o.report = open_output(f.report_file, "report");
    if (!f.sidecar_file.empty()) o.sidecar = open_output(f.sidecar_file, "sidecar");
    return o;
}

RunReport execute(const RunConfig& config, const RunFlags& f, Outputs& out)
{
    std::map<std::string, Json> full;
    RunHooks hooks;
    if (out.sidecar.is_open()) hooks.full_payloads = &full;
    auto report = run_suite(config, hooks);
    const auto text = render_structured(report, config.redact);
    if (out.report.is_open()) {
        out.report << text;
        out.report.flush();
        if (!out.report) throw Error("failed writing report '" + f.report_file + "'");
    }
    if (out.sidecar.is_open()) {
        out.sidecar << render_sidecar(report.run_id, full, config.redact);
        out.sidecar.flush();
    }
    if (f.format == "json")
        std::cout << text;
    else
        std::cout << render_table(report);
    return report;
}

int cmd_list(const std::string& category, const std::string& format)
{
    std::optional<Category> filter;
    if (!category.empty()) {
        filter = parse_category(category);
        if (!filter) {
            std::cerr << "sandboxeval: unknown category '" << category << "'\n";
            return kExitError;
        }
    }
    const auto specs = all_probes().filter(filter);
    if (format == "json") {
        Json rows = Json::array();
        for (const auto& s : specs)
            rows.push_back({{"id", s.id.str()},
                            {"category", std::string(to_string(s.category))},
                            {"action", s.action},
                            {"label", s.label},
                            {"default_mode", std::string(to_string(s.default_mode))},
                            {"safety_class", std::string(to_string(s.safety_class))},
                            {"requires_exclusive", s.requires_exclusive},
                            {"description", s.description}});
        std::cout << rows.dump(2) << "\n";
        return kExitOk;
    }
    for (const auto& s : specs)
        std::cout << std::left << std::setw(34) << s.id.str() << std::setw(24) << to_string(s.category)
                  << std::setw(12) << to_string(s.default_mode) << s.description << "\n";
    return kExitOk;
}

int cmd_run(const RunFlags& f)
{
    try {
        const auto config = build_config(f);
        auto out = open_outputs(f);
        auto report = execute(config, f, out);
        if (!report.valid) {
            std::cerr << "sandboxeval: safety check failed; report marked invalid\n";
            return kExitError;
        }
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "sandboxeval: " << e.what() << "\n";
        return kExitError;
    }
}

int cmd_check(const RunFlags& f, const std::string& profile_name, const std::string& input)
{
    try {
        const auto policy = resolve_profile(profile_name);
        for (const auto& w : policy.warnings) std::cerr << "sandboxeval: warning: " << w << "\n";
        RunReport report;
        if (!input.empty()) {
            std::ifstream in(input);
            if (!in) throw ConfigError("cannot open report '" + input + "'");
            std::stringstream buf;
            buf << in.rdbuf();
            report = parse_structured(buf.str());
        } else {
            const auto config = build_config(f);
            auto out = open_outputs(f);
            report = execute(config, f, out);
            if (!report.valid) {
                std::cerr << "sandboxeval: safety check failed; report marked invalid\n";
                return kExitError;
            }
        }
        const auto eval = evaluate(report, policy);
        std::cout << "\nProfile " << policy.name << ": " << to_string(eval.overall) << " ("
                  << eval.count(VerdictStatus::Conform) << " conform, " << eval.count(VerdictStatus::Violation)
                  << " violations, " << eval.count(VerdictStatus::Indeterminate) << " indeterminate)\n";
        for (const auto& v : eval.verdicts) {
            if (v.status == VerdictStatus::Conform) continue;
            std::string expected;
            for (auto o : v.expected.members()) expected += (expected.empty() ? "" : "|") + std::string(to_string(o));
            std::cout << "  " << std::left << std::setw(14) << to_string(v.status) << std::setw(30) << v.probe.str()
                      << "observed " << to_string(v.observed) << ", expected " << expected << "\n";
        }
        return eval.overall == VerdictStatus::Conform ? kExitOk : kExitNonConform;
    } catch (const std::exception& e) {
        std::cerr << "sandboxeval: " << e.what() << "\n";
        return kExitError;
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Probe what a sandbox lets untrusted code see and do"};
    app.require_subcommand(1);

    std::string list_category, list_format = "table";
    auto* list = app.add_subcommand("list", "print the probe catalog");
    list->add_option("--category", list_category, "only this category");
    list->add_option("--format", list_format, "table or json")->check(CLI::IsMember({"table", "json"}));

    RunFlags run_flags;
    auto* run = app.add_subcommand("run", "run probes and write a report");
    add_run_flags(run, run_flags);

    RunFlags check_flags;
    std::string profile, input;
    auto* check = app.add_subcommand("check", "run probes and judge them against an expectation profile");
    add_run_flags(check, check_flags);
    check->add_option("--profile", profile, "bundled profile name or profile file")->required();
    check->add_option("--input", input, "judge an existing report instead of running");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitError;
    }

    if (*list) return cmd_list(list_category, list_format);
    if (*run) return cmd_run(run_flags);
    return cmd_check(check_flags, profile, input);
}
