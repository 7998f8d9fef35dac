#include "sandboxeval/report.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <regex>
#include <sstream>

#include "sandboxeval/digest.hpp"
#include "sandboxeval/registry.hpp"

namespace sandboxeval {

namespace {

std::string upper(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

const std::regex& secret_value_pattern()
{
    static const std::regex re(
        R"(-----BEGIN [A-Z ]*PRIVATE KEY-----)"
        R"(|\bAKIA[0-9A-Z]{16}\b)"
        R"(|\bgh[pousr]_[A-Za-z0-9]{36,})"
        R"(|\bsk-[A-Za-z0-9_-]{20,})"
        R"(|\bxox[abprs]-[A-Za-z0-9-]{10,})"
        R"(|eyJ[A-Za-z0-9_-]{8,}\.[A-Za-z0-9_-]{8,}\.)"
        R"(|[Bb]earer\s+[A-Za-z0-9._~+/=-]{8,})"
        R"(|[A-Za-z][A-Za-z0-9+.-]*://[^/\s:@]+:[^/\s@]+@)"
        R"(|(^|[\s;&?,])([Pp][Aa][Ss][Ss][Ww]([Oo][Rr])?[Dd]|[Ss][Ee][Cc][Rr][Ee][Tt]|[Tt][Oo][Kk][Ee][Nn]|[Aa][Pp][Ii]_?[Kk][Ee][Yy])=\S+)",
        std::regex::optimize);
    return re;
}

const std::regex& address_pattern()
{
    static const std::regex re(
        R"(\b\d{1,3}(\.\d{1,3}){3}\b)"
        R"(|\b([0-9A-Fa-f]{2}:){5}[0-9A-Fa-f]{2}\b)"
        R"(|\b[0-9A-Fa-f]{0,4}(:[0-9A-Fa-f]{0,4}){2,7}(%[A-Za-z0-9_.-]+)?)",
        std::regex::optimize);
    return re;
}

bool is_digest_token(std::string_view s)
{
    if (s.size() != 71 || s.substr(0, 7) != "sha256:") return false;
    return std::all_of(s.begin() + 7, s.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
}

// Network-address-like keys, only hashed under Strict.
bool is_address_key(std::string_view key)
{
    auto k = upper(key);
    return k == "HOSTNAME" || k == "ADDRESS" || k == "ADDRESSES" || k == "HARDWARE_ADDRESS" || k == "RESOLVER" ||
           k == "NODENAME";
}

std::string replace_addresses(const std::string& text)
{
    std::string out;
    auto begin = std::sregex_iterator(text.begin(), text.end(), address_pattern());
    std::size_t last = 0;
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        auto token = m.str();
        // Clock times like 12:30:45 also match the IPv6 alternative.
        if (token.find('.') == std::string::npos && token.find("::") == std::string::npos &&
            std::count(token.begin(), token.end(), ':') < 3)
            continue;
        out.append(text, last, static_cast<std::size_t>(m.position()) - last);
        out += digest_token(token);
        last = static_cast<std::size_t>(m.position() + m.length());
    }
    out.append(text, last, std::string::npos);
    return out;
}

std::string leaf_text(const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

Json redact_walk(const Json& v, RedactLevel level, bool secret_context, bool address_context, bool& changed)
{
    if (v.is_object()) {
        Json out = Json::object();
        for (auto it = v.begin(); it != v.end(); ++it) {
            const bool secret = secret_context || is_secret_key(it.key());
            const bool address = address_context || (level == RedactLevel::Strict && is_address_key(it.key()));
            out[it.key()] = redact_walk(it.value(), level, secret, address, changed);
        }
        return out;
    }
    if (v.is_array()) {
        Json out = Json::array();
        for (const auto& item : v) out.push_back(redact_walk(item, level, secret_context, address_context, changed));
        return out;
    }
    if (v.is_null() || v.is_boolean()) return v;
    const auto text = leaf_text(v);
    if (v.is_string() && is_digest_token(text)) return v;
    if (secret_context || address_context || (v.is_string() && looks_like_secret(text))) {
        changed = true;
        return digest_token(text);
    }
    if (level == RedactLevel::Strict && v.is_string()) {
        auto replaced = replace_addresses(text);
        if (replaced != text) {
            changed = true;
            return replaced;
        }
    }
    return v;
}

}  // namespace

bool is_secret_key(std::string_view key)
{
    const auto k = upper(key);
    for (const char* word : {"KEY", "TOKEN", "SECRET", "PASSWORD", "PASSWD", "PASSPHRASE", "CREDENTIAL", "AUTH",
                             "COOKIE", "PRIVATE"})
        if (k.find(word) != std::string::npos) return true;
    return false;
}

bool looks_like_secret(std::string_view value)
{
    return std::regex_search(value.begin(), value.end(), secret_value_pattern());
}

std::string digest_token(std::string_view value) { return "sha256:" + sha256_hex(value); }

Json redact_json(const Json& value, RedactLevel level, bool& changed)
{
    changed = false;
    if (level == RedactLevel::Off) return value;
    return redact_walk(value, level, false, false, changed);
}

std::string redact_text(const std::string& text, RedactLevel level)
{
    if (level == RedactLevel::Off || is_digest_token(text)) return text;
    if (looks_like_secret(text)) return digest_token(text);
    if (level == RedactLevel::Strict) return replace_addresses(text);
    return text;
}

// ---------------------------------------------------------------------------
// Structured form

namespace {

Json evidence_json(const Evidence& e, RedactLevel level)
{
    bool changed = false;
    Json payload = redact_json(e.payload, level, changed);
    Json j;
    j["kind"] = e.kind;
    j["redacted"] = e.redacted || changed;
    j["truncation_note"] = e.truncation_note ? Json(*e.truncation_note) : Json(nullptr);
    j["payload"] = std::move(payload);
    return j;
}

Json optional_text(const std::optional<std::string>& s, RedactLevel level)
{
    return s ? Json(redact_text(*s, level)) : Json(nullptr);
}

template <class T>
T field(const Json& j, const char* name)
{
    if (!j.is_object() || !j.contains(name)) throw ParseError(std::string("report: missing field '") + name + "'");
    try {
        return j.at(name).get<T>();
    } catch (const Json::exception&) {
        throw ParseError(std::string("report: field '") + name + "' has the wrong type");
    }
}

Evidence parse_evidence(const Json& j)
{
    Evidence e;
    e.kind = field<std::string>(j, "kind");
    e.redacted = field<bool>(j, "redacted");
    if (!j.contains("payload") || !j["payload"].is_object()) throw ParseError("report: evidence payload must be an object");
    e.payload = j["payload"];
    if (j.contains("truncation_note") && !j["truncation_note"].is_null())
        e.truncation_note = field<std::string>(j, "truncation_note");
    return e;
}

template <class T, class F>
T parse_enum(const Json& j, const char* name, F parse)
{
    auto text = field<std::string>(j, name);
    auto v = parse(text);
    if (!v) throw ParseError(std::string("report: bad value '") + text + "' for '" + name + "'");
    return *v;
}

}  // namespace

std::string render_structured(const RunReport& report, RedactLevel redact)
{
    Json doc;
    doc["schema_version"] = std::string(kReportSchema);
    doc["run_id"] = report.run_id;
    doc["started_at"] = report.started_at;
    doc["config_digest"] = report.config_digest;
    doc["environment"] = evidence_json(report.environment, redact);
    Json results = Json::array();
    const auto& registry = all_probes();
    for (const auto& r : report.results) {
        Json row;
        row["probe"] = r.probe.str();
        if (const auto* spec = registry.find(r.probe.str())) row["category"] = std::string(to_string(spec->category));
        row["mode_used"] = std::string(to_string(r.mode_used));
        row["outcome"] = std::string(to_string(r.outcome));
        row["duration_ms"] = r.duration.count();
        row["error_detail"] = optional_text(r.error_detail, redact);
        row["evidence"] = evidence_json(r.evidence, redact);
        results.push_back(std::move(row));
    }
    doc["results"] = std::move(results);
    Json summary = Json::array();
    for (const auto& s : report.summary)
        summary.push_back({{"category", std::string(to_string(s.category))},
                           {"accessed", s.counts.accessed},
                           {"denied", s.counts.denied},
                           {"unknown", s.counts.unknown}});
    doc["summary"] = std::move(summary);
    doc["valid"] = report.valid;
    Json notes = Json::array();
    for (const auto& n : report.safety_notes) notes.push_back(redact_text(n, redact));
    doc["safety_notes"] = std::move(notes);
    doc["redaction"] = std::string(to_string(redact));
    return doc.dump(2, ' ', false, Json::error_handler_t::replace) + "\n";
}

RunReport parse_structured(std::string_view bytes)
{
    Json doc;
    try {
        doc = Json::parse(bytes.begin(), bytes.end());
    } catch (const Json::parse_error& e) {
        throw ParseError(std::string("report: not valid JSON: ") + e.what());
    }
    const auto version = field<std::string>(doc, "schema_version");
    if (version != kReportSchema)
        throw ParseError("report: schema version '" + version + "' is not supported; this build reads '" +
                         std::string(kReportSchema) + "'");

    RunReport r;
    r.run_id = field<std::string>(doc, "run_id");
    r.started_at = field<std::string>(doc, "started_at");
    r.config_digest = field<std::string>(doc, "config_digest");
    r.environment = parse_evidence(doc.at("environment"));
    if (!doc.contains("results") || !doc["results"].is_array()) throw ParseError("report: 'results' must be a list");
    for (const auto& row : doc["results"]) {
        ProbeResult p{ProbeId("x.y"), ExecutionMode::Direct, Outcome::Unknown, {}, {}, std::nullopt};
        try {
            p.probe = ProbeId(field<std::string>(row, "probe"));
        } catch (const LookupError& e) {
            throw ParseError(std::string("report: ") + e.what());
        }
        p.mode_used = parse_enum<ExecutionMode>(row, "mode_used", parse_mode);
        p.outcome = parse_enum<Outcome>(row, "outcome", parse_outcome);
        p.duration = std::chrono::milliseconds(field<std::int64_t>(row, "duration_ms"));
        if (row.contains("error_detail") && !row["error_detail"].is_null())
            p.error_detail = field<std::string>(row, "error_detail");
        if (!row.contains("evidence")) throw ParseError("report: result without evidence");
        p.evidence = parse_evidence(row["evidence"]);
        r.results.push_back(std::move(p));
    }
    if (!doc.contains("summary") || !doc["summary"].is_array()) throw ParseError("report: 'summary' must be a list");
    for (const auto& row : doc["summary"]) {
        CategorySummary s{parse_enum<Category>(row, "category", parse_category), {}};
        s.counts.accessed = field<int>(row, "accessed");
        s.counts.denied = field<int>(row, "denied");
        s.counts.unknown = field<int>(row, "unknown");
        r.summary.push_back(s);
    }
    r.valid = doc.contains("valid") ? field<bool>(doc, "valid") : true;
    if (doc.contains("safety_notes")) r.safety_notes = field<std::vector<std::string>>(doc, "safety_notes");
    try {
        r.check_invariants();
    } catch (const IntegrityError&) {
        throw;
    } catch (const Error& e) {
        throw IntegrityError(std::string("report: ") + e.what());
    }
    return r;
}

// ---------------------------------------------------------------------------
// Table

std::string render_table(const RunReport& report)
{
    std::ostringstream out;
    out << "SandboxEval run " << (report.run_id.empty() ? "-" : report.run_id) << " started "
        << (report.started_at.empty() ? "-" : report.started_at) << "\n";
    if (!report.valid) {
        out << "RUN INVALID: safety check failed\n";
        for (const auto& n : report.safety_notes) out << "  " << n << "\n";
    }
    if (report.results.empty()) {
        out << "no probes run\n";
        return out.str();
    }
    const auto& registry = all_probes();
    constexpr int kWidth = 26;
    out << std::left << std::setw(kWidth) << "Category" << "Status\n";
    for (auto category : kAllCategories) {
        std::vector<std::string> groups[3];
        for (const auto& r : report.results) {
            const auto* spec = registry.find(r.probe.str());
            if (spec == nullptr || spec->category != category) continue;
            groups[static_cast<int>(r.outcome)].push_back(spec->label);
        }
        bool first = true;
        for (auto outcome : kAllOutcomes) {
            const auto& names = groups[static_cast<int>(outcome)];
            if (names.empty()) continue;
            std::string label(to_string(outcome));
            label[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(label[0])));
            std::string line = label + ": ";
            for (std::size_t i = 0; i < names.size(); ++i) line += (i ? ", " : "") + names[i];
            out << std::left << std::setw(kWidth) << (first ? std::string(display_name(category)) : std::string())
                << line << "\n";
            first = false;
        }
    }
    out << "\nSummary\n";
    OutcomeCounts total;
    for (const auto& s : report.summary) {
        out << std::left << std::setw(kWidth) << std::string(display_name(s.category)) << s.counts.accessed
            << " accessed, " << s.counts.denied << " denied, " << s.counts.unknown << " unknown\n";
        for (auto o : kAllOutcomes) total[o] += s.counts[o];
    }
    out << std::left << std::setw(kWidth) << "Total" << total.accessed << " accessed, " << total.denied << " denied, "
        << total.unknown << " unknown (" << total.total() << " probes)\n";
    return out.str();
}

std::string render_sidecar(const std::string& run_id, const std::map<std::string, Json>& payloads, RedactLevel redact)
{
    Json doc;
    doc["schema_version"] = std::string(kSidecarSchema);
    doc["run_id"] = run_id;
    Json all = Json::object();
    for (const auto& [id, payload] : payloads) {
        bool changed = false;
        all[id] = redact_json(payload, redact, changed);
    }
    doc["payloads"] = std::move(all);
    return doc.dump(2, ' ', false, Json::error_handler_t::replace) + "\n";
}

}  // namespace sandboxeval
