#pragma once

#include <map>
#include <string>
#include <string_view>

#include "sandboxeval/model.hpp"

namespace sandboxeval {

inline constexpr std::string_view kReportSchema = "sandboxeval-report/1";
inline constexpr std::string_view kSidecarSchema = "sandboxeval-sidecar/1";

/// True when a member named `key` holds a secret (API_KEY, db_password, ...).
bool is_secret_key(std::string_view key);

/// True for values that look like credentials whatever their key: private
/// key blocks, bearer tokens, well-known token formats, URL passwords.
bool looks_like_secret(std::string_view value);

/// "sha256:<hex>" of `value`.
std::string digest_token(std::string_view value);

/// Replaces secret values with digest tokens; under Strict also network
/// addresses. Already-digested values are left alone, so applying it twice
/// changes nothing. Sets `changed` when anything was replaced.
Json redact_json(const Json& value, RedactLevel level, bool& changed);
std::string redact_text(const std::string& text, RedactLevel level);

/// Report document with stable field order. Redaction marks affected
/// evidence as redacted.
std::string render_structured(const RunReport& report, RedactLevel redact = RedactLevel::Standard);

/// Throws ParseError (malformed, or another schema version, naming both)
/// and IntegrityError (summary or Unknown-detail invariants broken).
RunReport parse_structured(std::string_view bytes);

/// Per-category "Accessed: ... / Denied: ... / Unknown: ..." listing followed
/// by summary counts.
std::string render_table(const RunReport& report);

/// Untruncated payloads keyed by probe id.
std::string render_sidecar(const std::string& run_id, const std::map<std::string, Json>& payloads,
                           RedactLevel redact = RedactLevel::Standard);

}  // namespace sandboxeval
