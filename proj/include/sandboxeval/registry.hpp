#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sandboxeval/model.hpp"

namespace sandboxeval {

inline constexpr std::size_t kProbeCount = 51;

/// The static catalog. Order: system, directory, metadata, structure,
/// content, privilege, communication, dangerous operations.
class Registry {
public:
    std::span<const ProbeSpec> specs() const noexcept { return specs_; }
    std::size_t count() const noexcept { return specs_.size(); }
    std::size_t count(Category c) const;

    /// Throws LookupError naming the id when absent.
    const ProbeSpec& at(const ProbeId& id) const;
    const ProbeSpec* find(std::string_view id) const;

    /// Intersection of the given filters, in catalog order. Every id in
    /// `ids` must exist, otherwise LookupError names the first offender.
    std::vector<ProbeSpec> filter(std::optional<Category> category = std::nullopt,
                                  std::optional<ExecutionMode> mode = std::nullopt,
                                  const std::optional<std::set<std::string>>& ids = std::nullopt) const;

    /// One line per probe: id|category|action|mode|safety|exclusive.
    std::string canonical_text() const;

    /// sha256 of canonical_text(), hex encoded.
    std::string hash() const;

private:
    friend const Registry& all_probes();
    explicit Registry(std::vector<ProbeSpec> specs);

    std::vector<ProbeSpec> specs_;
};

const Registry& all_probes();

}  // namespace sandboxeval
