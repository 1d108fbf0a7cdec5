// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <set>
#include <string>

#include <nlohmann/json_fwd.hpp>

namespace scdgmap {

/// The dependence-rule families, kept as data so they can be extended
/// through configuration instead of code changes.
struct DependenceRuleSet {
    // Syscalls whose successful integer return (or pipe out-array) yields an fd.
    std::set<std::string> fd_producers;
    // Syscall name -> argument index that receives an fd.
    std::map<std::string, int> fd_consumers;
    // dup-family: syscall name -> argument index of the source fd.
    std::map<std::string, int> alias_rules;
    bool value_match_enabled = true;
    std::size_t value_match_min_length = 6;
    // Out-params of these syscalls feed the value-match rule.
    std::set<std::string> producer_outparam_syscalls;

    static DependenceRuleSet defaults();

    nlohmann::json to_json() const;
    static DependenceRuleSet from_json(const nlohmann::json& j);
};

/// Syscall-label normalization (openat -> open, dup2 -> dup, ...).
struct NormalizationTable {
    std::map<std::string, std::string> entries;

    static NormalizationTable defaults();

    const std::string& normalize(const std::string& name) const;

    nlohmann::json to_json() const;
    static NormalizationTable from_json(const nlohmann::json& j);
};

} // namespace scdgmap
