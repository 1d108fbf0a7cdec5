// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "scdgmap/rules.hpp"
#include "scdgmap/trace.hpp"

namespace scdgmap {

enum class DepKind { FdFlow, FdAlias, MmapAddress, ValueMatch };

const char* to_string(DepKind kind);
DepKind dep_kind_from_string(std::string_view s);

struct DependenceEdge {
    std::int64_t from_event = 0;  // producer
    std::int64_t to_event = 0;    // consumer
    int to_arg_index = 0;         // consumer argument receiving the value
    DepKind kind = DepKind::FdFlow;
    std::string value;            // flowed value, string form

    auto operator<=>(const DependenceEdge&) const = default;
};

enum class PathClass { AppData, ExternalStorage, DevBinder, DevAshmem, System, Other };

const char* to_string(PathClass c);
PathClass path_class_from_string(std::string_view s);

/// Classifies the first string-literal argument's path, Other when none.
PathClass classify_event_path(const SyscallEvent& e);

struct NodeAttrs {
    PathClass path_class = PathClass::Other;
    bool success = true;

    bool operator==(const NodeAttrs&) const = default;
};

struct ScdgNode {
    std::int64_t id = 0;  // event_id within the owning session
    std::string label;    // normalized syscall name
    std::int64_t t_us = 0;
    NodeAttrs attrs;

    bool operator==(const ScdgNode&) const = default;
};

/// One weakly-connected System Call Dependence Graph.
struct Scdg {
    int graph_id = 0;
    int pid = 0;
    std::pair<std::int64_t, std::int64_t> span_us{0, 0};
    std::vector<ScdgNode> nodes;   // sorted by id
    std::vector<DependenceEdge> edges;  // sorted

    bool operator==(const Scdg&) const = default;
};

/// All dependence edges of a session under the given rules, sorted and
/// deduplicated. Each pid stream is processed independently.
std::vector<DependenceEdge> derive_dependences(const TraceSession& session,
                                               const DependenceRuleSet& rules);

std::vector<Scdg> build_scdgs(const TraceSession& session, const DependenceRuleSet& rules,
                              const NormalizationTable& norm);

std::string export_dot(const Scdg& g);
nlohmann::json scdg_to_json(const Scdg& g);
Scdg scdg_from_json(const nlohmann::json& j);

} // namespace scdgmap
