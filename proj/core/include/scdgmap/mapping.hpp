// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "scdgmap/android.hpp"
#include "scdgmap/graph.hpp"
#include "scdgmap/ipc.hpp"

namespace scdgmap {

struct MapConfig {
    std::int64_t max_window_us = 500000;
    std::int64_t clock_offset_us = 0;  // added to logcat timestamps
    int min_match_size = 2;            // smallest SCDG considered for matching

    nlohmann::json to_json() const;
    static MapConfig from_json(const nlohmann::json& j);
};

/// Attribution window of one API invocation: entry timestamp to the next
/// same-(pid, tid) entry, capped at max_window_us.
struct ApiWindow {
    ApiEvent api;
    std::int64_t start_us = 0;
    std::int64_t end_us = 0;
};

std::vector<ApiWindow> build_windows(const std::vector<ApiEvent>& apis,
                                     const MapConfig& config);

struct Assignment {
    int graph_id = 0;
    int pid = 0;
    std::string api_name;
    std::int64_t api_t_us = 0;
    double overlap = 0.0;  // fraction of the graph's nodes inside the window

    bool operator==(const Assignment&) const = default;
};

struct MappingReport {
    std::vector<Assignment> assignments;
    std::vector<int> unmapped_graphs;
    std::vector<ApiEvent> unevidenced_apis;
    std::vector<IpcInteraction> ipc;
    std::int64_t clock_offset_us = 0;

    nlohmann::json to_json() const;
    static MappingReport from_json(const nlohmann::json& j);
};

/// Assigns each SCDG to the same-pid API window holding the majority of its
/// node timestamps; ties break toward the earlier window.
MappingReport assign_scdgs_to_apis(const std::vector<Scdg>& scdgs,
                                   const std::vector<ApiEvent>& apis,
                                   const MapConfig& config);

} // namespace scdgmap
