// SPDX-License-Identifier: Apache-2.0
#include "scdgmap/mapping.hpp"

#include <algorithm>
#include <map>

#include <nlohmann/json.hpp>

#include "scdgmap/error.hpp"

namespace scdgmap {

nlohmann::json MapConfig::to_json() const {
    return {{"max_window_us", max_window_us},
            {"clock_offset_us", clock_offset_us},
            {"min_match_size", min_match_size}};
}

MapConfig MapConfig::from_json(const nlohmann::json& j) {
    MapConfig c;
    c.max_window_us = j.value("max_window_us", c.max_window_us);
    c.clock_offset_us = j.value("clock_offset_us", c.clock_offset_us);
    c.min_match_size = j.value("min_match_size", c.min_match_size);
    return c;
}

std::vector<ApiWindow> build_windows(const std::vector<ApiEvent>& apis,
                                     const MapConfig& config) {
    std::map<std::pair<int, int>, std::vector<ApiEvent>> streams;
    for (const ApiEvent& a : apis) {
        ApiEvent shifted = a;
        shifted.timestamp_us += config.clock_offset_us;
        streams[{a.pid, a.tid}].push_back(std::move(shifted));
    }

    std::vector<ApiWindow> windows;
    for (auto& [key, stream] : streams) {
        std::stable_sort(stream.begin(), stream.end(),
                         [](const ApiEvent& a, const ApiEvent& b) {
                             return a.timestamp_us < b.timestamp_us;
                         });
        for (std::size_t i = 0; i < stream.size(); ++i) {
            ApiWindow w;
            w.api = stream[i];
            w.start_us = stream[i].timestamp_us;
            w.end_us = w.start_us + config.max_window_us;
            if (i + 1 < stream.size())
                w.end_us = std::min(w.end_us, stream[i + 1].timestamp_us);
            windows.push_back(std::move(w));
        }
    }
    std::stable_sort(windows.begin(), windows.end(),
                     [](const ApiWindow& a, const ApiWindow& b) {
                         if (a.start_us != b.start_us) return a.start_us < b.start_us;
                         if (a.api.pid != b.api.pid) return a.api.pid < b.api.pid;
                         return a.api.tid < b.api.tid;
                     });
    return windows;
}

MappingReport assign_scdgs_to_apis(const std::vector<Scdg>& scdgs,
                                   const std::vector<ApiEvent>& apis,
                                   const MapConfig& config) {
    MappingReport report;
    report.clock_offset_us = config.clock_offset_us;

    const std::vector<ApiWindow> windows = build_windows(apis, config);
    std::vector<bool> evidenced(windows.size(), false);

    for (const Scdg& g : scdgs) {
        std::size_t best = windows.size();
        std::size_t best_count = 0;
        for (std::size_t w = 0; w < windows.size(); ++w) {
            if (windows[w].api.pid != g.pid) continue;
            std::size_t count = 0;
            for (const auto& node : g.nodes)
                if (node.t_us >= windows[w].start_us && node.t_us < windows[w].end_us)
                    ++count;
            // Ties break toward the earlier window (windows are start-sorted).
            if (count > best_count) {
                best_count = count;
                best = w;
            }
        }
        if (best == windows.size()) {
            report.unmapped_graphs.push_back(g.graph_id);
            continue;
        }
        evidenced[best] = true;
        report.assignments.push_back(
            {g.graph_id, g.pid, windows[best].api.api_name, windows[best].api.timestamp_us,
             static_cast<double>(best_count) / static_cast<double>(g.nodes.size())});
    }

    for (std::size_t w = 0; w < windows.size(); ++w)
        if (!evidenced[w]) report.unevidenced_apis.push_back(windows[w].api);

    std::sort(report.assignments.begin(), report.assignments.end(),
              [](const Assignment& a, const Assignment& b) { return a.graph_id < b.graph_id; });
    std::sort(report.unmapped_graphs.begin(), report.unmapped_graphs.end());
    return report;
}

nlohmann::json MappingReport::to_json() const {
    nlohmann::json assigns = nlohmann::json::array();
    for (const auto& a : assignments)
        assigns.push_back({{"graph_id", a.graph_id},
                           {"pid", a.pid},
                           {"api_name", a.api_name},
                           {"api_t_us", a.api_t_us},
                           {"overlap", a.overlap}});
    nlohmann::json unevidenced = nlohmann::json::array();
    for (const auto& a : unevidenced_apis) unevidenced.push_back(api_event_to_json(a));
    nlohmann::json ipc_list = nlohmann::json::array();
    for (const auto& i : ipc) ipc_list.push_back(ipc_to_json(i));
    return {{"assignments", assigns},
            {"unmapped_graphs", unmapped_graphs},
            {"unevidenced_apis", unevidenced},
            {"ipc", ipc_list},
            {"clock_offset_us", clock_offset_us}};
}

MappingReport MappingReport::from_json(const nlohmann::json& j) {
    MappingReport r;
    try {
        for (const auto& a : j.at("assignments"))
            r.assignments.push_back({a.at("graph_id").get<int>(), a.at("pid").get<int>(),
                                     a.at("api_name").get<std::string>(),
                                     a.at("api_t_us").get<std::int64_t>(),
                                     a.at("overlap").get<double>()});
        r.unmapped_graphs = j.at("unmapped_graphs").get<std::vector<int>>();
        for (const auto& a : j.at("unevidenced_apis"))
            r.unevidenced_apis.push_back(api_event_from_json(a));
        for (const auto& i : j.at("ipc")) r.ipc.push_back(ipc_from_json(i));
        r.clock_offset_us = j.at("clock_offset_us").get<std::int64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("bad mapping report: ") + e.what());
    }
    return r;
}

} // namespace scdgmap
