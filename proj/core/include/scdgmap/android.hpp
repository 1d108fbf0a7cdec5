// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace scdgmap {

struct ApiEvent {
    std::int64_t timestamp_us = 0;
    int pid = 0;
    int tid = 0;
    std::string api_name;  // fully qualified method
    std::string tag;

    bool operator==(const ApiEvent&) const = default;
};

nlohmann::json api_event_to_json(const ApiEvent& e);
ApiEvent api_event_from_json(const nlohmann::json& j);

struct LogcatConfig {
    std::string marker_tag = "APICALL";
};

struct ApiEventLoad {
    std::vector<ApiEvent> events;  // time-sorted
    std::size_t ignored_count = 0;
};

/// Reads an epoch-format logcat stream (`EPOCH.FRAC PID TID LEVEL TAG: MSG`)
/// and returns the events carrying the API-marker tag.
ApiEventLoad load_api_events(const std::string& path, const LogcatConfig& config);
ApiEventLoad load_api_events_text(std::string_view text, const LogcatConfig& config);

/// The <pid, packname, pms_1..pms_n> permission vector.
struct PermissionManifest {
    int pid = 0;  // 0 when the package has no pid in the map
    std::string packname;
    std::vector<std::string> permissions;  // order preserved, deduplicated

    bool operator==(const PermissionManifest&) const = default;
};

PermissionManifest parse_manifest(const std::string& path,
                                  const std::map<int, std::string>& pid_map);
PermissionManifest parse_manifest_text(const std::string& xml,
                                       const std::map<int, std::string>& pid_map);

struct ApiPermissionMap {
    std::map<std::string, std::set<std::string>> entries;

    const std::set<std::string>* find(const std::string& api_name) const {
        auto it = entries.find(api_name);
        return it == entries.end() ? nullptr : &it->second;
    }
};

ApiPermissionMap load_api_permission_map(const std::string& path);
ApiPermissionMap parse_api_permission_map(const std::string& json_text);

} // namespace scdgmap
