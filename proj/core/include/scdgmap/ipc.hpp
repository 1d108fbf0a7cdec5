// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "scdgmap/graph.hpp"

namespace scdgmap {

enum class IpcMechanism { Binder, Ashmem };

const char* to_string(IpcMechanism m);
IpcMechanism ipc_mechanism_from_string(std::string_view s);

struct IpcInteraction {
    std::int64_t event_id = 0;  // the ioctl / mmap event
    IpcMechanism mechanism = IpcMechanism::Binder;
    int caller_pid = 0;
    std::string request;   // decoded ioctl command, e.g. BINDER_WRITE_READ
    bool resolved = false;
    std::string callee;    // service name, or the unresolved handle token

    bool operator==(const IpcInteraction&) const = default;
};

nlohmann::json ipc_to_json(const IpcInteraction& i);
IpcInteraction ipc_from_json(const nlohmann::json& j);

/// Resolution table: keys are either a device path ("/dev/binder") or a
/// device path plus handle token ("/dev/binder#handle:camera"); a keyed
/// handle token must appear in the ioctl's argument text to match.
struct ServiceMap {
    std::map<std::string, std::string> entries;

    static ServiceMap from_json(const nlohmann::json& j);
    static ServiceMap load(const std::string& path);
    nlohmann::json to_json() const;
};

struct IpcConfig {
    std::set<std::string> binder_devices{"/dev/binder", "/dev/hwbinder", "/dev/vndbinder"};
    std::set<std::string> ashmem_devices{"/dev/ashmem"};
};

struct IpcResult {
    std::vector<IpcInteraction> interactions;
    std::vector<std::string> diagnostics;  // e.g. ioctl with no traceable fd producer
};

IpcResult extract_ipc(const std::vector<Scdg>& scdgs, const TraceSession& session,
                      const ServiceMap& service_map, const IpcConfig& config = {});

} // namespace scdgmap
