// SPDX-License-Identifier: Apache-2.0
#include "scdgmap/ipc.hpp"

#include <fstream>
#include <map>
#include <optional>

#include <nlohmann/json.hpp>

#include "scdgmap/error.hpp"

namespace scdgmap {

const char* to_string(IpcMechanism m) {
    return m == IpcMechanism::Binder ? "binder" : "ashmem";
}

IpcMechanism ipc_mechanism_from_string(std::string_view s) {
    if (s == "binder") return IpcMechanism::Binder;
    if (s == "ashmem") return IpcMechanism::Ashmem;
    throw SchemaError("unknown ipc mechanism: " + std::string(s));
}

nlohmann::json ipc_to_json(const IpcInteraction& i) {
    return {{"event_id", i.event_id},   {"mechanism", to_string(i.mechanism)},
            {"caller_pid", i.caller_pid}, {"request", i.request},
            {"resolved", i.resolved},   {"callee", i.callee}};
}

IpcInteraction ipc_from_json(const nlohmann::json& j) {
    IpcInteraction i;
    i.event_id = j.at("event_id").get<std::int64_t>();
    i.mechanism = ipc_mechanism_from_string(j.at("mechanism").get<std::string>());
    i.caller_pid = j.at("caller_pid").get<int>();
    i.request = j.at("request").get<std::string>();
    i.resolved = j.at("resolved").get<bool>();
    i.callee = j.at("callee").get<std::string>();
    return i;
}

ServiceMap ServiceMap::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw SchemaError("service map must be a JSON object");
    ServiceMap m;
    for (const auto& [key, value] : j.items()) {
        if (!value.is_string()) throw SchemaError("service map values must be strings");
        m.entries[key] = value.get<std::string>();
    }
    return m;
}

ServiceMap ServiceMap::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open service map: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("service map " + path + ": " + e.what());
    }
    return from_json(j);
}

nlohmann::json ServiceMap::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, value] : entries) j[key] = value;
    return j;
}

namespace {

std::string string_literal_content(const std::string& raw) {
    auto open = raw.find('"');
    if (open == std::string::npos) return {};
    auto close = raw.find('"', open + 1);
    if (close == std::string::npos) return {};
    return raw.substr(open + 1, close - open - 1);
}

// Root producer of the fd consumed at `arg_index`: the fd-alias edge (when a
// dup chain is involved) points at the original producer directly, otherwise
// the fd-flow edge source is the producer itself.
std::optional<std::int64_t> fd_root_producer(const Scdg& g, std::int64_t event_id,
                                             int arg_index) {
    std::optional<std::int64_t> flow;
    for (const auto& e : g.edges) {
        if (e.to_event != event_id || e.to_arg_index != arg_index) continue;
        if (e.kind == DepKind::FdAlias) return e.from_event;
        if (e.kind == DepKind::FdFlow) flow = e.from_event;
    }
    return flow;
}

std::string handle_token(const SyscallEvent& e) {
    for (const auto& a : e.args) {
        auto pos = a.raw.find("handle=");
        if (pos == std::string::npos) continue;
        pos += 7;
        if (pos < a.raw.size() && a.raw[pos] == '"') {
            auto end = a.raw.find('"', pos + 1);
            if (end != std::string::npos) return a.raw.substr(pos + 1, end - pos - 1);
        }
        auto end = pos;
        while (end < a.raw.size() && (std::isalnum(static_cast<unsigned char>(a.raw[end]))
                                      || a.raw[end] == '_' || a.raw[end] == '.'))
            ++end;
        if (end > pos) return a.raw.substr(pos, end - pos);
    }
    return "?";
}

bool args_contain(const SyscallEvent& e, const std::string& token) {
    for (const auto& a : e.args)
        if (a.raw.find(token) != std::string::npos) return true;
    return false;
}

} // namespace

IpcResult extract_ipc(const std::vector<Scdg>& scdgs, const TraceSession& session,
                      const ServiceMap& service_map, const IpcConfig& config) {
    IpcResult result;

    std::map<std::int64_t, const Scdg*> owner;
    for (const auto& g : scdgs)
        for (const auto& node : g.nodes) owner[node.id] = &g;

    for (const SyscallEvent& e : session.events) {
        const bool is_ioctl = e.name == "ioctl";
        const bool is_mmap = e.name == "mmap" || e.name == "mmap2";
        if (!is_ioctl && !is_mmap) continue;

        auto it = owner.find(e.event_id);
        if (it == owner.end()) continue;
        const Scdg& g = *it->second;

        const int fd_arg = is_ioctl ? 0 : 4;
        auto root = fd_root_producer(g, e.event_id, fd_arg);
        if (!root) {
            if (is_ioctl)
                result.diagnostics.push_back(
                    "ioctl event " + std::to_string(e.event_id) + " (pid "
                    + std::to_string(e.pid) + "): fd has no traceable producer");
            continue;
        }

        // Provenance must end at an open of an IPC device path.
        const SyscallEvent& producer = session.events[static_cast<std::size_t>(*root)];
        if (producer.name != "open" && producer.name != "openat") continue;
        std::string device;
        for (const auto& a : producer.args)
            if (a.kind == ArgKind::StringLiteral) { device = string_literal_content(a.raw); break; }

        IpcInteraction interaction;
        interaction.event_id = e.event_id;
        interaction.caller_pid = e.pid;
        if (config.binder_devices.contains(device) && is_ioctl)
            interaction.mechanism = IpcMechanism::Binder;
        else if (config.ashmem_devices.contains(device))
            interaction.mechanism = IpcMechanism::Ashmem;
        else
            continue;

        if (is_ioctl && e.args.size() > 1) interaction.request = e.args[1].raw;
        else if (is_mmap) interaction.request = "mmap";

        // Handle-qualified entries take precedence over bare device paths.
        for (const auto& [key, name] : service_map.entries) {
            auto sep = key.find("#handle:");
            if (sep == std::string::npos) continue;
            if (key.substr(0, sep) != device) continue;
            if (args_contain(e, key.substr(sep + 8))) {
                interaction.resolved = true;
                interaction.callee = name;
                break;
            }
        }
        if (!interaction.resolved) {
            if (auto entry = service_map.entries.find(device);
                entry != service_map.entries.end()) {
                interaction.resolved = true;
                interaction.callee = entry->second;
            } else {
                interaction.callee = is_ioctl ? handle_token(e) : device;
            }
        }
        result.interactions.push_back(std::move(interaction));
    }
    return result;
}

} // namespace scdgmap
