// SPDX-License-Identifier: Apache-2.0
#include "scdgmap/rules.hpp"

#include <nlohmann/json.hpp>

#include "scdgmap/error.hpp"

namespace scdgmap {

DependenceRuleSet DependenceRuleSet::defaults() {
    DependenceRuleSet r;
    r.fd_producers = {"open", "openat", "socket", "dup", "dup2", "dup3",
                      "accept", "accept4", "pipe", "pipe2", "memfd_create"};
    r.fd_consumers = {
        {"read", 0},   {"write", 0},    {"close", 0},   {"ioctl", 0},
        {"fstat", 0},  {"fstat64", 0},  {"lseek", 0},   {"fsync", 0},
        {"pread64", 0},{"pwrite64", 0}, {"sendto", 0},  {"recvfrom", 0},
        {"connect", 0},{"bind", 0},     {"accept", 0},  {"accept4", 0},
        {"dup", 0},    {"dup2", 0},     {"dup3", 0},    {"fchmod", 0},
        {"ftruncate", 0},
        // fd is the fifth argument of mmap(addr, len, prot, flags, fd, off)
        {"mmap", 4},   {"mmap2", 4},
    };
    r.alias_rules = {{"dup", 0}, {"dup2", 0}, {"dup3", 0}};
    r.producer_outparam_syscalls = {"gettimeofday", "clock_gettime", "fstat", "stat"};
    return r;
}

nlohmann::json DependenceRuleSet::to_json() const {
    nlohmann::json consumers = nlohmann::json::object();
    for (const auto& [name, idx] : fd_consumers) consumers[name] = idx;
    nlohmann::json aliases = nlohmann::json::object();
    for (const auto& [name, idx] : alias_rules) aliases[name] = idx;
    return {{"fd_producers", fd_producers},
            {"fd_consumers", consumers},
            {"alias_rules", aliases},
            {"value_match_enabled", value_match_enabled},
            {"value_match_min_length", value_match_min_length},
            {"producer_outparam_syscalls", producer_outparam_syscalls}};
}

DependenceRuleSet DependenceRuleSet::from_json(const nlohmann::json& j) {
    DependenceRuleSet r;
    try {
        r.fd_producers = j.at("fd_producers").get<std::set<std::string>>();
        for (const auto& [name, idx] : j.at("fd_consumers").items())
            r.fd_consumers[name] = idx.get<int>();
        for (const auto& [name, idx] : j.at("alias_rules").items())
            r.alias_rules[name] = idx.get<int>();
        r.value_match_enabled = j.at("value_match_enabled").get<bool>();
        r.value_match_min_length = j.at("value_match_min_length").get<std::size_t>();
        r.producer_outparam_syscalls =
            j.at("producer_outparam_syscalls").get<std::set<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("bad rule set: ") + e.what());
    }
    return r;
}

NormalizationTable NormalizationTable::defaults() {
    NormalizationTable t;
    t.entries = {
        {"openat", "open"},   {"creat", "open"},    {"dup2", "dup"},
        {"dup3", "dup"},      {"fstat64", "fstat"}, {"stat64", "stat"},
        {"lstat64", "lstat"}, {"mmap2", "mmap"},    {"pipe2", "pipe"},
        {"accept4", "accept"},
    };
    return t;
}

const std::string& NormalizationTable::normalize(const std::string& name) const {
    auto it = entries.find(name);
    return it == entries.end() ? name : it->second;
}

nlohmann::json NormalizationTable::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [from, to] : entries) j[from] = to;
    return j;
}

NormalizationTable NormalizationTable::from_json(const nlohmann::json& j) {
    NormalizationTable t;
    if (!j.is_object()) throw SchemaError("normalization table must be a JSON object");
    for (const auto& [from, to] : j.items()) {
        if (!to.is_string()) throw SchemaError("normalization entry must map to a string");
        t.entries[from] = to.get<std::string>();
    }
    return t;
}

} // namespace scdgmap
