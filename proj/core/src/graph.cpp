// SPDX-License-Identifier: Apache-2.0
#include "scdgmap/graph.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "scdgmap/error.hpp"

namespace scdgmap {

const char* to_string(DepKind kind) {
    switch (kind) {
        case DepKind::FdFlow: return "fd-flow";
        case DepKind::FdAlias: return "fd-alias";
        case DepKind::MmapAddress: return "mmap-address";
        case DepKind::ValueMatch: return "value-match";
    }
    return "fd-flow";
}

DepKind dep_kind_from_string(std::string_view s) {
    if (s == "fd-flow") return DepKind::FdFlow;
    if (s == "fd-alias") return DepKind::FdAlias;
    if (s == "mmap-address") return DepKind::MmapAddress;
    if (s == "value-match") return DepKind::ValueMatch;
    throw SchemaError("unknown dependence kind: " + std::string(s));
}

const char* to_string(PathClass c) {
    switch (c) {
        case PathClass::AppData: return "app-data";
        case PathClass::ExternalStorage: return "external-storage";
        case PathClass::DevBinder: return "dev-binder";
        case PathClass::DevAshmem: return "dev-ashmem";
        case PathClass::System: return "system";
        case PathClass::Other: return "other";
    }
    return "other";
}

PathClass path_class_from_string(std::string_view s) {
    if (s == "app-data") return PathClass::AppData;
    if (s == "external-storage") return PathClass::ExternalStorage;
    if (s == "dev-binder") return PathClass::DevBinder;
    if (s == "dev-ashmem") return PathClass::DevAshmem;
    if (s == "system") return PathClass::System;
    if (s == "other") return PathClass::Other;
    throw SchemaError("unknown path class: " + std::string(s));
}

namespace {

std::string string_literal_content(const std::string& raw) {
    auto open = raw.find('"');
    if (open == std::string::npos) return {};
    auto close = raw.find('"', open + 1);
    if (close == std::string::npos) return {};
    return raw.substr(open + 1, close - open - 1);
}

} // namespace

PathClass classify_event_path(const SyscallEvent& e) {
    for (const auto& a : e.args) {
        if (a.kind != ArgKind::StringLiteral) continue;
        std::string path = string_literal_content(a.raw);
        if (path.empty() || path.front() != '/') return PathClass::Other;
        if (path.starts_with("/dev/binder") || path.starts_with("/dev/hwbinder")
            || path.starts_with("/dev/vndbinder"))
            return PathClass::DevBinder;
        if (path.starts_with("/dev/ashmem")) return PathClass::DevAshmem;
        if (path.starts_with("/data/")) return PathClass::AppData;
        if (path.starts_with("/sdcard") || path.starts_with("/storage"))
            return PathClass::ExternalStorage;
        if (path.starts_with("/system") || path.starts_with("/proc")
            || path.starts_with("/sys") || path.starts_with("/dev")
            || path.starts_with("/vendor") || path.starts_with("/etc")
            || path.starts_with("/apex"))
            return PathClass::System;
        return PathClass::Other;
    }
    return PathClass::Other;
}

namespace {

bool parse_fd_arg(const SyscallEvent& e, int idx, long long& fd) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= e.args.size()) return false;
    const ArgValue& a = e.args[static_cast<std::size_t>(idx)];
    if (a.kind != ArgKind::Integer) return false;
    fd = std::stoll(a.raw);
    return fd >= 0;
}

// Values an event contributes to the value-match rule: the decimal form of a
// successful integer return, plus digit runs and quoted strings inside
// designated out-params. Pointer returns belong to the mmap-address rule.
std::vector<std::string> value_match_candidates(const SyscallEvent& e,
                                                const DependenceRuleSet& rules) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    auto add = [&](std::string v) {
        if (v.size() >= rules.value_match_min_length && seen.insert(v).second)
            out.push_back(std::move(v));
    };

    if (e.ret.kind == ReturnValue::Kind::Integer) add(std::to_string(e.ret.value));

    if (rules.producer_outparam_syscalls.contains(e.name)) {
        for (const auto& [idx, dump] : e.out_params) {
            for (std::size_t i = 0; i < dump.size();) {
                if (std::isdigit(static_cast<unsigned char>(dump[i]))) {
                    std::size_t j = i;
                    while (j < dump.size() && std::isdigit(static_cast<unsigned char>(dump[j])))
                        ++j;
                    add(dump.substr(i, j - i));
                    i = j;
                } else if (dump[i] == '"') {
                    std::size_t j = dump.find('"', i + 1);
                    if (j == std::string::npos) break;
                    add(dump.substr(i + 1, j - i - 1));
                    i = j + 1;
                } else {
                    ++i;
                }
            }
        }
    }
    return out;
}

std::vector<long long> pipe_fds(const SyscallEvent& e) {
    std::vector<long long> fds;
    if (e.args.empty()) return fds;
    const std::string& raw = e.args[0].raw;
    if (raw.empty() || raw.front() != '[') return fds;
    long long cur = 0;
    bool in_num = false;
    for (char c : raw) {
        if (std::isdigit(static_cast<unsigned char>(c))) {
            cur = cur * 10 + (c - '0');
            in_num = true;
        } else if (in_num) {
            fds.push_back(cur);
            cur = 0;
            in_num = false;
        }
    }
    return fds;
}

struct FdBinding {
    std::int64_t direct = 0;  // most recent producer (dup itself for aliases)
    std::int64_t root = 0;    // original producer through the dup chain
};

} // namespace

std::vector<DependenceEdge> derive_dependences(const TraceSession& session,
                                               const DependenceRuleSet& rules) {
    std::set<DependenceEdge> edges;

    std::map<std::pair<int, long long>, FdBinding> fd_table;           // (pid, fd)
    std::map<std::pair<int, std::string>, std::vector<std::int64_t>> mmap_addrs;  // (pid, addr)
    std::map<int, std::vector<std::pair<std::string, std::int64_t>>> values;      // pid -> (v, producer)

    for (const SyscallEvent& e : session.events) {
        // (a) fd-flow / (b) fd-alias consumption.
        FdBinding consumed{};
        bool has_consumed = false;
        if (auto it = rules.fd_consumers.find(e.name); it != rules.fd_consumers.end()) {
            long long fd = -1;
            if (parse_fd_arg(e, it->second, fd)) {
                if (auto bind = fd_table.find({e.pid, fd}); bind != fd_table.end()) {
                    consumed = bind->second;
                    has_consumed = true;
                    edges.insert({consumed.direct, e.event_id, it->second, DepKind::FdFlow,
                                  std::to_string(fd)});
                    if (consumed.root != consumed.direct)
                        edges.insert({consumed.root, e.event_id, it->second, DepKind::FdAlias,
                                      std::to_string(fd)});
                }
                if (e.name == "close") fd_table.erase({e.pid, fd});
            }
        }

        // (c) mmap-address consumption.
        if (e.name == "munmap" || e.name == "msync") {
            if (!e.args.empty() && e.args[0].kind == ArgKind::PointerToken) {
                if (auto it = mmap_addrs.find({e.pid, e.args[0].raw}); it != mmap_addrs.end())
                    for (std::int64_t producer : it->second)
                        edges.insert({producer, e.event_id, 0, DepKind::MmapAddress,
                                      e.args[0].raw});
            }
        }

        // (d) value-match against earlier producers in the same pid stream.
        if (rules.value_match_enabled) {
            if (auto it = values.find(e.pid); it != values.end()) {
                for (const auto& [v, producer] : it->second)
                    for (std::size_t j = 0; j < e.args.size(); ++j)
                        if (e.args[j].raw.find(v) != std::string::npos)
                            edges.insert({producer, e.event_id, static_cast<int>(j),
                                          DepKind::ValueMatch, v});
            }
        }

        // Productions, after all consumptions of this event.
        if (rules.fd_producers.contains(e.name)
            && e.ret.kind == ReturnValue::Kind::Integer && e.ret.value >= 0) {
            if (e.name == "pipe" || e.name == "pipe2") {
                for (long long fd : pipe_fds(e))
                    fd_table[{e.pid, fd}] = FdBinding{e.event_id, e.event_id};
            } else {
                FdBinding b{e.event_id, e.event_id};
                if (rules.alias_rules.contains(e.name) && has_consumed) b.root = consumed.root;
                fd_table[{e.pid, e.ret.value}] = b;
            }
        }
        if ((e.name == "mmap" || e.name == "mmap2")
            && e.ret.kind == ReturnValue::Kind::Pointer && e.ret.token != "?")
            mmap_addrs[{e.pid, e.ret.token}].push_back(e.event_id);

        if (rules.value_match_enabled) {
            for (auto& v : value_match_candidates(e, rules))
                values[e.pid].emplace_back(std::move(v), e.event_id);
        }
    }

    return {edges.begin(), edges.end()};
}

namespace {

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) {
        std::iota(parent_.begin(), parent_.end(), 0);
    }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

private:
    std::vector<std::size_t> parent_;
};

} // namespace

std::vector<Scdg> build_scdgs(const TraceSession& session, const DependenceRuleSet& rules,
                              const NormalizationTable& norm) {
    const auto edges = derive_dependences(session, rules);
    const std::size_t n = session.events.size();

    UnionFind uf(n);
    for (const auto& e : edges)
        uf.unite(static_cast<std::size_t>(e.from_event), static_cast<std::size_t>(e.to_event));

    std::map<std::size_t, std::vector<std::size_t>> components;  // root -> member indices
    for (std::size_t i = 0; i < n; ++i) components[uf.find(i)].push_back(i);

    std::vector<Scdg> graphs;
    graphs.reserve(components.size());
    for (auto& [root, members] : components) {
        Scdg g;
        g.pid = session.events[members.front()].pid;
        g.span_us = {session.events[members.front()].timestamp_us,
                     session.events[members.front()].timestamp_us};
        for (std::size_t idx : members) {
            const SyscallEvent& ev = session.events[idx];
            g.span_us.first = std::min(g.span_us.first, ev.timestamp_us);
            g.span_us.second = std::max(g.span_us.second, ev.timestamp_us);
            g.nodes.push_back({ev.event_id, norm.normalize(ev.name), ev.timestamp_us,
                               NodeAttrs{classify_event_path(ev), !ev.ret.is_error()}});
        }
        graphs.push_back(std::move(g));
    }

    std::sort(graphs.begin(), graphs.end(), [](const Scdg& a, const Scdg& b) {
        if (a.span_us.first != b.span_us.first) return a.span_us.first < b.span_us.first;
        return a.nodes.front().id < b.nodes.front().id;
    });

    std::map<std::int64_t, int> node_to_graph;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        graphs[i].graph_id = static_cast<int>(i);
        for (const auto& node : graphs[i].nodes) node_to_graph[node.id] = graphs[i].graph_id;
    }
    for (const auto& e : edges)
        graphs[static_cast<std::size_t>(node_to_graph[e.from_event])].edges.push_back(e);
    for (auto& g : graphs) std::sort(g.edges.begin(), g.edges.end());

    return graphs;
}

std::string export_dot(const Scdg& g) {
    std::ostringstream out;
    out << "digraph scdg_" << g.graph_id << " {\n";
    for (const auto& node : g.nodes)
        out << "  n" << node.id << " [label=\"" << node.label << "@" << node.id << "\"];\n";
    for (const auto& e : g.edges)
        out << "  n" << e.from_event << " -> n" << e.to_event << " [label=\""
            << to_string(e.kind) << "\"];\n";
    out << "}\n";
    return out.str();
}

nlohmann::json scdg_to_json(const Scdg& g) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& node : g.nodes)
        nodes.push_back({{"id", node.id},
                         {"label", node.label},
                         {"t_us", node.t_us},
                         {"attrs",
                          {{"path_class", to_string(node.attrs.path_class)},
                           {"success", node.attrs.success}}}});
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : g.edges)
        edges.push_back({{"from", e.from_event},
                         {"to", e.to_event},
                         {"arg", e.to_arg_index},
                         {"kind", to_string(e.kind)},
                         {"value", e.value}});
    return {{"graph_id", g.graph_id},
            {"pid", g.pid},
            {"span_us", nlohmann::json::array({g.span_us.first, g.span_us.second})},
            {"nodes", nodes},
            {"edges", edges}};
}

Scdg scdg_from_json(const nlohmann::json& j) {
    Scdg g;
    try {
        g.graph_id = j.at("graph_id").get<int>();
        g.pid = j.at("pid").get<int>();
        g.span_us = {j.at("span_us").at(0).get<std::int64_t>(),
                     j.at("span_us").at(1).get<std::int64_t>()};
        for (const auto& node : j.at("nodes")) {
            ScdgNode n;
            n.id = node.at("id").get<std::int64_t>();
            n.label = node.at("label").get<std::string>();
            n.t_us = node.at("t_us").get<std::int64_t>();
            n.attrs.path_class =
                path_class_from_string(node.at("attrs").at("path_class").get<std::string>());
            n.attrs.success = node.at("attrs").at("success").get<bool>();
            g.nodes.push_back(std::move(n));
        }
        for (const auto& e : j.at("edges")) {
            DependenceEdge d;
            d.from_event = e.at("from").get<std::int64_t>();
            d.to_event = e.at("to").get<std::int64_t>();
            d.to_arg_index = e.at("arg").get<int>();
            d.kind = dep_kind_from_string(e.at("kind").get<std::string>());
            d.value = e.at("value").get<std::string>();
            g.edges.push_back(std::move(d));
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("bad graph json: ") + e.what());
    }
    return g;
}

} // namespace scdgmap
