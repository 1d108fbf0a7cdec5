// SPDX-License-Identifier: Apache-2.0
#include "scdgmap/matching.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "scdgmap/error.hpp"

namespace scdgmap {

namespace {

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 14695981039346656037ULL) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

// Index-based view over an Scdg with multi-edge adjacency by kind.
struct GraphView {
    std::size_t n = 0;
    std::vector<std::string> labels;        // matching key per node (label [+ attrs])
    std::vector<std::int64_t> ids;
    std::map<std::pair<std::size_t, std::size_t>, std::vector<DepKind>> adj;
    std::vector<std::vector<std::pair<std::size_t, DepKind>>> out_edges;
    std::vector<std::vector<std::pair<std::size_t, DepKind>>> in_edges;
    std::vector<std::size_t> indeg, outdeg;
    std::size_t edge_count = 0;

    GraphView(const Scdg& g, IsoMode mode) {
        n = g.nodes.size();
        labels.reserve(n);
        ids.reserve(n);
        std::map<std::int64_t, std::size_t> index;
        for (const auto& node : g.nodes) {
            index[node.id] = labels.size();
            std::string key = node.label;
            if (mode == IsoMode::Attributes)
                key += std::string("|") + to_string(node.attrs.path_class)
                       + (node.attrs.success ? "|ok" : "|err");
            labels.push_back(std::move(key));
            ids.push_back(node.id);
        }
        out_edges.resize(n);
        in_edges.resize(n);
        indeg.assign(n, 0);
        outdeg.assign(n, 0);
        for (const auto& e : g.edges) {
            std::size_t u = index.at(e.from_event);
            std::size_t v = index.at(e.to_event);
            adj[{u, v}].push_back(e.kind);
            out_edges[u].emplace_back(v, e.kind);
            in_edges[v].emplace_back(u, e.kind);
            ++outdeg[u];
            ++indeg[v];
            ++edge_count;
        }
        for (auto& [key, kinds] : adj) std::sort(kinds.begin(), kinds.end());
    }

    const std::vector<DepKind>* kinds(std::size_t u, std::size_t v) const {
        auto it = adj.find({u, v});
        return it == adj.end() ? nullptr : &it->second;
    }
};

bool multiset_contains(const std::vector<DepKind>* super, const std::vector<DepKind>& sub) {
    if (!super) return sub.empty();
    return std::includes(super->begin(), super->end(), sub.begin(), sub.end());
}

bool multiset_equal(const std::vector<DepKind>* a, const std::vector<DepKind>* b) {
    if (!a) return !b || b->empty();
    if (!b) return a->empty();
    return *a == *b;
}

// Pattern nodes ordered so each node (after the first of a component) touches
// an already-placed one; within that, higher degree first.
std::vector<std::size_t> search_order(const GraphView& g) {
    std::vector<std::size_t> order;
    std::vector<bool> placed(g.n, false);
    auto degree = [&](std::size_t v) { return g.indeg[v] + g.outdeg[v]; };
    while (order.size() < g.n) {
        std::size_t best = g.n;
        bool best_connected = false;
        for (std::size_t v = 0; v < g.n; ++v) {
            if (placed[v]) continue;
            bool connected = false;
            for (const auto& [u, kind] : g.out_edges[v])
                if (placed[u]) { connected = true; break; }
            if (!connected)
                for (const auto& [u, kind] : g.in_edges[v])
                    if (placed[u]) { connected = true; break; }
            if (best == g.n || (connected && !best_connected)
                || (connected == best_connected && degree(v) > degree(best)))
                { best = v; best_connected = connected; }
        }
        placed[best] = true;
        order.push_back(best);
    }
    return order;
}

struct Matcher {
    const GraphView& a;
    const GraphView& b;
    bool exact;  // exact isomorphism vs monomorphism

    std::vector<std::size_t> order;
    std::vector<std::size_t> mapping;  // a index -> b index
    std::vector<bool> used;

    Matcher(const GraphView& pa, const GraphView& pb, bool is_exact)
        : a(pa), b(pb), exact(is_exact), order(search_order(pa)),
          mapping(pa.n, pb.n), used(pb.n, false) {}

    bool compatible(std::size_t av, std::size_t bv) const {
        if (a.labels[av] != b.labels[bv]) return false;
        if (exact) {
            if (a.indeg[av] != b.indeg[bv] || a.outdeg[av] != b.outdeg[bv]) return false;
        } else {
            if (a.indeg[av] > b.indeg[bv] || a.outdeg[av] > b.outdeg[bv]) return false;
        }
        return true;
    }

    bool consistent(std::size_t av, std::size_t bv) const {
        for (std::size_t prev = 0; prev < a.n; ++prev) {
            if (mapping[prev] == b.n || prev == av) continue;
            const auto* fa = a.kinds(av, prev);
            const auto* fb = b.kinds(bv, mapping[prev]);
            const auto* ra = a.kinds(prev, av);
            const auto* rb = b.kinds(mapping[prev], bv);
            if (exact) {
                if (!multiset_equal(fa, fb) || !multiset_equal(ra, rb)) return false;
            } else {
                if (fa && !multiset_contains(fb, *fa)) return false;
                if (ra && !multiset_contains(rb, *ra)) return false;
            }
        }
        // Self-loops cannot occur (edges always point forward in time).
        return true;
    }

    bool search(std::size_t depth) {
        if (depth == order.size()) return true;
        std::size_t av = order[depth];
        for (std::size_t bv = 0; bv < b.n; ++bv) {
            if (used[bv] || !compatible(av, bv) || !consistent(av, bv)) continue;
            mapping[av] = bv;
            used[bv] = true;
            if (search(depth + 1)) return true;
            used[bv] = false;
            mapping[av] = b.n;
        }
        return false;
    }
};

IsoResult run_matcher(const Scdg& a, const Scdg& b, IsoMode mode, bool exact,
                      std::size_t max_nodes) {
    if (a.nodes.size() > max_nodes) throw SizeLimit(a.nodes.size(), max_nodes);
    if (b.nodes.size() > max_nodes) throw SizeLimit(b.nodes.size(), max_nodes);

    GraphView va(a, mode), vb(b, mode);
    IsoResult result;

    if (exact) {
        if (va.n != vb.n || va.edge_count != vb.edge_count) return result;
        auto sig = [](const GraphView& g) {
            std::vector<std::string> s;
            for (std::size_t v = 0; v < g.n; ++v)
                s.push_back(g.labels[v] + "/" + std::to_string(g.indeg[v]) + "/"
                            + std::to_string(g.outdeg[v]));
            std::sort(s.begin(), s.end());
            return s;
        };
        if (sig(va) != sig(vb)) return result;
    } else {
        if (va.n > vb.n || va.edge_count > vb.edge_count) return result;
    }
    if (va.n == 0) {
        result.found = true;
        return result;
    }

    Matcher m(va, vb, exact);
    if (!m.search(0)) return result;
    result.found = true;
    for (std::size_t av = 0; av < va.n; ++av)
        result.witness.emplace_back(va.ids[av], vb.ids[m.mapping[av]]);
    std::sort(result.witness.begin(), result.witness.end());
    return result;
}

} // namespace

std::string canonical_hash(const Scdg& g, int rounds) {
    GraphView view(g, IsoMode::Exact);
    std::vector<std::string> labels = view.labels;

    for (int r = 0; r < std::max(rounds, 1); ++r) {
        std::vector<std::string> next(view.n);
        for (std::size_t v = 0; v < view.n; ++v) {
            std::vector<std::string> in, out;
            for (const auto& [u, kind] : view.in_edges[v])
                in.push_back(std::string(to_string(kind)) + ":" + labels[u]);
            for (const auto& [u, kind] : view.out_edges[v])
                out.push_back(std::string(to_string(kind)) + ":" + labels[u]);
            std::sort(in.begin(), in.end());
            std::sort(out.begin(), out.end());
            std::string acc = labels[v];
            acc += "|I";
            for (const auto& s : in) { acc += s; acc += ";"; }
            acc += "|O";
            for (const auto& s : out) { acc += s; acc += ";"; }
            next[v] = hex64(fnv1a64(acc));
        }
        labels = std::move(next);
    }

    std::sort(labels.begin(), labels.end());
    std::uint64_t h = 14695981039346656037ULL;
    for (const auto& l : labels) {
        h = fnv1a64(l, h);
        h = fnv1a64(",", h);
    }
    return hex64(h);
}

IsoResult is_isomorphic(const Scdg& a, const Scdg& b, IsoMode mode, std::size_t max_nodes) {
    return run_matcher(a, b, mode, /*exact=*/true, max_nodes);
}

IsoResult find_monomorphism(const Scdg& pattern, const Scdg& target, IsoMode mode,
                            std::size_t max_nodes) {
    return run_matcher(pattern, target, mode, /*exact=*/false, max_nodes);
}

nlohmann::json ApiSignature::to_json() const {
    return {{"api_name", api_name},
            {"canon_hash", canon_hash},
            {"min_nodes", min_nodes},
            {"provenance", provenance},
            {"implied_permissions", implied_permissions},
            {"graph", scdg_to_json(graph)}};
}

ApiSignature ApiSignature::from_json(const nlohmann::json& j) {
    ApiSignature s;
    try {
        s.api_name = j.at("api_name").get<std::string>();
        s.canon_hash = j.at("canon_hash").get<std::string>();
        s.min_nodes = j.at("min_nodes").get<int>();
        s.provenance = j.at("provenance").get<std::string>();
        s.implied_permissions = j.at("implied_permissions").get<std::set<std::string>>();
        s.graph = scdg_from_json(j.at("graph"));
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("bad signature: ") + e.what());
    }
    if (s.min_nodes < 2 || static_cast<std::size_t>(s.min_nodes) != s.graph.nodes.size())
        throw SchemaError("signature " + s.api_name + ": min_nodes must equal node count >= 2");
    if (canonical_hash(s.graph) != s.canon_hash)
        throw SchemaError("signature " + s.api_name + ": canon_hash does not match graph");
    return s;
}

std::vector<ApiSignature> load_signature_store(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open signature store: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("signature store " + path + ": " + e.what());
    }
    std::vector<ApiSignature> sigs;
    for (const auto& s : j.at("signatures")) sigs.push_back(ApiSignature::from_json(s));
    return sigs;
}

void save_signature_store(const std::string& path, const std::vector<ApiSignature>& sigs) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& s : sigs) list.push_back(s.to_json());
    nlohmann::json j = {{"schema_version", 1}, {"signatures", list}};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write signature store: " + path);
    out << j.dump(2) << "\n";
}

std::vector<SignatureMatch> match_signatures(const std::vector<Scdg>& scdgs,
                                             const std::vector<ApiSignature>& sigs,
                                             MatchMode mode, const MatchConfig& config) {
    std::vector<SignatureMatch> matches;
    for (const Scdg& g : scdgs) {
        if (g.nodes.size() < static_cast<std::size_t>(config.min_match_size)) continue;
        std::string hash;
        for (const ApiSignature& sig : sigs) {
            IsoResult r;
            if (mode == MatchMode::Graph) {
                if (hash.empty()) hash = canonical_hash(g, config.hash_rounds);
                if (canonical_hash(sig.graph, config.hash_rounds) != hash) continue;
                r = is_isomorphic(sig.graph, g, config.iso_mode, config.max_nodes);
            } else {
                r = find_monomorphism(sig.graph, g, config.iso_mode, config.max_nodes);
            }
            if (r.found) matches.push_back({g.graph_id, sig.api_name, std::move(r.witness)});
        }
    }
    std::sort(matches.begin(), matches.end(),
              [](const SignatureMatch& a, const SignatureMatch& b) {
                  if (a.graph_id != b.graph_id) return a.graph_id < b.graph_id;
                  return a.api_name < b.api_name;
              });
    return matches;
}

ApiSignature build_signature(const MappingReport& report, const std::vector<Scdg>& scdgs,
                             const std::string& api_name, const ApiPermissionMap& perm_map,
                             const MatchConfig& config) {
    std::map<int, const Scdg*> by_id;
    for (const Scdg& g : scdgs) by_id[g.graph_id] = &g;

    const Scdg* best = nullptr;
    for (const Assignment& a : report.assignments) {
        if (a.api_name != api_name) continue;
        auto it = by_id.find(a.graph_id);
        if (it == by_id.end() || it->second->nodes.size() < 2) continue;
        if (!best || it->second->nodes.size() > best->nodes.size()) best = it->second;
    }
    if (!best) throw NoEvidence(api_name);

    ApiSignature sig;
    sig.api_name = api_name;
    sig.graph = *best;
    sig.canon_hash = canonical_hash(*best, config.hash_rounds);
    sig.min_nodes = static_cast<int>(best->nodes.size());
    sig.provenance = "graph:" + std::to_string(best->graph_id);
    if (const auto* perms = perm_map.find(api_name)) sig.implied_permissions = *perms;
    return sig;
}

const char* to_string(VerdictKind k) {
    switch (k) {
        case VerdictKind::Overprivileged: return "Overprivileged";
        case VerdictKind::UndeclaredBehavior: return "UndeclaredBehavior";
        case VerdictKind::ApiEvasion: return "ApiEvasion";
    }
    return "Overprivileged";
}

nlohmann::json Verdict::to_json() const {
    return {{"kind", to_string(kind)},
            {"subject", subject},
            {"evidence", {{"graphs", evidence_graphs}, {"apis", evidence_apis}}},
            {"explanation", explanation}};
}

std::vector<Verdict> detect_abuse(const PermissionManifest& manifest,
                                  const MappingReport& report,
                                  const std::vector<Scdg>& scdgs,
                                  const std::vector<ApiSignature>& sigs,
                                  const ApiPermissionMap& perm_map,
                                  const MatchConfig& config) {
    struct Evidence {
        std::set<int> graphs;
        std::set<std::string> apis;
    };
    std::map<std::string, Evidence> implied;  // permission -> supporting evidence

    for (const Assignment& a : report.assignments)
        if (const auto* perms = perm_map.find(a.api_name))
            for (const auto& p : *perms) implied[p].apis.insert(a.api_name);

    const auto matches = match_signatures(scdgs, sigs, MatchMode::Subgraph, config);

    std::map<std::string, const ApiSignature*> sig_by_api;
    for (const ApiSignature& s : sigs) sig_by_api[s.api_name] = &s;
    for (const SignatureMatch& m : matches)
        for (const auto& p : sig_by_api.at(m.api_name)->implied_permissions)
            implied[p].graphs.insert(m.graph_id);

    std::vector<Verdict> verdicts;

    // (1) Declared permission with no evidence at all.
    std::set<std::string> declared(manifest.permissions.begin(), manifest.permissions.end());
    for (const std::string& perm : manifest.permissions) {
        if (implied.contains(perm)) continue;
        Verdict v;
        v.kind = VerdictKind::Overprivileged;
        v.subject = perm;
        v.explanation = "declared by " + manifest.packname
                        + " but no mapped API event or matched signature implies it";
        verdicts.push_back(std::move(v));
    }

    // (2) Evidenced permission the manifest never declares.
    for (const auto& [perm, evidence] : implied) {
        if (declared.contains(perm)) continue;
        Verdict v;
        v.kind = VerdictKind::UndeclaredBehavior;
        v.subject = perm;
        v.evidence_graphs.assign(evidence.graphs.begin(), evidence.graphs.end());
        v.evidence_apis.assign(evidence.apis.begin(), evidence.apis.end());
        v.explanation = "observed behavior implies " + perm + " which is not declared";
        verdicts.push_back(std::move(v));
    }

    // (3) Signature behavior present with no invocation of its API in the pid.
    std::map<int, std::set<std::string>> pid_apis;
    for (const Assignment& a : report.assignments) pid_apis[a.pid].insert(a.api_name);
    for (const ApiEvent& a : report.unevidenced_apis) pid_apis[a.pid].insert(a.api_name);

    std::map<int, std::string> assigned_api;
    for (const Assignment& a : report.assignments) assigned_api[a.graph_id] = a.api_name;
    std::map<int, const Scdg*> by_id;
    for (const Scdg& g : scdgs) by_id[g.graph_id] = &g;

    std::map<std::string, std::set<int>> evasions;
    for (const SignatureMatch& m : matches) {
        auto assigned = assigned_api.find(m.graph_id);
        if (assigned != assigned_api.end() && assigned->second == m.api_name) continue;
        const Scdg* g = by_id.at(m.graph_id);
        auto apis = pid_apis.find(g->pid);
        if (apis != pid_apis.end() && apis->second.contains(m.api_name)) continue;
        evasions[m.api_name].insert(m.graph_id);
    }
    for (const auto& [api, graphs] : evasions) {
        Verdict v;
        v.kind = VerdictKind::ApiEvasion;
        v.subject = api;
        v.evidence_graphs.assign(graphs.begin(), graphs.end());
        v.explanation = "SCDG matches the " + api
                        + " signature but no such API invocation was logged for this pid";
        verdicts.push_back(std::move(v));
    }

    std::sort(verdicts.begin(), verdicts.end(), [](const Verdict& a, const Verdict& b) {
        if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
        return a.subject < b.subject;
    });
    return verdicts;
}

} // namespace scdgmap
