// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "scdgmap/android.hpp"
#include "scdgmap/graph.hpp"
#include "scdgmap/mapping.hpp"

namespace scdgmap {

enum class IsoMode { Exact, Attributes };
enum class MatchMode { Graph, Subgraph };

struct MatchConfig {
    int hash_rounds = 3;
    int min_match_size = 2;       // singleton SCDGs carry no structure to match
    std::size_t max_nodes = 512;  // SizeLimit beyond this
    IsoMode iso_mode = IsoMode::Exact;
};

/// Isomorphism-invariant fingerprint via iterative neighborhood-label
/// refinement. Isomorphic graphs always hash equal; the converse is only
/// checked empirically.
std::string canonical_hash(const Scdg& g, int rounds = 3);

struct IsoResult {
    bool found = false;
    // (node id in a / pattern, node id in b / target)
    std::vector<std::pair<std::int64_t, std::int64_t>> witness;

    explicit operator bool() const { return found; }
};

/// Exact label- and edge-kind-preserving isomorphism (attribute-preserving in
/// Attributes mode), with a witness mapping when one exists.
IsoResult is_isomorphic(const Scdg& a, const Scdg& b, IsoMode mode = IsoMode::Exact,
                        std::size_t max_nodes = 512);

/// Injective embedding of `pattern` into `target` preserving labels and edge
/// kinds; target may carry extra nodes and edges.
IsoResult find_monomorphism(const Scdg& pattern, const Scdg& target,
                            IsoMode mode = IsoMode::Exact, std::size_t max_nodes = 512);

/// A canonical SCDG associated with a named Android API.
struct ApiSignature {
    std::string api_name;
    Scdg graph;
    std::string canon_hash;
    int min_nodes = 0;
    std::string provenance;
    std::set<std::string> implied_permissions;

    nlohmann::json to_json() const;
    static ApiSignature from_json(const nlohmann::json& j);
};

std::vector<ApiSignature> load_signature_store(const std::string& path);
void save_signature_store(const std::string& path, const std::vector<ApiSignature>& sigs);

struct SignatureMatch {
    int graph_id = 0;
    std::string api_name;
    std::vector<std::pair<std::int64_t, std::int64_t>> witness;
};

std::vector<SignatureMatch> match_signatures(const std::vector<Scdg>& scdgs,
                                             const std::vector<ApiSignature>& sigs,
                                             MatchMode mode,
                                             const MatchConfig& config = {});

/// Builds a signature from the largest SCDG assigned to `api_name` in a
/// mapped run. Throws NoEvidence when no assigned SCDG has >= 2 nodes.
ApiSignature build_signature(const MappingReport& report, const std::vector<Scdg>& scdgs,
                             const std::string& api_name, const ApiPermissionMap& perm_map,
                             const MatchConfig& config = {});

enum class VerdictKind { Overprivileged, UndeclaredBehavior, ApiEvasion };

const char* to_string(VerdictKind k);

struct Verdict {
    VerdictKind kind = VerdictKind::Overprivileged;
    std::string subject;  // permission or api_name
    std::vector<int> evidence_graphs;
    std::vector<std::string> evidence_apis;
    std::string explanation;

    nlohmann::json to_json() const;
};

/// Flags over-declared permissions, evidenced-but-undeclared permissions, and
/// signature behavior present without the corresponding API invocation.
std::vector<Verdict> detect_abuse(const PermissionManifest& manifest,
                                  const MappingReport& report,
                                  const std::vector<Scdg>& scdgs,
                                  const std::vector<ApiSignature>& sigs,
                                  const ApiPermissionMap& perm_map,
                                  const MatchConfig& config = {});

} // namespace scdgmap
