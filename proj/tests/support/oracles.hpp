// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used to cross-check the library.
// These deliberately avoid the library's internal helpers: the dependence
// oracle is a quadratic pairwise scan with backward fd provenance, the
// isomorphism oracles enumerate permutations / injective maps exhaustively,
// and the line classifier is a single-pass regex counter.
#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "scdgmap/graph.hpp"
#include "scdgmap/matching.hpp"
#include "scdgmap/rules.hpp"
#include "scdgmap/trace.hpp"

namespace testsupport {

/// Quadratic scan over all ordered event pairs; returns the sorted, deduped
/// dependence edge set under the same rule families as the library.
std::vector<scdgmap::DependenceEdge> oracle_dependences(
    const scdgmap::TraceSession& session, const scdgmap::DependenceRuleSet& rules);

/// Exhaustive permutation check for labeled directed multigraph isomorphism.
bool oracle_isomorphic(const scdgmap::Scdg& a, const scdgmap::Scdg& b,
                       scdgmap::IsoMode mode = scdgmap::IsoMode::Exact);

/// Exhaustive injective-map check for labeled subgraph monomorphism.
bool oracle_monomorphic(const scdgmap::Scdg& pattern, const scdgmap::Scdg& target,
                        scdgmap::IsoMode mode = scdgmap::IsoMode::Exact);

/// Per-line trace classification, independent of the event-level parser.
struct LineStats {
    std::int64_t nonblank_lines = 0;
    std::int64_t events = 0;    // complete calls plus merged pairs, minus noise
    std::int64_t filtered = 0;  // noise-named complete calls and merged pairs
    std::int64_t skipped = 0;   // signal/exit lines and dangling unfinished halves
    std::int64_t merged = 0;    // unfinished+resumed pairs
};

LineStats classify_lines(std::string_view text, const std::set<std::string>& noise);

/// True when `witness` is a valid embedding of `pattern` into `target`
/// (injective, label-preserving, every pattern edge present with its kind).
bool witness_is_embedding(const scdgmap::Scdg& pattern, const scdgmap::Scdg& target,
                          const std::vector<std::pair<std::int64_t, std::int64_t>>& witness,
                          bool exact, scdgmap::IsoMode mode = scdgmap::IsoMode::Exact);

} // namespace testsupport
