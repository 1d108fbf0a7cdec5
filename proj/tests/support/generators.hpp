// SPDX-License-Identifier: Apache-2.0
//
// Deterministic random inputs for property tests. All generators take an
// explicit std::mt19937 so every test pins its own seed.
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "scdgmap/graph.hpp"
#include "scdgmap/trace.hpp"

namespace testsupport {

scdgmap::ReturnValue ret_int(long long v);
scdgmap::ReturnValue ret_ptr(std::string token);
scdgmap::ReturnValue ret_err(std::string name);

/// Builds an event directly; arg kinds are classified from the raw text.
scdgmap::SyscallEvent make_event(std::int64_t id, int pid, std::int64_t t_us,
                                 std::string name, std::vector<std::string> args,
                                 scdgmap::ReturnValue ret,
                                 std::vector<std::pair<int, std::string>> out_params = {});

/// Wraps events (assumed time-ordered) into a session with dense event ids.
scdgmap::TraceSession make_session(std::vector<scdgmap::SyscallEvent> events);

/// Random multi-pid session exercising fd lifecycles, dup chains, mmap
/// lifetimes and value-match tokens. At most `max_events` events.
scdgmap::TraceSession random_session(std::mt19937& rng, int max_events);

/// Random well-formed strace text: complete calls, unfinished/resumed pairs,
/// signal and exit-status lines, noise syscalls, occasional blank lines.
std::string random_trace_text(std::mt19937& rng, int approx_lines);

/// Random small labeled digraph (1..max_nodes nodes) with random edge kinds.
scdgmap::Scdg random_graph(std::mt19937& rng, int max_nodes);

/// Isomorphic copy: node ids renumbered, node order shuffled, edges relabeled.
scdgmap::Scdg permuted_copy(const scdgmap::Scdg& g, std::mt19937& rng);

} // namespace testsupport
