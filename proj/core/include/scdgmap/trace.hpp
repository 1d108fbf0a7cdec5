// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace scdgmap {

enum class ArgKind {
    Integer,
    StringLiteral,
    FlagSet,
    StructDump,
    PointerToken,
    SymbolicConstant,
};

const char* to_string(ArgKind kind);
ArgKind arg_kind_from_string(std::string_view s);

/// One syscall argument, kept verbatim so traces re-serialize byte-for-byte.
struct ArgValue {
    std::string raw;
    ArgKind kind = ArgKind::SymbolicConstant;

    bool operator==(const ArgValue&) const = default;
};

ArgKind classify_arg(std::string_view raw);

struct ReturnValue {
    enum class Kind { Integer, Pointer, Error };

    Kind kind = Kind::Integer;
    long long value = 0;     // Kind::Integer
    std::string token;       // Kind::Pointer (0x... or "?")
    std::string error_name;  // Kind::Error (ENOENT, ...)

    bool is_error() const { return kind == Kind::Error; }
    std::string to_string() const;

    bool operator==(const ReturnValue&) const = default;
};

struct SyscallEvent {
    std::int64_t event_id = 0;
    int pid = 0;
    int tid = 0;
    std::int64_t timestamp_us = 0;
    std::string name;
    std::vector<ArgValue> args;
    ReturnValue ret;
    // (arg index, verbatim decoded value) for designated out-parameter syscalls.
    std::vector<std::pair<int, std::string>> out_params;

    bool operator==(const SyscallEvent&) const = default;
};

struct ParseConfig {
    std::set<std::string> noise;
    std::set<std::string> outparam_syscalls;
    std::map<int, std::string> pid_package_map;

    static ParseConfig defaults();
};

/// First half of a call interrupted by another task (`<unfinished ...>`).
struct Unfinished {
    int pid = 0;
    int tid = 0;
    std::int64_t timestamp_us = 0;
    std::string name;
    std::string partial_args;  // verbatim text between '(' and the marker
};

/// Second half (`<... name resumed>`); remainder completes the argument list.
struct Resumed {
    int pid = 0;
    int tid = 0;
    std::int64_t timestamp_us = 0;
    std::string name;
    std::string remainder;  // verbatim text after 'resumed>' incl. ') = ret'
};

struct Skip {
    enum class Reason { Signal, Exit };
    Reason reason = Reason::Signal;
};

using LineRecord = std::variant<SyscallEvent, Unfinished, Resumed, Skip>;

/// Parses one physical strace line (epoch timestamps, leading PID column).
/// Throws MalformedLine when the grammar does not match.
LineRecord parse_strace_line(std::string_view line, const ParseConfig& config,
                             std::size_t line_number = 0);

struct TraceSession {
    std::vector<SyscallEvent> events;
    std::string source_path;
    std::int64_t filtered_count = 0;     // noise-dropped events
    std::int64_t skipped_count = 0;      // signal / exit-status lines
    std::int64_t merged_pair_count = 0;  // unfinished+resumed pairs merged
    std::map<int, std::string> pid_package_map;
};

TraceSession load_trace(const std::string& path, const ParseConfig& config);
TraceSession load_trace_text(std::string_view text, const ParseConfig& config,
                             std::string source = "<memory>");

/// Splits an argument list on top-level commas, honoring quotes and brackets.
std::vector<std::string> split_arguments(std::string_view argtext);

/// strace-like canonical form: `pid sec.micros name(a, b) = ret`.
std::string serialize_event(const SyscallEvent& e);

nlohmann::json event_to_json(const SyscallEvent& e);
SyscallEvent event_from_json(const nlohmann::json& j);

} // namespace scdgmap
