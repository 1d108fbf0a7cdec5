// SPDX-License-Identifier: Apache-2.0
#include "scdgmap/trace.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <deque>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "scdgmap/error.hpp"

namespace scdgmap {

namespace {

constexpr std::string_view kUnfinishedMarker = "<unfinished ...>";
constexpr std::string_view kResumedPrefix = "<... ";
constexpr std::string_view kResumedSuffix = " resumed>";

bool is_name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

std::string_view ltrim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}

std::string_view rtrim(std::string_view s) {
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

// Consumes a decimal integer; returns npos-style failure as false.
bool take_int(std::string_view& s, long long& out) {
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc{} || ptr == begin) return false;
    s.remove_prefix(static_cast<std::size_t>(ptr - begin));
    return true;
}

} // namespace

const char* to_string(ArgKind kind) {
    switch (kind) {
        case ArgKind::Integer: return "integer";
        case ArgKind::StringLiteral: return "string-literal";
        case ArgKind::FlagSet: return "flag-set";
        case ArgKind::StructDump: return "struct-dump";
        case ArgKind::PointerToken: return "pointer-token";
        case ArgKind::SymbolicConstant: return "symbolic-constant";
    }
    return "symbolic-constant";
}

ArgKind arg_kind_from_string(std::string_view s) {
    if (s == "integer") return ArgKind::Integer;
    if (s == "string-literal") return ArgKind::StringLiteral;
    if (s == "flag-set") return ArgKind::FlagSet;
    if (s == "struct-dump") return ArgKind::StructDump;
    if (s == "pointer-token") return ArgKind::PointerToken;
    if (s == "symbolic-constant") return ArgKind::SymbolicConstant;
    throw SchemaError("unknown arg kind: " + std::string(s));
}

ArgKind classify_arg(std::string_view raw) {
    if (raw.empty()) return ArgKind::SymbolicConstant;
    if (raw.front() == '"') return ArgKind::StringLiteral;
    if (raw.front() == '{' || raw.front() == '[') return ArgKind::StructDump;
    if (raw.size() > 2 && raw[0] == '0' && (raw[1] == 'x' || raw[1] == 'X'))
        return ArgKind::PointerToken;
    bool all_digits = true;
    std::string_view body = raw;
    if (body.front() == '-') body.remove_prefix(1);
    if (body.empty()) return ArgKind::SymbolicConstant;
    for (char c : body)
        if (!std::isdigit(static_cast<unsigned char>(c))) { all_digits = false; break; }
    if (all_digits) return ArgKind::Integer;
    if (raw.find('|') != std::string_view::npos) return ArgKind::FlagSet;
    return ArgKind::SymbolicConstant;
}

std::string ReturnValue::to_string() const {
    switch (kind) {
        case Kind::Integer: return std::to_string(value);
        case Kind::Pointer: return token;
        case Kind::Error: return "-1 " + error_name + " (error)";
    }
    return {};
}

ParseConfig ParseConfig::defaults() {
    ParseConfig c;
    c.noise = {"futex", "sched_yield", "rt_sigprocmask", "rt_sigreturn",
               "restart_syscall", "getpid", "gettid"};
    c.outparam_syscalls = {"gettimeofday", "clock_gettime", "fstat", "stat"};
    return c;
}

std::vector<std::string> split_arguments(std::string_view argtext) {
    std::vector<std::string> out;
    argtext = rtrim(ltrim(argtext));
    if (argtext.empty()) return out;

    int depth = 0;
    bool in_string = false;
    std::size_t start = 0;
    for (std::size_t i = 0; i < argtext.size(); ++i) {
        char c = argtext[i];
        if (in_string) {
            if (c == '\\' && i + 1 < argtext.size()) ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        switch (c) {
            case '"': in_string = true; break;
            case '(': case '[': case '{': ++depth; break;
            case ')': case ']': case '}': --depth; break;
            case ',':
                if (depth == 0) {
                    out.emplace_back(rtrim(ltrim(argtext.substr(start, i - start))));
                    start = i + 1;
                }
                break;
            default: break;
        }
    }
    out.emplace_back(rtrim(ltrim(argtext.substr(start))));
    return out;
}

namespace {

ReturnValue parse_return(std::string_view text, std::size_t line_number, std::size_t col) {
    text = ltrim(text);
    if (text.empty())
        throw MalformedLine(line_number, col, "missing return value after '='");

    ReturnValue rv;
    if (text.front() == '?') {
        rv.kind = ReturnValue::Kind::Pointer;
        rv.token = "?";
        return rv;
    }
    if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
        std::size_t i = 2;
        while (i < text.size() && std::isxdigit(static_cast<unsigned char>(text[i]))) ++i;
        rv.kind = ReturnValue::Kind::Pointer;
        rv.token = std::string(text.substr(0, i));
        return rv;
    }

    std::string_view rest = text;
    long long value = 0;
    if (!take_int(rest, value))
        throw MalformedLine(line_number, col, "unparseable return value");
    rest = ltrim(rest);
    if (value == -1 && !rest.empty() && rest.front() == 'E') {
        std::size_t i = 0;
        while (i < rest.size() && is_name_char(rest[i])) ++i;
        rv.kind = ReturnValue::Kind::Error;
        rv.error_name = std::string(rest.substr(0, i));
        return rv;
    }
    // Trailing text is an strace comment, e.g. `= 1553102851 (2019-03-20 ...)`.
    rv.kind = ReturnValue::Kind::Integer;
    rv.value = value;
    return rv;
}

} // namespace

LineRecord parse_strace_line(std::string_view line, const ParseConfig& config,
                             std::size_t line_number) {
    std::string_view s = rtrim(line);
    std::string_view orig = s;
    auto col = [&](std::string_view cur) {
        return static_cast<std::size_t>(cur.data() - orig.data());
    };

    long long pid = 0;
    if (!take_int(s, pid) || pid <= 0)
        throw MalformedLine(line_number, col(s), "expected leading PID column");
    s = ltrim(s);

    long long seconds = 0;
    if (!take_int(s, seconds) || s.empty() || s.front() != '.')
        throw MalformedLine(line_number, col(s),
                            "expected epoch timestamp with fractional seconds");
    s.remove_prefix(1);
    std::size_t frac_digits = 0;
    long long frac = 0;
    while (!s.empty() && std::isdigit(static_cast<unsigned char>(s.front()))) {
        if (frac_digits < 6) frac = frac * 10 + (s.front() - '0');
        ++frac_digits;
        s.remove_prefix(1);
    }
    if (frac_digits == 0 || frac_digits > 9)
        throw MalformedLine(line_number, col(s), "bad fractional timestamp");
    for (std::size_t i = frac_digits; i < 6; ++i) frac *= 10;
    const std::int64_t t_us = seconds * 1000000 + frac;
    s = ltrim(s);

    if (s.starts_with("---")) return Skip{Skip::Reason::Signal};
    if (s.starts_with("+++")) return Skip{Skip::Reason::Exit};

    if (s.starts_with(kResumedPrefix)) {
        s.remove_prefix(kResumedPrefix.size());
        std::size_t pos = s.find(kResumedSuffix);
        if (pos == std::string_view::npos)
            throw MalformedLine(line_number, col(s), "malformed '<... resumed>' line");
        Resumed r;
        r.pid = static_cast<int>(pid);
        r.tid = static_cast<int>(pid);
        r.timestamp_us = t_us;
        r.name = std::string(s.substr(0, pos));
        r.remainder = std::string(s.substr(pos + kResumedSuffix.size()));
        if (r.name.empty() || !std::all_of(r.name.begin(), r.name.end(), is_name_char))
            throw MalformedLine(line_number, col(s), "bad syscall name in resumed line");
        return r;
    }

    std::size_t name_len = 0;
    while (name_len < s.size() && is_name_char(s[name_len])) ++name_len;
    if (name_len == 0 || name_len >= s.size() || s[name_len] != '(')
        throw MalformedLine(line_number, col(s), "expected 'name(' syscall form");
    std::string name(s.substr(0, name_len));
    s.remove_prefix(name_len + 1);

    if (s.ends_with(kUnfinishedMarker)) {
        Unfinished u;
        u.pid = static_cast<int>(pid);
        u.tid = static_cast<int>(pid);
        u.timestamp_us = t_us;
        u.name = std::move(name);
        std::string_view partial = s.substr(0, s.size() - kUnfinishedMarker.size());
        u.partial_args = std::string(rtrim(partial));
        return u;
    }

    // Scan the argument list to the matching close paren at depth 0.
    int depth = 0;
    bool in_string = false;
    std::size_t close = std::string_view::npos;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (in_string) {
            if (c == '\\' && i + 1 < s.size()) ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') { in_string = true; continue; }
        if (c == '(' || c == '[' || c == '{') { ++depth; continue; }
        if (c == ']' || c == '}') { --depth; continue; }
        if (c == ')') {
            if (depth == 0) { close = i; break; }
            --depth;
        }
    }
    if (close == std::string_view::npos)
        throw MalformedLine(line_number, col(s), "unterminated argument list");

    std::string_view argtext = s.substr(0, close);
    std::string_view tail = ltrim(s.substr(close + 1));
    if (tail.empty() || tail.front() != '=')
        throw MalformedLine(line_number, col(tail), "expected '=' after argument list");
    tail.remove_prefix(1);

    SyscallEvent e;
    e.pid = static_cast<int>(pid);
    e.tid = static_cast<int>(pid);
    e.timestamp_us = t_us;
    e.name = std::move(name);
    for (auto& raw : split_arguments(argtext)) {
        ArgValue a;
        a.kind = classify_arg(raw);
        a.raw = std::move(raw);
        e.args.push_back(std::move(a));
    }
    e.ret = parse_return(tail, line_number, col(tail));

    if (config.outparam_syscalls.contains(e.name)) {
        for (std::size_t i = 0; i < e.args.size(); ++i)
            if (e.args[i].kind == ArgKind::StructDump)
                e.out_params.emplace_back(static_cast<int>(i), e.args[i].raw);
    }
    return e;
}

namespace {

// Rebuilds a single complete line from an unfinished/resumed pair and reparses.
SyscallEvent merge_halves(const Unfinished& u, const Resumed& r, const ParseConfig& config,
                          std::size_t resumed_line) {
    std::string args = u.partial_args;
    std::string remainder(ltrim(r.remainder));
    if (!args.empty() && !remainder.empty() && remainder.front() != ')') args += " ";
    args += remainder;

    std::ostringstream synth;
    synth << u.pid << " " << (u.timestamp_us / 1000000) << ".";
    synth.width(6);
    synth.fill('0');
    synth << (u.timestamp_us % 1000000);
    synth << " " << u.name << "(" << args;

    LineRecord rec = parse_strace_line(synth.str(), config, resumed_line);
    if (auto* e = std::get_if<SyscallEvent>(&rec)) return *e;
    throw MalformedLine(resumed_line, 0, "merged unfinished/resumed pair did not parse");
}

} // namespace

TraceSession load_trace_text(std::string_view text, const ParseConfig& config,
                             std::string source) {
    TraceSession session;
    session.source_path = std::move(source);
    session.pid_package_map = config.pid_package_map;

    // FIFO of pending unfinished halves, keyed by (pid, tid, name).
    std::map<std::tuple<int, int, std::string>, std::deque<Unfinished>> pending;

    std::size_t line_number = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        std::string_view line = (nl == std::string_view::npos)
                                    ? text.substr(start)
                                    : text.substr(start, nl - start);
        start = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
        ++line_number;
        if (rtrim(ltrim(line)).empty()) continue;

        LineRecord rec = parse_strace_line(line, config, line_number);
        if (auto* e = std::get_if<SyscallEvent>(&rec)) {
            session.events.push_back(std::move(*e));
        } else if (auto* u = std::get_if<Unfinished>(&rec)) {
            pending[{u->pid, u->tid, u->name}].push_back(std::move(*u));
        } else if (auto* r = std::get_if<Resumed>(&rec)) {
            auto it = pending.find({r->pid, r->tid, r->name});
            if (it == pending.end() || it->second.empty())
                throw UnpairedResumption(line_number, r->name);
            SyscallEvent merged = merge_halves(it->second.front(), *r, config, line_number);
            it->second.pop_front();
            session.events.push_back(std::move(merged));
            ++session.merged_pair_count;
        } else {
            ++session.skipped_count;
        }
    }

    // Dangling unfinished halves (trace cut mid-call) are dropped as skipped.
    for (auto& [key, q] : pending) session.skipped_count += static_cast<std::int64_t>(q.size());

    std::erase_if(session.events, [&](const SyscallEvent& e) {
        if (config.noise.contains(e.name)) {
            ++session.filtered_count;
            return true;
        }
        return false;
    });

    std::stable_sort(session.events.begin(), session.events.end(),
                     [](const SyscallEvent& a, const SyscallEvent& b) {
                         return a.timestamp_us < b.timestamp_us;
                     });
    for (std::size_t i = 0; i < session.events.size(); ++i)
        session.events[i].event_id = static_cast<std::int64_t>(i);
    return session;
}

TraceSession load_trace(const std::string& path, const ParseConfig& config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open trace file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_trace_text(buf.str(), config, path);
}

std::string serialize_event(const SyscallEvent& e) {
    std::ostringstream out;
    out << e.pid << " " << (e.timestamp_us / 1000000) << ".";
    out.width(6);
    out.fill('0');
    out << (e.timestamp_us % 1000000);
    out << " " << e.name << "(";
    for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) out << ", ";
        out << e.args[i].raw;
    }
    out << ") = " << e.ret.to_string();
    return out.str();
}

nlohmann::json event_to_json(const SyscallEvent& e) {
    nlohmann::json args = nlohmann::json::array();
    for (const auto& a : e.args)
        args.push_back({{"raw", a.raw}, {"kind", to_string(a.kind)}});

    nlohmann::json ret;
    switch (e.ret.kind) {
        case ReturnValue::Kind::Integer:
            ret = {{"kind", "int"}, {"value", e.ret.value}};
            break;
        case ReturnValue::Kind::Pointer:
            ret = {{"kind", "ptr"}, {"token", e.ret.token}};
            break;
        case ReturnValue::Kind::Error:
            ret = {{"kind", "error"}, {"name", e.ret.error_name}};
            break;
    }

    nlohmann::json out_params = nlohmann::json::array();
    for (const auto& [idx, val] : e.out_params)
        out_params.push_back(nlohmann::json::array({idx, val}));

    return {{"event_id", e.event_id}, {"pid", e.pid},   {"tid", e.tid},
            {"t_us", e.timestamp_us}, {"name", e.name}, {"args", args},
            {"ret", ret},             {"out_params", out_params}};
}

SyscallEvent event_from_json(const nlohmann::json& j) {
    SyscallEvent e;
    e.event_id = j.at("event_id").get<std::int64_t>();
    e.pid = j.at("pid").get<int>();
    e.tid = j.at("tid").get<int>();
    e.timestamp_us = j.at("t_us").get<std::int64_t>();
    e.name = j.at("name").get<std::string>();
    for (const auto& a : j.at("args")) {
        ArgValue v;
        v.raw = a.at("raw").get<std::string>();
        v.kind = arg_kind_from_string(a.at("kind").get<std::string>());
        e.args.push_back(std::move(v));
    }
    const auto& ret = j.at("ret");
    std::string kind = ret.at("kind").get<std::string>();
    if (kind == "int") {
        e.ret.kind = ReturnValue::Kind::Integer;
        e.ret.value = ret.at("value").get<long long>();
    } else if (kind == "ptr") {
        e.ret.kind = ReturnValue::Kind::Pointer;
        e.ret.token = ret.at("token").get<std::string>();
    } else if (kind == "error") {
        e.ret.kind = ReturnValue::Kind::Error;
        e.ret.error_name = ret.at("name").get<std::string>();
    } else {
        throw SchemaError("unknown return kind: " + kind);
    }
    for (const auto& p : j.at("out_params"))
        e.out_params.emplace_back(p.at(0).get<int>(), p.at(1).get<std::string>());
    return e;
}

} // namespace scdgmap
