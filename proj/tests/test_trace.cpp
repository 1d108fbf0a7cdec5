// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include <nlohmann/json.hpp>

#include "scdgmap/error.hpp"
#include "scdgmap/trace.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace scdgmap;

namespace {
const ParseConfig kDefaults = ParseConfig::defaults();
}

TEST_CASE("parses a plain openat line into all fields") {
    auto rec = parse_strace_line(
        "1234 1553102851.987654 openat(AT_FDCWD, \"/data/local/f.txt\", "
        "O_RDONLY|O_CLOEXEC) = 5",
        kDefaults);
    auto* e = std::get_if<SyscallEvent>(&rec);
    REQUIRE(e != nullptr);
    CHECK(e->pid == 1234);
    CHECK(e->tid == 1234);
    CHECK(e->timestamp_us == 1553102851987654LL);
    CHECK(e->name == "openat");
    REQUIRE(e->args.size() == 3);
    CHECK(e->args[0].kind == ArgKind::SymbolicConstant);
    CHECK(e->args[1].raw == "\"/data/local/f.txt\"");
    CHECK(e->args[1].kind == ArgKind::StringLiteral);
    CHECK(e->args[2].kind == ArgKind::FlagSet);
    CHECK(e->ret.kind == ReturnValue::Kind::Integer);
    CHECK(e->ret.value == 5);
}

TEST_CASE("short fractional timestamps are padded to microseconds") {
    auto rec = parse_strace_line("7 100.5 close(3) = 0", kDefaults);
    auto* e = std::get_if<SyscallEvent>(&rec);
    REQUIRE(e != nullptr);
    CHECK(e->timestamp_us == 100500000);
}

TEST_CASE("error returns keep the errno name") {
    auto rec = parse_strace_line(
        "10 1.000001 open(\"/x\", O_RDONLY) = -1 ENOENT (No such file or directory)",
        kDefaults);
    auto* e = std::get_if<SyscallEvent>(&rec);
    REQUIRE(e != nullptr);
    CHECK(e->ret.is_error());
    CHECK(e->ret.error_name == "ENOENT");
}

TEST_CASE("pointer and unknown returns are kept as tokens") {
    auto rec = parse_strace_line(
        "10 1.000001 mmap(NULL, 4096, PROT_READ, MAP_SHARED, 4, 0) = 0x7f3b2c000000",
        kDefaults);
    auto* e = std::get_if<SyscallEvent>(&rec);
    REQUIRE(e != nullptr);
    CHECK(e->ret.kind == ReturnValue::Kind::Pointer);
    CHECK(e->ret.token == "0x7f3b2c000000");

    auto rec2 = parse_strace_line("10 1.000002 exit_group(0) = ?", kDefaults);
    auto* e2 = std::get_if<SyscallEvent>(&rec2);
    REQUIRE(e2 != nullptr);
    CHECK(e2->ret.token == "?");
}

TEST_CASE("unfinished and resumed halves classify as continuations") {
    auto rec = parse_strace_line("10 1.000001 read(5,  <unfinished ...>", kDefaults);
    auto* u = std::get_if<Unfinished>(&rec);
    REQUIRE(u != nullptr);
    CHECK(u->name == "read");
    CHECK(u->partial_args == "5,");

    auto rec2 = parse_strace_line("10 1.000500 <... read resumed> \"xy\", 64) = 2",
                                  kDefaults);
    auto* r = std::get_if<Resumed>(&rec2);
    REQUIRE(r != nullptr);
    CHECK(r->name == "read");
}

TEST_CASE("signal and exit-status lines are skips") {
    auto rec = parse_strace_line("10 1.0 --- SIGCHLD {si_signo=SIGCHLD} ---", kDefaults);
    auto* s = std::get_if<Skip>(&rec);
    REQUIRE(s != nullptr);
    CHECK(s->reason == Skip::Reason::Signal);

    auto rec2 = parse_strace_line("10 1.0 +++ exited with 0 +++", kDefaults);
    auto* s2 = std::get_if<Skip>(&rec2);
    REQUIRE(s2 != nullptr);
    CHECK(s2->reason == Skip::Reason::Exit);
}

TEST_CASE("malformed lines raise with line and position") {
    CHECK_THROWS_AS(parse_strace_line("notapid 1.0 open() = 0", kDefaults, 7),
                    MalformedLine);
    CHECK_THROWS_AS(parse_strace_line("10 nostamp open() = 0", kDefaults), MalformedLine);
    CHECK_THROWS_AS(parse_strace_line("10 1.0 open(\"/x\", O_RDONLY)", kDefaults),
                    MalformedLine);
    CHECK_THROWS_AS(parse_strace_line("10 1.0 open(\"/x\", O_RDONLY = 3", kDefaults),
                    MalformedLine);
    try {
        parse_strace_line("bad 1.0 close(3) = 0", kDefaults, 42);
        FAIL("expected MalformedLine");
    } catch (const MalformedLine& e) {
        CHECK(e.line_number == 42);
    }
}

TEST_CASE("split_arguments honors nested structures and quotes") {
    auto parts = split_arguments(
        "5, {st_mode=S_IFREG|0644, st_size=1024}, \"a,b\", [1, 2]");
    REQUIRE(parts.size() == 4);
    CHECK(parts[1] == "{st_mode=S_IFREG|0644, st_size=1024}");
    CHECK(parts[2] == "\"a,b\"");
    CHECK(parts[3] == "[1, 2]");
}

TEST_CASE("unfinished pairs merge into one event in FIFO order") {
    const char* text =
        "10 1.000001 read(5,  <unfinished ...>\n"
        "10 1.000002 open(\"/data/a\", O_RDONLY) = 3\n"
        "10 1.000003 read(7,  <unfinished ...>\n"
        "10 1.000004 <... read resumed> \"xy\", 64) = 2\n"
        "10 1.000005 <... read resumed> \"zw\", 64) = 2\n";
    auto session = load_trace_text(text, kDefaults);
    REQUIRE(session.events.size() == 3);
    CHECK(session.merged_pair_count == 2);
    // FIFO: the first resumed completes the fd-5 call, the second the fd-7 call.
    CHECK(session.events[0].name == "read");
    CHECK(session.events[0].args[0].raw == "5");
    CHECK(session.events[2].args[0].raw == "7");
}

TEST_CASE("unpaired resumption is an error") {
    CHECK_THROWS_AS(load_trace_text("10 1.0 <... read resumed> ) = 0\n", kDefaults),
                    UnpairedResumption);
}

TEST_CASE("noise filtering counts dropped events") {
    const char* text =
        "10 1.000001 futex(0xa, FUTEX_WAIT, 0) = 0\n"
        "10 1.000002 open(\"/data/a\", O_RDONLY) = 3\n"
        "10 1.000003 futex(0xa, FUTEX_WAKE, 1) = 1\n"
        "10 1.000004 futex(0xa, FUTEX_WAIT, 0) = 0\n"
        "10 1.000005 open(\"/data/b\", O_RDONLY) = 4\n"
        "10 1.000006 futex(0xa, FUTEX_WAKE, 1) = 1\n";
    auto session = load_trace_text(text, kDefaults);
    CHECK(session.events.size() == 2);
    CHECK(session.filtered_count == 4);
}

TEST_CASE("out-params are captured for designated syscalls") {
    auto rec = parse_strace_line(
        "10 1.0 gettimeofday({tv_sec=1553102851, tv_usec=123}, NULL) = 0", kDefaults);
    auto* e = std::get_if<SyscallEvent>(&rec);
    REQUIRE(e != nullptr);
    REQUIRE(e->out_params.size() == 1);
    CHECK(e->out_params[0].first == 0);
    CHECK(e->out_params[0].second == "{tv_sec=1553102851, tv_usec=123}");
}

TEST_CASE("event ids are dense and per-thread timestamps are monotone") {
    std::mt19937 rng(1001);
    for (int round = 0; round < 20; ++round) {
        auto session = load_trace_text(testsupport::random_trace_text(rng, 200), kDefaults);
        std::map<std::pair<int, int>, std::int64_t> last;
        for (std::size_t i = 0; i < session.events.size(); ++i) {
            const auto& e = session.events[i];
            CHECK(e.event_id == static_cast<std::int64_t>(i));
            auto key = std::make_pair(e.pid, e.tid);
            auto it = last.find(key);
            if (it != last.end()) CHECK(e.timestamp_us >= it->second);
            last[key] = e.timestamp_us;
        }
    }
}

TEST_CASE("conservation: events + filtered + skipped + merged = physical lines") {
    std::mt19937 rng(2002);
    for (int round = 0; round < 50; ++round) {
        std::string text = testsupport::random_trace_text(rng, 150);
        auto session = load_trace_text(text, kDefaults);
        auto stats = testsupport::classify_lines(text, kDefaults.noise);
        CHECK(static_cast<std::int64_t>(session.events.size()) + session.filtered_count
                  + session.skipped_count + session.merged_pair_count
              == stats.nonblank_lines);
        CHECK(static_cast<std::int64_t>(session.events.size()) == stats.events);
        CHECK(session.filtered_count == stats.filtered);
        CHECK(session.skipped_count == stats.skipped);
        CHECK(session.merged_pair_count == stats.merged);
    }
}

TEST_CASE("serialize then reparse is the identity on parsed events") {
    std::mt19937 rng(3003);
    auto text = testsupport::random_trace_text(rng, 400);
    auto session = load_trace_text(text, kDefaults);
    for (const auto& e : session.events) {
        auto rec = parse_strace_line(serialize_event(e), kDefaults);
        auto* back = std::get_if<SyscallEvent>(&rec);
        REQUIRE(back != nullptr);
        back->event_id = e.event_id;
        CHECK(*back == e);
    }
}

TEST_CASE("json round-trip preserves events") {
    std::mt19937 rng(4004);
    auto session = testsupport::random_session(rng, 60);
    for (const auto& e : session.events) CHECK(event_from_json(event_to_json(e)) == e);
}

TEST_CASE("independent classifier agrees on a 10k-line stream") {
    std::mt19937 rng(5005);
    std::string text = testsupport::random_trace_text(rng, 10000);
    auto session = load_trace_text(text, kDefaults);
    auto stats = testsupport::classify_lines(text, kDefaults.noise);
    CHECK(static_cast<std::int64_t>(session.events.size()) == stats.events);
    CHECK(session.filtered_count == stats.filtered);
    CHECK(session.skipped_count == stats.skipped);
    CHECK(session.merged_pair_count == stats.merged);
}
