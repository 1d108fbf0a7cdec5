// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "scdgmap/graph.hpp"
#include "scdgmap/trace.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace scdgmap;
using testsupport::make_event;
using testsupport::make_session;
using testsupport::ret_err;
using testsupport::ret_int;
using testsupport::ret_ptr;

namespace {
const DependenceRuleSet kRules = DependenceRuleSet::defaults();
const NormalizationTable kNorm = NormalizationTable::defaults();
}

TEST_CASE("fd-flow edges cover the fd lifetime until close") {
    auto session = make_session({
        make_event(0, 10, 100, "open", {"\"/data/a\"", "O_RDONLY"}, ret_int(5)),
        make_event(0, 10, 200, "read", {"5", "\"x\"", "64"}, ret_int(1)),
        make_event(0, 10, 300, "close", {"5"}, ret_int(0)),
    });
    auto edges = derive_dependences(session, kRules);
    REQUIRE(edges.size() == 2);
    CHECK(edges[0] == DependenceEdge{0, 1, 0, DepKind::FdFlow, "5"});
    CHECK(edges[1] == DependenceEdge{0, 2, 0, DepKind::FdFlow, "5"});
}

TEST_CASE("fd number reuse binds consumers to the newest producer") {
    auto session = make_session({
        make_event(0, 10, 100, "open", {"\"/data/a\"", "O_RDONLY"}, ret_int(5)),
        make_event(0, 10, 200, "close", {"5"}, ret_int(0)),
        make_event(0, 10, 300, "open", {"\"/data/b\"", "O_RDONLY"}, ret_int(5)),
        make_event(0, 10, 400, "read", {"5", "\"x\"", "64"}, ret_int(1)),
    });
    auto edges = derive_dependences(session, kRules);
    REQUIRE(edges.size() == 2);
    CHECK(edges[0] == DependenceEdge{0, 1, 0, DepKind::FdFlow, "5"});
    CHECK(edges[1] == DependenceEdge{2, 3, 0, DepKind::FdFlow, "5"});
}

TEST_CASE("dup chains add fd-alias edges from the root producer") {
    auto session = make_session({
        make_event(0, 10, 100, "open", {"\"/data/a\"", "O_RDONLY"}, ret_int(5)),
        make_event(0, 10, 200, "dup", {"5"}, ret_int(9)),
        make_event(0, 10, 300, "dup", {"9"}, ret_int(11)),
        make_event(0, 10, 400, "write", {"11", "\"x\"", "1"}, ret_int(1)),
    });
    auto edges = derive_dependences(session, kRules);
    // write(11) flows from the dup(9) producer and aliases the original open.
    CHECK(std::count(edges.begin(), edges.end(),
                     DependenceEdge{2, 3, 0, DepKind::FdFlow, "11"}) == 1);
    CHECK(std::count(edges.begin(), edges.end(),
                     DependenceEdge{0, 3, 0, DepKind::FdAlias, "11"}) == 1);
}

TEST_CASE("failed producers yield no fd binding") {
    auto session = make_session({
        make_event(0, 10, 100, "open", {"\"/x\"", "O_RDONLY"}, ret_err("ENOENT")),
        make_event(0, 10, 200, "read", {"3", "\"x\"", "64"}, ret_int(1)),
    });
    CHECK(derive_dependences(session, kRules).empty());
}

TEST_CASE("mmap-address pairs every earlier mapping with munmap and msync") {
    auto session = make_session({
        make_event(0, 10, 100, "mmap",
                   {"NULL", "4096", "PROT_READ", "MAP_SHARED", "4", "0"},
                   ret_ptr("0x7f00001000")),
        make_event(0, 10, 200, "msync", {"0x7f00001000", "4096", "MS_SYNC"}, ret_int(0)),
        make_event(0, 10, 300, "munmap", {"0x7f00001000", "4096"}, ret_int(0)),
        make_event(0, 20, 400, "munmap", {"0x7f00001000", "4096"}, ret_int(0)),
    });
    auto edges = derive_dependences(session, kRules);
    CHECK(std::count_if(edges.begin(), edges.end(), [](const DependenceEdge& e) {
              return e.kind == DepKind::MmapAddress;
          }) == 2);
    // The other-pid munmap shares the address token but not the stream.
    for (const auto& e : edges) CHECK(e.to_event != 3);
}

TEST_CASE("value-match links out-param tokens into later arguments") {
    auto session = make_session({
        make_event(0, 10, 100, "gettimeofday", {"{tv_sec=1553102851, tv_usec=7}", "NULL"},
                   ret_int(0), {{0, "{tv_sec=1553102851, tv_usec=7}"}}),
        make_event(0, 10, 200, "openat",
                   {"AT_FDCWD", "\"/sdcard/IMG_1553102851.jpg\"", "O_WRONLY"}, ret_int(8)),
        make_event(0, 20, 300, "openat",
                   {"AT_FDCWD", "\"/sdcard/IMG_1553102851.jpg\"", "O_WRONLY"}, ret_int(8)),
    });
    auto edges = derive_dependences(session, kRules);
    REQUIRE(edges.size() == 1);
    CHECK(edges[0] == DependenceEdge{0, 1, 1, DepKind::ValueMatch, "1553102851"});
}

TEST_CASE("short tokens never produce value-match edges") {
    auto session = make_session({
        make_event(0, 10, 100, "gettimeofday", {"{tv_sec=123, tv_usec=7}", "NULL"},
                   ret_int(0), {{0, "{tv_sec=123, tv_usec=7}"}}),
        make_event(0, 10, 200, "open", {"\"/data/f123\"", "O_RDONLY"}, ret_int(4)),
    });
    CHECK(derive_dependences(session, kRules).empty());
}

TEST_CASE("derive_dependences matches the quadratic oracle on random sessions") {
    std::mt19937 rng(6006);
    for (int round = 0; round < 60; ++round) {
        auto session = testsupport::random_session(rng, 120);
        CHECK(derive_dependences(session, kRules)
              == testsupport::oracle_dependences(session, kRules));
    }
}

TEST_CASE("build_scdgs splits connected components and normalizes labels") {
    auto session = make_session({
        make_event(0, 10, 100, "openat", {"AT_FDCWD", "\"/data/a\"", "O_RDONLY"},
                   ret_int(5)),
        make_event(0, 10, 200, "read", {"5", "\"x\"", "64"}, ret_int(1)),
        make_event(0, 10, 300, "getuid", {}, ret_int(1000)),
        make_event(0, 10, 400, "open", {"\"/data/b\"", "O_RDONLY"}, ret_int(6)),
        make_event(0, 10, 500, "close", {"6"}, ret_int(0)),
    });
    auto graphs = build_scdgs(session, kRules, kNorm);
    REQUIRE(graphs.size() == 3);
    CHECK(graphs[0].nodes.size() == 2);
    CHECK(graphs[0].nodes[0].label == "open");  // openat normalized
    CHECK(graphs[1].nodes.size() == 1);
    CHECK(graphs[1].nodes[0].label == "getuid");
    CHECK(graphs[2].nodes.size() == 2);
    CHECK(graphs[0].graph_id == 0);
    CHECK(graphs[2].span_us.first == 400);
    CHECK(graphs[2].span_us.second == 500);
}

TEST_CASE("graphs partition the event set") {
    std::mt19937 rng(7007);
    for (int round = 0; round < 30; ++round) {
        auto session = testsupport::random_session(rng, 150);
        auto graphs = build_scdgs(session, kRules, kNorm);
        std::set<std::int64_t> seen;
        std::size_t total = 0;
        for (const auto& g : graphs) {
            for (const auto& n : g.nodes) CHECK(seen.insert(n.id).second);
            total += g.nodes.size();
            // Every edge endpoint stays inside its graph.
            for (const auto& e : g.edges) {
                CHECK(seen.contains(e.from_event));
                CHECK(seen.contains(e.to_event));
            }
        }
        CHECK(total == session.events.size());
    }
}

TEST_CASE("edges always point forward in time") {
    std::mt19937 rng(8008);
    for (int round = 0; round < 20; ++round) {
        auto session = testsupport::random_session(rng, 150);
        for (const auto& e : derive_dependences(session, kRules))
            CHECK(e.from_event < e.to_event);
    }
}

TEST_CASE("path classes follow the first string-literal argument") {
    auto dev = make_event(0, 10, 1, "openat", {"AT_FDCWD", "\"/dev/binder\"", "O_RDWR"},
                          ret_int(3));
    CHECK(classify_event_path(dev) == PathClass::DevBinder);
    auto ash = make_event(0, 10, 1, "open", {"\"/dev/ashmem\"", "O_RDWR"}, ret_int(3));
    CHECK(classify_event_path(ash) == PathClass::DevAshmem);
    auto sd = make_event(0, 10, 1, "open", {"\"/sdcard/x\"", "O_RDWR"}, ret_int(3));
    CHECK(classify_event_path(sd) == PathClass::ExternalStorage);
    auto data = make_event(0, 10, 1, "open", {"\"/data/app/x\"", "O_RDWR"}, ret_int(3));
    CHECK(classify_event_path(data) == PathClass::AppData);
    auto sys = make_event(0, 10, 1, "open", {"\"/proc/self/maps\"", "O_RDONLY"}, ret_int(3));
    CHECK(classify_event_path(sys) == PathClass::System);
    auto none = make_event(0, 10, 1, "close", {"3"}, ret_int(0));
    CHECK(classify_event_path(none) == PathClass::Other);
}

TEST_CASE("single-node graphs export to DOT") {
    auto session = make_session({make_event(0, 10, 100, "getuid", {}, ret_int(0))});
    auto graphs = build_scdgs(session, kRules, kNorm);
    REQUIRE(graphs.size() == 1);
    std::string dot = export_dot(graphs[0]);
    CHECK(dot.find("digraph scdg_0") != std::string::npos);
    CHECK(dot.find("getuid@0") != std::string::npos);
}

TEST_CASE("scdg json round-trips byte-identically") {
    std::mt19937 rng(9009);
    auto session = testsupport::random_session(rng, 100);
    for (const auto& g : build_scdgs(session, kRules, kNorm)) {
        auto j = scdg_to_json(g);
        CHECK(scdg_from_json(j) == g);
        CHECK(scdg_to_json(scdg_from_json(j)).dump() == j.dump());
    }
}

TEST_CASE("build_scdgs is deterministic") {
    std::mt19937 rng(1010);
    auto session = testsupport::random_session(rng, 150);
    auto a = build_scdgs(session, kRules, kNorm);
    auto b = build_scdgs(session, kRules, kNorm);
    CHECK(a == b);
}
