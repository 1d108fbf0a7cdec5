// SPDX-License-Identifier: Apache-2.0
//
// Throughput benchmarks for the hot path: line parsing and SCDG construction.
#include <random>
#include <sstream>
#include <string>

#include <benchmark/benchmark.h>

#include "scdgmap/graph.hpp"
#include "scdgmap/matching.hpp"
#include "scdgmap/trace.hpp"

namespace {

// Self-contained synthetic trace; a realistic mix of fd traffic and noise.
std::string synthetic_trace(int lines) {
    std::mt19937 rng(99);
    std::uniform_int_distribution<int> roll(0, 5);
    std::ostringstream out;
    std::int64_t t = 1553102851000000LL;
    for (int i = 0; i < lines; ++i) {
        t += 37;
        out << "1234 " << (t / 1000000) << ".";
        out.width(6);
        out.fill('0');
        out << (t % 1000000) << " ";
        switch (roll(rng)) {
            case 0: out << "open(\"/data/f" << (i % 7) << "\", O_RDONLY) = " << (3 + i % 5); break;
            case 1: out << "read(" << (3 + i % 5) << ", \"abc\", 4096) = 42"; break;
            case 2: out << "write(" << (3 + i % 5) << ", \"xyz\", 3) = 3"; break;
            case 3: out << "close(" << (3 + i % 5) << ") = 0"; break;
            case 4: out << "futex(0xbeef, FUTEX_WAIT, 0) = 0"; break;
            default: out << "ioctl(" << (3 + i % 5) << ", TCGETS, 0x7ffc0) = 0"; break;
        }
        out << "\n";
    }
    return out.str();
}

void BM_ParseTrace(benchmark::State& state) {
    const std::string text = synthetic_trace(static_cast<int>(state.range(0)));
    const auto config = scdgmap::ParseConfig::defaults();
    for (auto _ : state) {
        auto session = scdgmap::load_trace_text(text, config);
        benchmark::DoNotOptimize(session.events.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ParseTrace)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_BuildScdgs(benchmark::State& state) {
    const std::string text = synthetic_trace(static_cast<int>(state.range(0)));
    const auto session = scdgmap::load_trace_text(text, scdgmap::ParseConfig::defaults());
    const auto rules = scdgmap::DependenceRuleSet::defaults();
    const auto norm = scdgmap::NormalizationTable::defaults();
    for (auto _ : state) {
        auto graphs = scdgmap::build_scdgs(session, rules, norm);
        benchmark::DoNotOptimize(graphs.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BuildScdgs)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_CanonicalHash(benchmark::State& state) {
    const std::string text = synthetic_trace(2000);
    const auto session = scdgmap::load_trace_text(text, scdgmap::ParseConfig::defaults());
    const auto graphs = scdgmap::build_scdgs(session, scdgmap::DependenceRuleSet::defaults(),
                                             scdgmap::NormalizationTable::defaults());
    for (auto _ : state) {
        for (const auto& g : graphs) {
            auto h = scdgmap::canonical_hash(g);
            benchmark::DoNotOptimize(h.data());
        }
    }
}
BENCHMARK(BM_CanonicalHash);

} // namespace

BENCHMARK_MAIN();
