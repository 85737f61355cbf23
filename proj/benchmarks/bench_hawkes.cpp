#include <benchmark/benchmark.h>

#include "cotic/hawkes.hpp"
#include "cotic/rng.hpp"

using namespace cotic;

namespace {

void BM_simulate(benchmark::State& state) {
    HawkesParams params{0.2, 0.8, 1.0, {}};
    const double horizon = static_cast<double>(state.range(0));
    std::uint64_t seed = 0;
    std::size_t events = 0;
    for (auto _ : state) {
        const EventSequence seq = simulate_hawkes(params, horizon, seed++);
        events += seq.length();
        benchmark::DoNotOptimize(seq.times.data());
    }
    state.SetItemsProcessed(static_cast<int64_t>(events));
}
BENCHMARK(BM_simulate)->Arg(100)->Arg(1000);

void BM_exact_nll(benchmark::State& state) {
    HawkesParams params{0.2, 0.8, 1.0, {}};
    const EventSequence seq = simulate_hawkes(params, static_cast<double>(state.range(0)), 9);
    for (auto _ : state) {
        benchmark::DoNotOptimize(hawkes_nll_exact(params, seq, seq.horizon));
    }
    state.SetItemsProcessed(state.iterations() * seq.length());
}
BENCHMARK(BM_exact_nll)->Arg(100)->Arg(1000);

void BM_intensity_sweep(benchmark::State& state) {
    HawkesParams params{0.2, 0.8, 1.0, {}};
    const EventSequence seq = simulate_hawkes(params, 100.0, 11);
    Rng rng(3);
    std::vector<double> queries(state.range(0));
    for (auto& q : queries) q = rng.uniform(0.0, 100.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(hawkes_intensity_at(params, seq.times, queries));
    }
    state.SetItemsProcessed(state.iterations() * queries.size());
}
BENCHMARK(BM_intensity_sweep)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
