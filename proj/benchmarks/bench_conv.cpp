#include <benchmark/benchmark.h>

#include "cotic/cotic.hpp"

using namespace cotic;

namespace {

EventSequence make_sequence(std::size_t len, int num_types, std::uint64_t seed) {
    Rng rng(seed);
    EventSequence seq;
    double t = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
        t += rng.uniform(0.005, 0.02);
        seq.times.push_back(t);
        seq.marks.push_back(1 + static_cast<int>(rng.index(num_types)));
    }
    seq.horizon = t;
    return seq;
}

CoticModel make_model(std::size_t layers, std::size_t kernel_size) {
    ModelConfig cfg;
    cfg.num_types = 2;
    cfg.num_layers = layers;
    cfg.kernel_size = kernel_size;
    return CoticModel(cfg, 1);
}

void BM_backbone_forward(benchmark::State& state) {
    const auto model = make_model(state.range(0), 5);
    const EventSequence seq = make_sequence(state.range(1), 2, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.backbone_embeddings(seq));
    }
    state.SetItemsProcessed(state.iterations() * seq.length());
}
BENCHMARK(BM_backbone_forward)
    ->Args({1, 100})
    ->Args({3, 100})
    ->Args({3, 400})
    ->Args({6, 100});

void BM_intensity_grid(benchmark::State& state) {
    const auto model = make_model(3, 5);
    const EventSequence seq = make_sequence(100, 2, 4);
    std::vector<double> grid(state.range(0));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid[i] = seq.times.back() * static_cast<double>(i) / (grid.size() - 1.0);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.intensity(seq, grid));
    }
    state.SetItemsProcessed(state.iterations() * grid.size());
}
BENCHMARK(BM_intensity_grid)->Arg(100)->Arg(1000);

void BM_loss_backward(benchmark::State& state) {
    const auto model = make_model(3, state.range(0));
    const EventSequence seq = make_sequence(100, 2, 5);
    for (auto _ : state) {
        ModelPass pass(model, seq);
        Rng rng(7);
        SequenceLoss loss = sequence_loss(pass, seq, 100, rng);
        Tensor objective = loss.ll + loss.time + loss.type;
        backward(objective);
        benchmark::DoNotOptimize(objective.value().item());
    }
    state.SetItemsProcessed(state.iterations() * seq.length());
}
BENCHMARK(BM_loss_backward)->Arg(3)->Arg(5)->Arg(9);

}  // namespace

BENCHMARK_MAIN();
