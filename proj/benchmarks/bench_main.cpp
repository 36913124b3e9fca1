// Microbenchmarks for the hot paths: the forward/backward pass at the
// desk-scale model size, one meta-training iteration, inference-time task
// voting and adaptation, the continuum-size solver, and exemplar memory
// maintenance. Run with --benchmark_filter=... to narrow.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "metacl/batch.hpp"
#include "metacl/bound.hpp"
#include "metacl/dataset.hpp"
#include "metacl/inference.hpp"
#include "metacl/meta.hpp"

using namespace metacl;

namespace {

// the split-MNIST desk configuration: 784-400-400 trunk, 5 tasks of 2 classes
ModelLayout desk_layout() { return {784, {400, 400}, 5, 2, Activation::relu}; }

Batch random_batch(int rows, int dim, int tasks, int classes_per_task, uint64_t seed) {
    Rng rng = make_rng(seed, "bench-batch");
    std::uniform_real_distribution<float> fd(0.0f, 1.0f);
    std::uniform_int_distribution<int> td(0, tasks - 1), cd(0, classes_per_task - 1);
    Batch b;
    b.x = Matrix<float>(rows, dim);
    for (auto& v : b.x.data) v = fd(rng);
    for (int i = 0; i < rows; ++i) {
        const int t = td(rng);
        b.task.push_back(t);
        b.y.push_back(t * classes_per_task + cd(rng));
    }
    return b;
}

void bm_forward(benchmark::State& state) {
    const ModelLayout lay = desk_layout();
    Rng rng = make_rng(1, "bench-model");
    const auto p = ModelParams<float>::init(lay, rng);
    const Batch b = random_batch(static_cast<int>(state.range(0)), lay.input_dim, lay.tasks,
                                 lay.classes_per_task, 2);
    const auto x = widen<float>(b.x);
    for (auto _ : state) benchmark::DoNotOptimize(forward(p, x));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_forward)->Arg(1)->Arg(32)->Arg(128);

void bm_forward_backward(benchmark::State& state) {
    const ModelLayout lay = desk_layout();
    Rng rng = make_rng(1, "bench-model");
    const auto p = ModelParams<float>::init(lay, rng);
    const Batch b = random_batch(static_cast<int>(state.range(0)), lay.input_dim, lay.tasks,
                                 lay.classes_per_task, 2);
    const auto x = widen<float>(b.x);
    const auto targets = one_hot_targets<float>(b.y, lay.output_dim());
    std::vector<int> heads;
    for (int h = 0; h < lay.tasks; ++h) heads.push_back(h);
    for (auto _ : state) {
        ForwardCache<float> cache;
        auto probs = forward(p, x, &cache);
        auto lg = bce_loss(probs, targets);
        benchmark::DoNotOptimize(backward(p, cache, lg.dlogits, heads));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_forward_backward)->Arg(32)->Arg(128);

// one full meta-iteration at desk scale: per-task inner loops over the
// micro-batches of a mixed batch, then the blended outer update
void bm_meta_iteration(benchmark::State& state) {
    const ModelLayout lay = desk_layout();
    Rng rng = make_rng(1, "bench-model");
    auto p = ModelParams<float>::init(lay, rng);
    const Batch b = random_batch(128, lay.input_dim, lay.tasks, lay.classes_per_task, 3);
    for (auto _ : state) {
        std::vector<ModelParams<float>> adapted;
        for (int t = 0; t < lay.tasks; ++t) {
            const Batch micro = filter_microbatch(b, t);
            if (micro.size() == 0) continue;
            adapted.push_back(inner_loop(p, micro, t, 1, 0.1f).params);
        }
        benchmark::DoNotOptimize(meta_update(p, adapted, 0.8));
    }
    state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(bm_meta_iteration);

void bm_task_vote(benchmark::State& state) {
    const ModelLayout lay = desk_layout();
    Rng rng = make_rng(1, "bench-model");
    const auto p = ModelParams<float>::init(lay, rng);
    const Batch b = random_batch(static_cast<int>(state.range(0)), lay.input_dim, lay.tasks,
                                 lay.classes_per_task, 4);
    for (auto _ : state) benchmark::DoNotOptimize(predict_task(p, b.x, lay.tasks));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_task_vote)->Arg(1)->Arg(5)->Arg(20);

void bm_adapt_to_task(benchmark::State& state) {
    const ModelLayout lay = desk_layout();
    Rng rng = make_rng(1, "bench-model");
    const auto p = ModelParams<float>::init(lay, rng);

    Rng mem_rng = make_rng(9, "bench-mem");
    std::uniform_real_distribution<float> fd(0.0f, 1.0f);
    ExemplarMemory mem(2000, lay.input_dim);
    Dataset d;
    d.dim = lay.input_dim;
    std::vector<float> row(static_cast<size_t>(lay.input_dim));
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 250; ++i) {
            for (auto& v : row) v = fd(mem_rng);
            d.push(row.data(), c);
        }
    memory_update(mem, d, 0, 2, mem_rng);

    AdaptConfig acfg; // one full-batch pass, the evaluation default
    for (auto _ : state) benchmark::DoNotOptimize(adapt_to_task(p, 0, mem, acfg));
}
BENCHMARK(bm_adapt_to_task);

void bm_min_continuum_size(benchmark::State& state) {
    BoundQuery q;
    q.p0 = 0.6 + 0.001 * static_cast<double>(state.range(0));
    q.classes_per_task = 2;
    q.tasks = static_cast<int>(state.range(0));
    q.gamma = 0.999;
    for (auto _ : state) benchmark::DoNotOptimize(min_continuum_size(q));
}
BENCHMARK(bm_min_continuum_size)->Arg(5)->Arg(10);

void bm_memory_update(benchmark::State& state) {
    Rng rng = make_rng(11, "bench-mem2");
    std::uniform_real_distribution<float> fd(0.0f, 1.0f);
    Dataset d;
    d.dim = 784;
    std::vector<float> row(784);
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 6000; ++i) {
            for (auto& v : row) v = fd(rng);
            d.push(row.data(), c);
        }
    for (auto _ : state) {
        ExemplarMemory mem(2000, 784);
        memory_update(mem, d, 0, 2, rng);
        benchmark::DoNotOptimize(mem.total());
    }
}
BENCHMARK(bm_memory_update);

} // namespace

BENCHMARK_MAIN();
