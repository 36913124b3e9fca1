#include "metacl/memory.hpp"

#include <algorithm>
#include <numeric>

#include "metacl/errors.hpp"

namespace metacl {

std::vector<size_t> memory_quota(size_t budget, int classes_seen) {
    if (classes_seen < 1) throw validation_error("memory_quota: classes_seen must be >= 1");
    const size_t base = budget / static_cast<size_t>(classes_seen);
    const size_t extra = budget % static_cast<size_t>(classes_seen);
    std::vector<size_t> q(static_cast<size_t>(classes_seen), base);
    for (size_t c = 0; c < extra; ++c) q[c] += 1;
    return q;
}

namespace {

// Uniform subset of k row indices out of n, ascending order.
std::vector<size_t> sample_indices(size_t n, size_t k, Rng& rng) {
    std::vector<size_t> all(n);
    std::iota(all.begin(), all.end(), size_t{0});
    if (k >= n) return all;
    std::vector<size_t> pick;
    pick.reserve(k);
    std::sample(all.begin(), all.end(), std::back_inserter(pick), k, rng);
    return pick;
}

} // namespace

void memory_update(ExemplarMemory& mem, const Dataset& task_data, int task, int classes_per_task, Rng& rng) {
    if (task < 0 || classes_per_task < 1)
        throw validation_error("memory_update: task must be >= 0, classes_per_task >= 1");
    if (mem.dim == 0) mem.dim = task_data.dim;
    if (mem.dim != task_data.dim)
        throw validation_error("memory_update: memory dim " + std::to_string(mem.dim) + " != task data dim " +
                               std::to_string(task_data.dim));

    const int first_new = task * classes_per_task;
    const int classes_seen = (task + 1) * classes_per_task;
    if (mem.classes() > first_new)
        throw validation_error("memory_update: task " + std::to_string(task) + " replayed out of order");
    const auto quota = memory_quota(mem.budget, classes_seen);
    const size_t sdim = static_cast<size_t>(mem.dim);

    // Shrink what we already hold. Ascending class order fixes the rng
    // consumption order, which keeps runs reproducible.
    for (int c = 0; c < mem.classes(); ++c) {
        const size_t have = mem.count(c);
        if (have <= quota[c]) continue;
        const auto keep = sample_indices(have, quota[c], rng);
        std::vector<float> next;
        next.reserve(keep.size() * sdim);
        for (size_t i : keep)
            next.insert(next.end(), mem.row(c, i), mem.row(c, i) + sdim);
        mem.store[c] = std::move(next);
    }

    mem.store.resize(static_cast<size_t>(classes_seen));
    for (int c = first_new; c < classes_seen; ++c) {
        std::vector<size_t> candidates;
        for (size_t i = 0; i < task_data.size(); ++i)
            if (task_data.y[i] == c) candidates.push_back(i);
        const size_t take = std::min(candidates.size(), quota[c]);
        const auto pick = sample_indices(candidates.size(), take, rng);
        auto& bucket = mem.store[c];
        bucket.clear();
        bucket.reserve(take * sdim);
        for (size_t i : pick) {
            const float* r = task_data.row(candidates[i]);
            bucket.insert(bucket.end(), r, r + sdim);
        }
    }
}

} // namespace metacl
