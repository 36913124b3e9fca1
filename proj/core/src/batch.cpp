#include "metacl/batch.hpp"

#include <algorithm>
#include <numeric>

namespace metacl {

UnionView make_union(const Dataset& task_data, int task, const ExemplarMemory& mem, int classes_per_task) {
    if (classes_per_task < 1) throw validation_error("make_union: classes_per_task must be >= 1");
    if (mem.total() > 0 && mem.dim != task_data.dim)
        throw validation_error("make_union: memory dim " + std::to_string(mem.dim) + " != task data dim " +
                               std::to_string(task_data.dim));
    UnionView u;
    u.dim = task_data.dim;
    u.items.reserve(task_data.size() + mem.total());
    for (size_t i = 0; i < task_data.size(); ++i)
        u.items.push_back({task_data.row(i), task_data.y[i], task});
    for (int c = 0; c < mem.classes(); ++c) {
        const int32_t mtask = c / classes_per_task;
        for (size_t i = 0; i < mem.count(c); ++i)
            u.items.push_back({mem.row(c, i), c, mtask});
    }
    return u;
}

Batch sample_minibatch(const UnionView& pool, int k, Rng& rng) {
    if (k < 1) throw validation_error("sample_minibatch: k must be >= 1");
    if (pool.items.empty()) throw validation_error("sample_minibatch: empty pool");

    std::vector<size_t> pick;
    pick.reserve(static_cast<size_t>(k));
    if (static_cast<size_t>(k) <= pool.items.size()) {
        std::vector<size_t> all(pool.items.size());
        std::iota(all.begin(), all.end(), size_t{0});
        std::sample(all.begin(), all.end(), std::back_inserter(pick), static_cast<size_t>(k), rng);
    } else {
        std::uniform_int_distribution<size_t> dist(0, pool.items.size() - 1);
        for (int i = 0; i < k; ++i) pick.push_back(dist(rng));
    }

    Batch b;
    b.x = Matrix<float>(k, pool.dim);
    b.y.reserve(pick.size());
    b.task.reserve(pick.size());
    for (size_t i = 0; i < pick.size(); ++i) {
        const auto& item = pool.items[pick[i]];
        std::copy(item.row, item.row + pool.dim, b.x.row(static_cast<int>(i)));
        b.y.push_back(item.y);
        b.task.push_back(item.task);
    }
    return b;
}

Batch filter_microbatch(const Batch& b, int task) {
    std::vector<int> rows;
    for (int i = 0; i < b.size(); ++i)
        if (b.task[i] == task) rows.push_back(i);
    Batch out;
    out.x = Matrix<float>(static_cast<int>(rows.size()), b.x.cols);
    out.y.reserve(rows.size());
    out.task.reserve(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        std::copy(b.x.row(rows[i]), b.x.row(rows[i]) + b.x.cols, out.x.row(static_cast<int>(i)));
        out.y.push_back(b.y[rows[i]]);
        out.task.push_back(b.task[rows[i]]);
    }
    return out;
}

} // namespace metacl
