#pragma once

#include <cstdint>
#include <vector>

#include "metacl/dataset.hpp"
#include "metacl/rng.hpp"

namespace metacl {

// Fixed-budget exemplar store, one bucket of flat float rows per class.
struct ExemplarMemory {
    size_t budget = 0;
    int dim = 0;
    std::vector<std::vector<float>> store; // store[c]: count(c) * dim floats

    ExemplarMemory() = default;
    ExemplarMemory(size_t budget, int dim) : budget(budget), dim(dim) {}

    int classes() const { return static_cast<int>(store.size()); }
    size_t count(int c) const {
        if (c < 0 || c >= classes() || dim == 0) return 0;
        return store[c].size() / static_cast<size_t>(dim);
    }
    size_t total() const {
        size_t n = 0;
        for (int c = 0; c < classes(); ++c) n += count(c);
        return n;
    }
    const float* row(int c, size_t i) const { return store[c].data() + i * static_cast<size_t>(dim); }
};

// Per-class slot counts for a budget split over `classes_seen` classes:
// floor share everywhere, remainder to the lowest class indices.
std::vector<size_t> memory_quota(size_t budget, int classes_seen);

// After finishing task `t`: shrink every already-stored class to the new
// quota (uniform random subset of what it held) and fill the task's new
// classes with uniform draws without replacement from task_data. Classes
// with fewer samples than their quota keep everything; the spare slots are
// not redistributed.
void memory_update(ExemplarMemory& mem, const Dataset& task_data, int task, int classes_per_task, Rng& rng);

} // namespace metacl
