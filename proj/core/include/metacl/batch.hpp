#pragma once

#include <cstdint>
#include <vector>

#include "metacl/dataset.hpp"
#include "metacl/matrix.hpp"
#include "metacl/memory.hpp"
#include "metacl/rng.hpp"

namespace metacl {

// A materialized mini-batch (or micro-batch): features plus per-row class
// and task labels.
struct Batch {
    Matrix<float> x;
    std::vector<int32_t> y;
    std::vector<int32_t> task;

    int size() const { return static_cast<int>(y.size()); }
};

// Borrowed rows pooled from the current task's data and the exemplar memory;
// the sampling pool for training mini-batches.
struct UnionView {
    struct Item {
        const float* row;
        int32_t y;
        int32_t task;
    };
    int dim = 0;
    std::vector<Item> items;

    size_t size() const { return items.size(); }
};

UnionView make_union(const Dataset& task_data, int task, const ExemplarMemory& mem, int classes_per_task);

// k uniform draws: without replacement while the pool is big enough (k equal
// to the pool size gives back the whole pool), with replacement once k
// exceeds it.
Batch sample_minibatch(const UnionView& pool, int k, Rng& rng);

// Rows of `b` whose task label equals `task`, original order kept. May be
// empty.
Batch filter_microbatch(const Batch& b, int task);

// One-hot rows over `num_outputs` global classes.
template <typename T>
Matrix<T> one_hot_targets(const std::vector<int32_t>& y, int num_outputs) {
    Matrix<T> t(static_cast<int>(y.size()), num_outputs);
    for (size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0 || y[i] >= num_outputs)
            throw validation_error("one_hot_targets: label " + std::to_string(y[i]) + " outside [0," +
                                   std::to_string(num_outputs) + ")");
        t.at(static_cast<int>(i), y[i]) = T{1};
    }
    return t;
}

// Feature matrix in the compute precision.
template <typename T>
Matrix<T> widen(const Matrix<float>& x) {
    if constexpr (std::is_same_v<T, float>) {
        return x;
    } else {
        Matrix<T> out(x.rows, x.cols);
        for (size_t i = 0; i < x.data.size(); ++i) out.data[i] = static_cast<T>(x.data[i]);
        return out;
    }
}

} // namespace metacl
