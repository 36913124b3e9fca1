#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "metacl/errors.hpp"
#include "metacl/rng.hpp"

namespace metacl {

// Flat sample store: row-major float features plus integer labels. Features
// are kept as float32 regardless of the compute precision picked later.
struct Dataset {
    int dim = 0;
    int img_rows = 0; // retained so image data can round-trip back to IDX
    int img_cols = 0;
    std::vector<float> x;
    std::vector<int32_t> y;

    size_t size() const { return y.size(); }
    const float* row(size_t i) const { return x.data() + i * static_cast<size_t>(dim); }
    void push(const float* features, int32_t label) {
        x.insert(x.end(), features, features + dim);
        y.push_back(label);
    }
};

// A class-incremental stream: `tasks` disjoint slices of `classes_per_task`
// classes each, labels already remapped to [0, tasks*classes_per_task).
// class_map[new_label] = original label.
struct TaskStream {
    int tasks = 0;
    int classes_per_task = 0;
    int dim = 0;
    std::vector<Dataset> train;
    std::vector<Dataset> test;
    std::vector<int32_t> class_map;

    int num_classes() const { return tasks * classes_per_task; }
};

// IDX (the MNIST container format): big-endian u32 header words, ubyte
// payload. Pixels map to [0,1] floats via /255.
Dataset load_idx(std::istream& images, std::istream& labels);
Dataset load_idx_files(const std::string& images_path, const std::string& labels_path);
void save_idx(const Dataset& d, std::ostream& images, std::ostream& labels);

// CSV with a one-line header: label,feature0,feature1,...
Dataset load_csv_dataset(std::istream& in);
Dataset load_csv_dataset_file(const std::string& path);

// Partition a labeled dataset into a class-incremental stream. Classes are
// optionally permuted by seed before slicing; without a seed the sorted
// label order is used. Extra classes beyond tasks*classes_per_task are
// dropped.
TaskStream split_into_tasks(const Dataset& train, const Dataset& test, int tasks, int classes_per_task,
                            std::optional<uint64_t> perm_seed = std::nullopt);

// Synthetic Gaussian blobs: one unit-direction mean per class scaled by
// `separation`, unit covariance. Fully determined by the seed.
struct SynthSpec {
    int tasks = 2;
    int classes_per_task = 2;
    int dim = 8;
    int train_per_class = 100;
    int test_per_class = 50;
    double separation = 4.0;
    uint64_t seed = 1;
};

TaskStream synth_gaussian_tasks(const SynthSpec& spec);

} // namespace metacl
