#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "metacl/errors.hpp"

namespace metacl {

// One evaluation row: the stream state after training `task`, scored under
// `setting`. The CSV schema is frozen (consumers key on the header); fields
// beyond it travel in the JSONL mirror only.
struct MetricRecord {
    std::string run_id;
    uint64_t seed = 0;
    std::string setting;
    int task = 0;
    double task_acc = 0.0;
    double class_acc = 0.0;
    double avg_acc = 0.0;
    double wall_secs = 0.0;
    // JSONL-only extras
    std::vector<double> per_task_acc;
    int continuum_size = 0;
};

extern const char* const kMetricsCsvHeader; // "run_id,seed,setting,task,task_acc,class_acc,avg_acc,wall_secs"

void export_csv(const std::vector<MetricRecord>& records, std::ostream& out);
void export_csv_file(const std::vector<MetricRecord>& records, const std::string& path);
std::vector<MetricRecord> import_csv(std::istream& in);
std::vector<MetricRecord> import_csv_file(const std::string& path);

void export_jsonl(const std::vector<MetricRecord>& records, std::ostream& out);
void export_jsonl_file(const std::vector<MetricRecord>& records, const std::string& path);

// A_t: arithmetic mean of the per-task accuracies at one incremental state.
// Empty input is an error, not zero.
double average_incremental_accuracy(const std::vector<double>& per_task_acc);

} // namespace metacl
