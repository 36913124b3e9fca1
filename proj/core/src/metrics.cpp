#include "metacl/metrics.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace metacl {

const char* const kMetricsCsvHeader = "run_id,seed,setting,task,task_acc,class_acc,avg_acc,wall_secs";

namespace {

// Shortest round-trip decimal for a double; keeps CSV output byte-stable and
// exactly re-parsable.
std::string fmt_double(double v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

std::string csv_quote(const std::string& s) {
    const bool needs = s.find_first_of(",\"\r\n") != std::string::npos;
    if (!needs) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

// Split one CSV line honoring quoted fields.
std::vector<std::string> csv_split(const std::string& line, size_t lineno) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"' && cur.empty()) {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw format_error("csv: line " + std::to_string(lineno) + ": unterminated quote");
    out.push_back(std::move(cur));
    return out;
}

double parse_double(const std::string& s, size_t lineno, const char* what) {
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
        throw format_error("csv: line " + std::to_string(lineno) + ": bad " + std::string(what));
    return v;
}

} // namespace

void export_csv(const std::vector<MetricRecord>& records, std::ostream& out) {
    out << kMetricsCsvHeader << "\n";
    for (const auto& r : records) {
        out << csv_quote(r.run_id) << ',' << r.seed << ',' << csv_quote(r.setting) << ',' << r.task << ','
            << fmt_double(r.task_acc) << ',' << fmt_double(r.class_acc) << ',' << fmt_double(r.avg_acc) << ','
            << fmt_double(r.wall_secs) << "\n";
    }
}

void export_csv_file(const std::vector<MetricRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary); // binary: no platform newline translation
    if (!out) throw io_error("cannot open " + path + " for writing");
    export_csv(records, out);
    if (!out) throw io_error("write failed for " + path);
}

std::vector<MetricRecord> import_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw format_error("csv: empty metrics input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kMetricsCsvHeader)
        throw format_error("csv: unexpected metrics header '" + line + "'");
    std::vector<MetricRecord> out;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = csv_split(line, lineno);
        if (f.size() != 8)
            throw format_error("csv: line " + std::to_string(lineno) + ": expected 8 fields, got " +
                               std::to_string(f.size()));
        MetricRecord r;
        r.run_id = f[0];
        unsigned long long seed = 0;
        auto rc = std::from_chars(f[1].data(), f[1].data() + f[1].size(), seed);
        if (rc.ec != std::errc{}) throw format_error("csv: line " + std::to_string(lineno) + ": bad seed");
        r.seed = seed;
        r.setting = f[2];
        r.task = static_cast<int>(parse_double(f[3], lineno, "task"));
        r.task_acc = parse_double(f[4], lineno, "task_acc");
        r.class_acc = parse_double(f[5], lineno, "class_acc");
        r.avg_acc = parse_double(f[6], lineno, "avg_acc");
        r.wall_secs = parse_double(f[7], lineno, "wall_secs");
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<MetricRecord> import_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    return import_csv(in);
}

void export_jsonl(const std::vector<MetricRecord>& records, std::ostream& out) {
    for (const auto& r : records) {
        nlohmann::ordered_json j;
        j["run_id"] = r.run_id;
        j["seed"] = r.seed;
        j["setting"] = r.setting;
        j["task"] = r.task;
        j["task_acc"] = r.task_acc;
        j["class_acc"] = r.class_acc;
        j["avg_acc"] = r.avg_acc;
        j["wall_secs"] = r.wall_secs;
        j["per_task_acc"] = r.per_task_acc;
        j["continuum_size"] = r.continuum_size;
        out << j.dump() << "\n";
    }
}

void export_jsonl_file(const std::vector<MetricRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open " + path + " for writing");
    export_jsonl(records, out);
    if (!out) throw io_error("write failed for " + path);
}

double average_incremental_accuracy(const std::vector<double>& per_task_acc) {
    if (per_task_acc.empty()) throw validation_error("average_incremental_accuracy: empty accuracy list");
    double s = 0.0;
    for (double a : per_task_acc) s += a;
    return s / static_cast<double>(per_task_acc.size());
}

} // namespace metacl
