#include "metacl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace metacl {

namespace {

constexpr uint32_t kIdxImagesMagic = 0x00000803; // ubyte, 3 dims
constexpr uint32_t kIdxLabelsMagic = 0x00000801; // ubyte, 1 dim

uint32_t read_u32_be(std::istream& in, size_t& offset, const char* what) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (in.gcount() != 4)
        throw format_error(std::string("idx: truncated while reading ") + what + " at byte offset " +
                           std::to_string(offset + static_cast<size_t>(in.gcount())));
    offset += 4;
    return (uint32_t(buf[0]) << 24) | (uint32_t(buf[1]) << 16) | (uint32_t(buf[2]) << 8) | uint32_t(buf[3]);
}

void write_u32_be(std::ostream& out, uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

std::string hex32(uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "0x%08x", v);
    return buf;
}

} // namespace

Dataset load_idx(std::istream& images, std::istream& labels) {
    size_t ioff = 0;
    const uint32_t imagic = read_u32_be(images, ioff, "image magic");
    if (imagic != kIdxImagesMagic)
        throw format_error("idx: image magic at byte offset 0 is " + hex32(imagic) + ", want " + hex32(kIdxImagesMagic));
    const uint32_t count = read_u32_be(images, ioff, "image count");
    const uint32_t rows = read_u32_be(images, ioff, "image rows");
    const uint32_t cols = read_u32_be(images, ioff, "image cols");
    if (rows == 0 || cols == 0) throw format_error("idx: zero image dimensions in header");

    size_t loff = 0;
    const uint32_t lmagic = read_u32_be(labels, loff, "label magic");
    if (lmagic != kIdxLabelsMagic)
        throw format_error("idx: label magic at byte offset 0 is " + hex32(lmagic) + ", want " + hex32(kIdxLabelsMagic));
    const uint32_t lcount = read_u32_be(labels, loff, "label count");
    if (lcount != count)
        throw format_error("idx: image count " + std::to_string(count) + " != label count " + std::to_string(lcount));

    Dataset d;
    d.img_rows = static_cast<int>(rows);
    d.img_cols = static_cast<int>(cols);
    d.dim = static_cast<int>(rows * cols);

    const size_t pixel_bytes = static_cast<size_t>(count) * rows * cols;
    std::vector<unsigned char> pixels(pixel_bytes);
    images.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixel_bytes));
    if (static_cast<size_t>(images.gcount()) != pixel_bytes)
        throw format_error("idx: image payload truncated at byte offset " +
                           std::to_string(ioff + static_cast<size_t>(images.gcount())));

    std::vector<unsigned char> lab(count);
    labels.read(reinterpret_cast<char*>(lab.data()), static_cast<std::streamsize>(count));
    if (static_cast<size_t>(labels.gcount()) != count)
        throw format_error("idx: label payload truncated at byte offset " +
                           std::to_string(loff + static_cast<size_t>(labels.gcount())));

    d.x.resize(pixel_bytes);
    for (size_t i = 0; i < pixel_bytes; ++i) d.x[i] = static_cast<float>(pixels[i]) / 255.0f;
    d.y.assign(lab.begin(), lab.end());
    return d;
}

Dataset load_idx_files(const std::string& images_path, const std::string& labels_path) {
    std::ifstream images(images_path, std::ios::binary);
    if (!images) throw io_error("cannot open " + images_path);
    std::ifstream labels(labels_path, std::ios::binary);
    if (!labels) throw io_error("cannot open " + labels_path);
    return load_idx(images, labels);
}

void save_idx(const Dataset& d, std::ostream& images, std::ostream& labels) {
    if (d.img_rows <= 0 || d.img_cols <= 0 || d.img_rows * d.img_cols != d.dim)
        throw validation_error("save_idx: dataset has no image geometry (img_rows*img_cols must equal dim)");
    write_u32_be(images, kIdxImagesMagic);
    write_u32_be(images, static_cast<uint32_t>(d.size()));
    write_u32_be(images, static_cast<uint32_t>(d.img_rows));
    write_u32_be(images, static_cast<uint32_t>(d.img_cols));
    std::vector<unsigned char> pixels(d.x.size());
    for (size_t i = 0; i < d.x.size(); ++i) {
        const long v = std::lround(static_cast<double>(d.x[i]) * 255.0);
        pixels[i] = static_cast<unsigned char>(std::clamp(v, 0L, 255L));
    }
    images.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));

    write_u32_be(labels, kIdxLabelsMagic);
    write_u32_be(labels, static_cast<uint32_t>(d.size()));
    for (int32_t v : d.y) {
        if (v < 0 || v > 255) throw validation_error("save_idx: label " + std::to_string(v) + " does not fit a ubyte");
        const unsigned char b = static_cast<unsigned char>(v);
        labels.write(reinterpret_cast<const char*>(&b), 1);
    }
}

Dataset load_csv_dataset(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw format_error("csv: empty input, expected a header line");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("label", 0) != 0)
        throw format_error("csv: header line must start with 'label', got '" + line.substr(0, 32) + "'");
    const int dim = static_cast<int>(std::count(line.begin(), line.end(), ','));
    if (dim < 1) throw format_error("csv: header names no feature columns");

    Dataset d;
    d.dim = dim;
    std::vector<float> row(dim);
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const char* p = line.data();
        const char* end = p + line.size();
        int32_t label = 0;
        auto r = std::from_chars(p, end, label);
        if (r.ec != std::errc{})
            throw format_error("csv: line " + std::to_string(lineno) + ": bad label");
        p = r.ptr;
        for (int j = 0; j < dim; ++j) {
            if (p >= end || *p != ',')
                throw format_error("csv: line " + std::to_string(lineno) + ": expected " + std::to_string(dim) +
                                   " features, found " + std::to_string(j));
            ++p;
            float v = 0.0f;
            auto fr = std::from_chars(p, end, v);
            if (fr.ec != std::errc{})
                throw format_error("csv: line " + std::to_string(lineno) + ": bad feature " + std::to_string(j));
            p = fr.ptr;
            row[j] = v;
        }
        if (p != end)
            throw format_error("csv: line " + std::to_string(lineno) + ": trailing characters after " +
                               std::to_string(dim) + " features");
        d.push(row.data(), label);
    }
    return d;
}

Dataset load_csv_dataset_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    return load_csv_dataset(in);
}

TaskStream split_into_tasks(const Dataset& train, const Dataset& test, int tasks, int classes_per_task,
                            std::optional<uint64_t> perm_seed) {
    if (tasks < 1 || classes_per_task < 1)
        throw validation_error("split_into_tasks: tasks and classes_per_task must be >= 1");
    if (test.dim != train.dim)
        throw validation_error("split_into_tasks: train dim " + std::to_string(train.dim) + " != test dim " +
                               std::to_string(test.dim));

    std::vector<int32_t> labels(train.y);
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    const int need = tasks * classes_per_task;
    if (static_cast<int>(labels.size()) < need)
        throw validation_error("split_into_tasks: need " + std::to_string(need) + " classes, train data has " +
                               std::to_string(labels.size()));
    if (perm_seed) {
        Rng rng = make_rng(*perm_seed, "class-perm");
        std::shuffle(labels.begin(), labels.end(), rng);
    }
    labels.resize(need);

    std::map<int32_t, int32_t> to_new;
    for (int i = 0; i < need; ++i) to_new[labels[i]] = i;

    TaskStream s;
    s.tasks = tasks;
    s.classes_per_task = classes_per_task;
    s.dim = train.dim;
    s.class_map = labels;
    s.train.assign(tasks, Dataset{});
    s.test.assign(tasks, Dataset{});
    for (auto* part : {&s.train, &s.test}) {
        for (auto& d : *part) {
            d.dim = train.dim;
            d.img_rows = train.img_rows;
            d.img_cols = train.img_cols;
        }
    }

    auto scatter = [&](const Dataset& src, std::vector<Dataset>& dst) {
        for (size_t i = 0; i < src.size(); ++i) {
            auto it = to_new.find(src.y[i]);
            if (it == to_new.end()) continue; // class beyond the stream, dropped
            const int32_t nl = it->second;
            dst[nl / classes_per_task].push(src.row(i), nl);
        }
    };
    scatter(train, s.train);
    scatter(test, s.test);
    return s;
}

TaskStream synth_gaussian_tasks(const SynthSpec& spec) {
    if (spec.tasks < 1 || spec.classes_per_task < 1 || spec.dim < 1)
        throw validation_error("synth: tasks, classes_per_task and dim must be >= 1");
    if (spec.train_per_class < 1 || spec.test_per_class < 0)
        throw validation_error("synth: train_per_class must be >= 1, test_per_class >= 0");

    TaskStream s;
    s.tasks = spec.tasks;
    s.classes_per_task = spec.classes_per_task;
    s.dim = spec.dim;
    s.train.assign(spec.tasks, Dataset{});
    s.test.assign(spec.tasks, Dataset{});
    for (auto* part : {&s.train, &s.test})
        for (auto& d : *part) d.dim = spec.dim;

    const int classes = spec.tasks * spec.classes_per_task;
    s.class_map.resize(classes);
    Rng rng = make_rng(spec.seed, "synth");
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<double> mean(spec.dim), sample(spec.dim);
    std::vector<float> fsample(spec.dim);
    for (int c = 0; c < classes; ++c) {
        s.class_map[c] = c;
        double norm2 = 0.0;
        for (auto& v : mean) {
            v = gauss(rng);
            norm2 += v * v;
        }
        const double scale = spec.separation / std::max(std::sqrt(norm2), 1e-12);
        for (auto& v : mean) v *= scale;

        const int task = c / spec.classes_per_task;
        auto emit = [&](Dataset& dst, int n) {
            for (int k = 0; k < n; ++k) {
                for (int j = 0; j < spec.dim; ++j) fsample[j] = static_cast<float>(mean[j] + gauss(rng));
                dst.push(fsample.data(), c);
            }
        };
        emit(s.train[task], spec.train_per_class);
        emit(s.test[task], spec.test_per_class);
    }
    return s;
}

} // namespace metacl
