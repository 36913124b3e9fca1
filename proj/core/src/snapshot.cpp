#include "metacl/snapshot.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace metacl {

namespace {

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

bool get_bytes(std::istream& in, unsigned char* dst, size_t n, size_t& offset) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    const size_t got = static_cast<size_t>(in.gcount());
    offset += got;
    return got == n;
}

uint32_t get_u32(std::istream& in, size_t& offset, const char* what) {
    unsigned char b[4];
    if (!get_bytes(in, b, 4, offset))
        throw format_error(std::string("snapshot: truncated reading ") + what + " at byte offset " +
                           std::to_string(offset));
    return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
}

uint64_t get_u64(std::istream& in, size_t& offset, const char* what) {
    unsigned char b[8];
    if (!get_bytes(in, b, 8, offset))
        throw format_error(std::string("snapshot: truncated reading ") + what + " at byte offset " +
                           std::to_string(offset));
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
    return v;
}

constexpr char kMagic[4] = {'I', 'T', 'M', 'L'};

} // namespace

void write_tensors(std::ostream& out, const std::vector<NamedTensor>& tensors) {
    out.write(kMagic, 4);
    put_u32(out, kSnapshotVersion);
    for (const auto& t : tensors) {
        if (t.data.size() != t.elems())
            throw validation_error("snapshot: tensor " + t.name + " payload size disagrees with dims");
        put_u32(out, static_cast<uint32_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        put_u32(out, static_cast<uint32_t>(t.dims.size()));
        for (uint64_t d : t.dims) put_u64(out, d);
        for (double v : t.data) put_f64(out, v);
    }
    if (!out) throw io_error("snapshot: stream write failed");
}

std::vector<NamedTensor> read_tensors(std::istream& in) {
    size_t offset = 0;
    unsigned char magic[4];
    if (!get_bytes(in, magic, 4, offset) || std::memcmp(magic, kMagic, 4) != 0)
        throw format_error("snapshot: bad magic at byte offset 0, want 'ITML'");
    const uint32_t version = get_u32(in, offset, "version");
    if (version != kSnapshotVersion)
        throw format_error("snapshot: unsupported version " + std::to_string(version));

    std::vector<NamedTensor> out;
    while (true) {
        unsigned char peek;
        in.read(reinterpret_cast<char*>(&peek), 1);
        if (in.gcount() == 0) break; // clean EOF between tensors
        in.putback(static_cast<char>(peek));

        NamedTensor t;
        const uint32_t name_len = get_u32(in, offset, "name length");
        if (name_len > (1u << 20)) throw format_error("snapshot: unreasonable name length at byte offset " +
                                                      std::to_string(offset - 4));
        t.name.resize(name_len);
        if (name_len &&
            !get_bytes(in, reinterpret_cast<unsigned char*>(t.name.data()), name_len, offset))
            throw format_error("snapshot: truncated tensor name at byte offset " + std::to_string(offset));
        const uint32_t rank = get_u32(in, offset, "rank");
        if (rank > 8) throw format_error("snapshot: tensor " + t.name + " has implausible rank " + std::to_string(rank));
        t.dims.resize(rank);
        for (uint32_t i = 0; i < rank; ++i) t.dims[i] = get_u64(in, offset, "dim");
        const uint64_t n = t.elems();
        if (n > (uint64_t(1) << 32)) throw format_error("snapshot: tensor " + t.name + " is implausibly large");
        t.data.resize(n);
        for (uint64_t i = 0; i < n; ++i) {
            const uint64_t bits = get_u64(in, offset, "payload");
            double v;
            std::memcpy(&v, &bits, 8);
            t.data[i] = v;
        }
        out.push_back(std::move(t));
    }
    return out;
}

void write_tensors_file(const std::string& path, const std::vector<NamedTensor>& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open " + path + " for writing");
    write_tensors(out, tensors);
}

std::vector<NamedTensor> read_tensors_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    return read_tensors(in);
}

namespace detail {

const NamedTensor* find_tensor(const std::vector<NamedTensor>& bag, const std::string& name) {
    for (const auto& t : bag)
        if (t.name == name) return &t;
    return nullptr;
}

const NamedTensor& need_tensor(const std::vector<NamedTensor>& bag, const std::string& name) {
    const auto* t = find_tensor(bag, name);
    if (!t) throw format_error("snapshot: missing tensor " + name);
    return *t;
}

} // namespace detail

std::vector<NamedTensor> memory_to_tensors(const ExemplarMemory& mem) {
    std::vector<NamedTensor> out;
    out.push_back({"memory.meta", {2}, {static_cast<double>(mem.budget), static_cast<double>(mem.dim)}});
    for (int c = 0; c < mem.classes(); ++c) {
        NamedTensor t;
        t.name = "memory.class." + std::to_string(c);
        t.dims = {static_cast<uint64_t>(mem.count(c)), static_cast<uint64_t>(mem.dim)};
        t.data.assign(mem.store[c].begin(), mem.store[c].end());
        out.push_back(std::move(t));
    }
    return out;
}

ExemplarMemory memory_from_tensors(const std::vector<NamedTensor>& bag) {
    const auto& meta = detail::need_tensor(bag, "memory.meta");
    if (meta.data.size() != 2) throw format_error("snapshot: memory.meta must hold budget and dim");
    ExemplarMemory mem(static_cast<size_t>(meta.data[0]), static_cast<int>(meta.data[1]));
    for (int c = 0;; ++c) {
        const auto* t = detail::find_tensor(bag, "memory.class." + std::to_string(c));
        if (!t) break;
        if (t->dims.size() != 2 || static_cast<int>(t->dims[1]) != mem.dim)
            throw format_error("snapshot: memory.class." + std::to_string(c) + " has wrong shape");
        mem.store.emplace_back(t->data.begin(), t->data.end());
    }
    return mem;
}

} // namespace metacl
