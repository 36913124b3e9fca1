#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "metacl/memory.hpp"
#include "metacl/nn.hpp"

namespace metacl {

// On-disk model state: "ITML" magic, a u32 version, then named tensors until
// EOF. Every tensor is {u32 name length, name bytes, u32 rank, rank u64
// dims, row-major float64 payload}; all integers and floats little-endian.
// Writing the same state twice produces identical bytes.
struct NamedTensor {
    std::string name;
    std::vector<uint64_t> dims;
    std::vector<double> data;

    uint64_t elems() const {
        uint64_t n = 1;
        for (uint64_t d : dims) n *= d;
        return n;
    }
};

constexpr uint32_t kSnapshotVersion = 1;

void write_tensors(std::ostream& out, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_tensors(std::istream& in);
void write_tensors_file(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_tensors_file(const std::string& path);

// Model <-> tensor-bag mapping. Geometry is recovered from the tensor dims;
// the activation rides in a one-element "model.meta" tensor.
template <typename T>
std::vector<NamedTensor> model_to_tensors(const ModelParams<T>& p) {
    std::vector<NamedTensor> out;
    out.push_back({"model.meta", {1}, {static_cast<double>(static_cast<int>(p.layout.act))}});
    const auto names = p.tensor_names();
    const auto tens = p.tensors();
    for (size_t k = 0; k < tens.size(); ++k) {
        NamedTensor nt;
        nt.name = names[k];
        nt.dims = {static_cast<uint64_t>(tens[k]->rows), static_cast<uint64_t>(tens[k]->cols)};
        nt.data.assign(tens[k]->data.begin(), tens[k]->data.end());
        out.push_back(std::move(nt));
    }
    return out;
}

namespace detail {
const NamedTensor* find_tensor(const std::vector<NamedTensor>& bag, const std::string& name);
const NamedTensor& need_tensor(const std::vector<NamedTensor>& bag, const std::string& name);
} // namespace detail

template <typename T>
ModelParams<T> model_from_tensors(const std::vector<NamedTensor>& bag) {
    const auto& meta = detail::need_tensor(bag, "model.meta");
    if (meta.data.size() != 1) throw format_error("snapshot: model.meta must hold exactly one value");

    ModelParams<T> p;
    p.layout.act = static_cast<Activation>(static_cast<int>(meta.data[0]));
    if (p.layout.act != Activation::relu && p.layout.act != Activation::tanh && p.layout.act != Activation::sigmoid &&
        p.layout.act != Activation::identity)
        throw format_error("snapshot: model.meta names an unknown activation");

    auto load_mat = [](const NamedTensor& nt) {
        if (nt.dims.size() != 2) throw format_error("snapshot: tensor " + nt.name + " is not rank 2");
        Matrix<T> m(static_cast<int>(nt.dims[0]), static_cast<int>(nt.dims[1]));
        for (size_t i = 0; i < nt.data.size(); ++i) m.data[i] = static_cast<T>(nt.data[i]);
        return m;
    };

    for (int l = 0;; ++l) {
        const auto* w = detail::find_tensor(bag, "theta." + std::to_string(l) + ".w");
        if (!w) break;
        const auto& b = detail::need_tensor(bag, "theta." + std::to_string(l) + ".b");
        p.theta.push_back({load_mat(*w), load_mat(b)});
    }
    for (int h = 0;; ++h) {
        const auto* w = detail::find_tensor(bag, "phi." + std::to_string(h) + ".w");
        if (!w) break;
        const auto& b = detail::need_tensor(bag, "phi." + std::to_string(h) + ".b");
        p.phi.push_back({load_mat(*w), load_mat(b)});
    }
    if (p.phi.empty()) throw format_error("snapshot: no head tensors found");

    p.layout.input_dim = p.theta.empty() ? p.phi.front().w.rows : p.theta.front().w.rows;
    for (const auto& l : p.theta) p.layout.hidden.push_back(l.w.cols);
    p.layout.tasks = static_cast<int>(p.phi.size());
    p.layout.classes_per_task = p.phi.front().w.cols;

    const int feat = p.layout.feature_dim();
    for (size_t l = 1; l < p.theta.size(); ++l)
        if (p.theta[l].w.rows != p.theta[l - 1].w.cols)
            throw format_error("snapshot: theta." + std::to_string(l) + " does not chain with the layer below");
    for (size_t h = 0; h < p.phi.size(); ++h)
        if (p.phi[h].w.rows != feat || p.phi[h].w.cols != p.layout.classes_per_task)
            throw format_error("snapshot: phi." + std::to_string(h) + " has inconsistent shape");
    return p;
}

std::vector<NamedTensor> memory_to_tensors(const ExemplarMemory& mem);
ExemplarMemory memory_from_tensors(const std::vector<NamedTensor>& bag);

} // namespace metacl
