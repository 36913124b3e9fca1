#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "metacl/matrix.hpp"
#include "metacl/rng.hpp"

namespace metacl {

enum class Activation { relu, tanh, sigmoid, identity };

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
        case Activation::identity: return "identity";
    }
    return "?";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "identity") return Activation::identity;
    throw validation_error("unknown activation '" + s + "' (want relu|tanh|sigmoid|identity)");
}

// One fully connected layer. w is stored input x output so the forward
// product, the weight gradient and the backward delta all stream over
// contiguous rows.
template <typename T>
struct DenseLayer {
    Matrix<T> w; // in x out
    Matrix<T> b; // 1 x out
};

// A per-task classification head: `classes_per_task` sigmoid units on top of
// the shared trunk feature. Same storage convention as DenseLayer.
template <typename T>
struct HeadBlock {
    Matrix<T> w; // feature_dim x classes_per_task
    Matrix<T> b; // 1 x classes_per_task
};

struct ModelLayout {
    int input_dim = 0;
    std::vector<int> hidden;
    int tasks = 0;           // number of head blocks
    int classes_per_task = 0;
    Activation act = Activation::relu;

    int feature_dim() const { return hidden.empty() ? input_dim : hidden.back(); }
    int output_dim() const { return tasks * classes_per_task; }

    void validate() const {
        if (input_dim < 1) throw validation_error("layout: input_dim must be >= 1");
        if (tasks < 1) throw validation_error("layout: tasks must be >= 1");
        if (classes_per_task < 1) throw validation_error("layout: classes_per_task must be >= 1");
        for (int h : hidden)
            if (h < 1) throw validation_error("layout: hidden widths must be >= 1");
    }

    bool operator==(const ModelLayout& o) const {
        return input_dim == o.input_dim && hidden == o.hidden && tasks == o.tasks &&
               classes_per_task == o.classes_per_task && act == o.act;
    }
};

// Full parameter set: shared trunk theta plus one head block per task.
template <typename T>
struct ModelParams {
    ModelLayout layout;
    std::vector<DenseLayer<T>> theta;
    std::vector<HeadBlock<T>> phi;

    static ModelParams init(const ModelLayout& layout, Rng& rng) {
        layout.validate();
        ModelParams p;
        p.layout = layout;
        int in = layout.input_dim;
        for (int h : layout.hidden) {
            p.theta.push_back({uniform_fan_in(in, h, rng), Matrix<T>(1, h)});
            in = h;
        }
        for (int i = 0; i < layout.tasks; ++i)
            p.phi.push_back({uniform_fan_in(in, layout.classes_per_task, rng), Matrix<T>(1, layout.classes_per_task)});
        return p;
    }

    // Flat tensor view in a fixed order (trunk w/b pairs, then head w/b
    // pairs). The meta update, the snapshot writer and the lemma checks all
    // walk this list so they stay structurally in lockstep.
    std::vector<Matrix<T>*> tensors() {
        std::vector<Matrix<T>*> out;
        for (auto& l : theta) { out.push_back(&l.w); out.push_back(&l.b); }
        for (auto& h : phi) { out.push_back(&h.w); out.push_back(&h.b); }
        return out;
    }
    std::vector<const Matrix<T>*> tensors() const {
        std::vector<const Matrix<T>*> out;
        for (auto& l : theta) { out.push_back(&l.w); out.push_back(&l.b); }
        for (auto& h : phi) { out.push_back(&h.w); out.push_back(&h.b); }
        return out;
    }
    std::vector<std::string> tensor_names() const {
        std::vector<std::string> out;
        for (size_t l = 0; l < theta.size(); ++l) {
            out.push_back("theta." + std::to_string(l) + ".w");
            out.push_back("theta." + std::to_string(l) + ".b");
        }
        for (size_t h = 0; h < phi.size(); ++h) {
            out.push_back("phi." + std::to_string(h) + ".w");
            out.push_back("phi." + std::to_string(h) + ".b");
        }
        return out;
    }

  private:
    static Matrix<T> uniform_fan_in(int in, int out, Rng& rng) {
        Matrix<T> m(in, out);
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& v : m.data) v = static_cast<T>(dist(rng));
        return m;
    }
};

// Gradient bag mirroring ModelParams tensor for tensor. head_active records
// which head blocks actually carry gradient; inactive blocks are bitwise
// zero and the optimizer must leave their parameters untouched.
template <typename T>
struct Gradients {
    std::vector<DenseLayer<T>> theta;
    std::vector<HeadBlock<T>> phi;
    std::vector<uint8_t> head_active;

    static Gradients zeros_like(const ModelParams<T>& p) {
        Gradients g;
        for (const auto& l : p.theta)
            g.theta.push_back({Matrix<T>(l.w.rows, l.w.cols), Matrix<T>(1, l.b.cols)});
        for (const auto& h : p.phi)
            g.phi.push_back({Matrix<T>(h.w.rows, h.w.cols), Matrix<T>(1, h.b.cols)});
        g.head_active.assign(p.phi.size(), 0);
        return g;
    }

    std::vector<Matrix<T>*> tensors() {
        std::vector<Matrix<T>*> out;
        for (auto& l : theta) { out.push_back(&l.w); out.push_back(&l.b); }
        for (auto& h : phi) { out.push_back(&h.w); out.push_back(&h.b); }
        return out;
    }
    std::vector<const Matrix<T>*> tensors() const {
        std::vector<const Matrix<T>*> out;
        for (auto& l : theta) { out.push_back(&l.w); out.push_back(&l.b); }
        for (auto& h : phi) { out.push_back(&h.w); out.push_back(&h.b); }
        return out;
    }
};

// Everything backward() needs from the matching forward() call, plus a
// geometry stamp so reuse against a reshaped model is caught instead of
// silently producing garbage.
template <typename T>
struct ForwardCache {
    int batch = -1;
    ModelLayout layout;
    Matrix<T> x;
    std::vector<Matrix<T>> z; // preactivations per trunk layer
    std::vector<Matrix<T>> a; // activations per trunk layer; a.back() is the feature
    Matrix<T> logits;
};

namespace detail {

template <typename T>
inline T sigmoid(T z) {
    if (z >= T{0}) return T{1} / (T{1} + std::exp(-z));
    T e = std::exp(z);
    return e / (T{1} + e);
}

template <typename T>
inline void apply_activation(Matrix<T>& m, Activation act) {
    switch (act) {
        case Activation::relu:
            for (auto& v : m.data) v = v > T{0} ? v : T{0};
            break;
        case Activation::tanh:
            for (auto& v : m.data) v = std::tanh(v);
            break;
        case Activation::sigmoid:
            for (auto& v : m.data) v = sigmoid(v);
            break;
        case Activation::identity:
            break;
    }
}

// d(act)/dz given both the preactivation and the activation value.
template <typename T>
inline T activation_grad(T z, T a, Activation act) {
    switch (act) {
        case Activation::relu: return z > T{0} ? T{1} : T{0};
        case Activation::tanh: return T{1} - a * a;
        case Activation::sigmoid: return a * (T{1} - a);
        case Activation::identity: return T{1};
    }
    return T{0};
}

// Heads concatenated into one feature_dim x (U*tasks) matrix so the output
// layer is a single product.
template <typename T>
Matrix<T> concat_head_weights(const ModelParams<T>& p) {
    const int u = p.layout.classes_per_task;
    Matrix<T> w(p.layout.feature_dim(), p.layout.output_dim());
    for (size_t h = 0; h < p.phi.size(); ++h)
        for (int r = 0; r < w.rows; ++r)
            for (int c = 0; c < u; ++c)
                w.at(r, static_cast<int>(h) * u + c) = p.phi[h].w.at(r, c);
    return w;
}

template <typename T>
Matrix<T> concat_head_bias(const ModelParams<T>& p) {
    const int u = p.layout.classes_per_task;
    Matrix<T> b(1, p.layout.output_dim());
    for (size_t h = 0; h < p.phi.size(); ++h)
        for (int c = 0; c < u; ++c)
            b.at(0, static_cast<int>(h) * u + c) = p.phi[h].b.at(0, c);
    return b;
}

} // namespace detail

// Forward pass: trunk layers with the configured activation, then every head
// block, then an elementwise sigmoid. Returns per-class probabilities in
// (0, 1), batch x (U*tasks).
template <typename T>
Matrix<T> forward(const ModelParams<T>& p, const Matrix<T>& x, ForwardCache<T>* cache = nullptr) {
    if (x.rows < 1) throw validation_error("forward: empty batch");
    if (x.cols != p.layout.input_dim)
        throw shape_error("forward: input is " + x.shape_str() + " but model wants cols=" +
                          std::to_string(p.layout.input_dim));
    Matrix<T> cur = x;
    std::vector<Matrix<T>> zs, as;
    for (const auto& l : p.theta) {
        Matrix<T> z = matmul(cur, l.w);
        add_row_inplace(z, l.b);
        Matrix<T> a = z;
        detail::apply_activation(a, p.layout.act);
        if (cache) { zs.push_back(std::move(z)); as.push_back(a); }
        cur = std::move(a);
    }
    Matrix<T> w_all = detail::concat_head_weights(p);
    Matrix<T> logits = matmul(cur, w_all);
    add_row_inplace(logits, detail::concat_head_bias(p));
    Matrix<T> probs = logits;
    for (auto& v : probs.data) v = detail::sigmoid(v);
    if (cache) {
        cache->batch = x.rows;
        cache->layout = p.layout;
        cache->x = x;
        cache->z = std::move(zs);
        cache->a = std::move(as);
        cache->logits = std::move(logits);
    }
    return probs;
}

// Binary cross-entropy summed over all U*tasks outputs, averaged over the
// batch. Probabilities are clamped to [eps, 1-eps] before the logs so the
// reported loss stays finite; the returned d(loss)/d(logits) is always
// (p - y)/batch, the exact sigmoid+BCE gradient. Keeping the gradient
// unclamped matters: zeroing it outside the clamp window would turn a
// saturated-wrong output into a permanent trap that no later training or
// adaptation step could pull back.
template <typename T>
struct LossGrad {
    double loss = 0.0;
    Matrix<T> dlogits;
};

template <typename T>
LossGrad<T> bce_loss(const Matrix<T>& probs, const Matrix<T>& targets) {
    if (!probs.same_shape(targets))
        throw shape_error("bce_loss: probs " + probs.shape_str() + " vs targets " + targets.shape_str());
    if (probs.rows < 1) throw validation_error("bce_loss: empty batch");
    const T eps = static_cast<T>(1e-7);
    const T lo = eps, hi = T{1} - eps;
    LossGrad<T> out;
    out.dlogits = Matrix<T>(probs.rows, probs.cols);
    double loss = 0.0;
    const T inv_b = T{1} / static_cast<T>(probs.rows);
    for (size_t i = 0; i < probs.data.size(); ++i) {
        const T y = targets.data[i];
        if (y != T{0} && y != T{1})
            throw validation_error("bce_loss: target entry " + std::to_string(i) + " is not 0/1");
        const T praw = probs.data[i];
        const T pc = praw < lo ? lo : (praw > hi ? hi : praw);
        loss -= static_cast<double>(y) * std::log(static_cast<double>(pc)) +
                (1.0 - static_cast<double>(y)) * std::log(1.0 - static_cast<double>(pc));
        out.dlogits.data[i] = (praw - y) * inv_b;
    }
    out.loss = loss / probs.rows;
    return out;
}

// Backprop of dlogits through the heads and the trunk. The loss itself covers
// the full output vector, so the trunk gradient collects contributions from
// every head block; the mask only selects which head blocks report gradient.
// Blocks outside active_heads come back bitwise zero with head_active = 0.
template <typename T>
Gradients<T> backward(const ModelParams<T>& p, const ForwardCache<T>& cache, const Matrix<T>& dlogits,
                      const std::vector<int>& active_heads) {
    if (!(cache.layout == p.layout))
        throw consistency_error("backward: cache was built for a different model geometry");
    if (cache.batch != dlogits.rows || dlogits.cols != p.layout.output_dim())
        throw consistency_error("backward: dlogits " + dlogits.shape_str() + " does not match cached batch=" +
                                std::to_string(cache.batch) + ", outputs=" + std::to_string(p.layout.output_dim()));
    if (cache.a.size() != p.theta.size())
        throw consistency_error("backward: cache layer count disagrees with model");

    Gradients<T> g = Gradients<T>::zeros_like(p);
    const int u = p.layout.classes_per_task;
    for (int h : active_heads) {
        if (h < 0 || h >= static_cast<int>(p.phi.size()))
            throw validation_error("backward: active head " + std::to_string(h) + " out of range");
        g.head_active[h] = 1;
    }

    const Matrix<T>& feature = p.theta.empty() ? cache.x : cache.a.back();
    Matrix<T> dw_all = matmul_t1(feature, dlogits);
    Matrix<T> db_all = col_sums(dlogits);
    for (size_t h = 0; h < p.phi.size(); ++h) {
        if (!g.head_active[h]) continue;
        for (int r = 0; r < dw_all.rows; ++r)
            for (int c = 0; c < u; ++c)
                g.phi[h].w.at(r, c) = dw_all.at(r, static_cast<int>(h) * u + c);
        for (int c = 0; c < u; ++c)
            g.phi[h].b.at(0, c) = db_all.at(0, static_cast<int>(h) * u + c);
    }

    Matrix<T> w_all = detail::concat_head_weights(p);
    Matrix<T> d = matmul_t2(dlogits, w_all); // batch x feature_dim

    for (int l = static_cast<int>(p.theta.size()) - 1; l >= 0; --l) {
        Matrix<T>& dz = d;
        for (size_t i = 0; i < dz.data.size(); ++i)
            dz.data[i] *= detail::activation_grad(cache.z[l].data[i], cache.a[l].data[i], p.layout.act);
        const Matrix<T>& below = (l == 0) ? cache.x : cache.a[l - 1];
        g.theta[l].w = matmul_t1(below, dz);
        g.theta[l].b = col_sums(dz);
        if (l > 0) d = matmul_t2(dz, p.theta[l].w);
    }
    return g;
}

// Plain SGD. Head blocks whose mask is off are left bitwise untouched.
// Non-finite gradient entries abort with the offending tensor named.
template <typename T>
void sgd_step(ModelParams<T>& p, const Gradients<T>& g, T lr) {
    if (g.theta.size() != p.theta.size() || g.phi.size() != p.phi.size())
        throw consistency_error("sgd_step: gradient structure does not match model");
    for (size_t l = 0; l < p.theta.size(); ++l) {
        if (!all_finite(g.theta[l].w) || !all_finite(g.theta[l].b))
            throw numeric_error("sgd_step: non-finite gradient in theta." + std::to_string(l));
        axpy_inplace(p.theta[l].w, -lr, g.theta[l].w);
        axpy_inplace(p.theta[l].b, -lr, g.theta[l].b);
    }
    for (size_t h = 0; h < p.phi.size(); ++h) {
        if (!g.head_active[h]) continue;
        if (!all_finite(g.phi[h].w) || !all_finite(g.phi[h].b))
            throw numeric_error("sgd_step: non-finite gradient in phi." + std::to_string(h));
        axpy_inplace(p.phi[h].w, -lr, g.phi[h].w);
        axpy_inplace(p.phi[h].b, -lr, g.phi[h].b);
    }
}

// SGD with classical momentum: v <- mu*v + g, p <- p - lr*v. Velocity for a
// masked-off head block is neither read nor written, so masked blocks stay
// bitwise untouched just like plain SGD.
template <typename T>
struct MomentumSgd {
    T mu = static_cast<T>(0.9);
    bool ready = false;
    Gradients<T> vel;

    void step(ModelParams<T>& p, const Gradients<T>& g, T lr) {
        if (!ready) {
            vel = Gradients<T>::zeros_like(p);
            ready = true;
        }
        if (vel.theta.size() != g.theta.size() || vel.phi.size() != g.phi.size())
            throw consistency_error("momentum: velocity structure does not match gradients");
        Gradients<T> step_g = Gradients<T>::zeros_like(p);
        step_g.head_active = g.head_active;
        for (size_t l = 0; l < g.theta.size(); ++l) {
            update_vel(vel.theta[l].w, g.theta[l].w);
            update_vel(vel.theta[l].b, g.theta[l].b);
            step_g.theta[l] = vel.theta[l];
        }
        for (size_t h = 0; h < g.phi.size(); ++h) {
            if (!g.head_active[h]) continue;
            update_vel(vel.phi[h].w, g.phi[h].w);
            update_vel(vel.phi[h].b, g.phi[h].b);
            step_g.phi[h] = vel.phi[h];
        }
        sgd_step(p, step_g, lr);
    }

  private:
    void update_vel(Matrix<T>& v, const Matrix<T>& g) {
        scale_inplace(v, mu);
        axpy_inplace(v, T{1}, g);
    }
};

enum class Optimizer { sgd, momentum };

inline Optimizer optimizer_from_string(const std::string& s) {
    if (s == "sgd") return Optimizer::sgd;
    if (s == "momentum") return Optimizer::momentum;
    throw validation_error("unknown optimizer '" + s + "' (want sgd|momentum)");
}

} // namespace metacl
