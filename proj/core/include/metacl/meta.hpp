#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "metacl/batch.hpp"
#include "metacl/dataset.hpp"
#include "metacl/memory.hpp"
#include "metacl/nn.hpp"

namespace metacl {

enum class Method { itaml, joint, reptile, fomaml };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::itaml: return "itaml";
        case Method::joint: return "joint";
        case Method::reptile: return "reptile";
        case Method::fomaml: return "fomaml";
    }
    return "?";
}

inline Method method_from_string(const std::string& s) {
    if (s == "itaml") return Method::itaml;
    if (s == "joint") return Method::joint;
    if (s == "reptile") return Method::reptile;
    if (s == "fomaml") return Method::fomaml;
    throw validation_error("unknown method '" + s + "' (want itaml|joint|reptile|fomaml)");
}

// How the outer-update weight decays as tasks accumulate. `ratio` is
// exp(-beta * t/T): early tasks lean on the task-model average, late tasks
// preserve the base. `constant` pins exp(-beta) independent of progress.
enum class ControllerForm { ratio, constant };

inline ControllerForm controller_from_string(const std::string& s) {
    if (s == "ratio") return ControllerForm::ratio;
    if (s == "constant") return ControllerForm::constant;
    throw validation_error("unknown controller '" + s + "' (want ratio|constant)");
}

inline double controller_eta(int t, int total_tasks, double beta, ControllerForm form = ControllerForm::ratio) {
    if (total_tasks < 1) throw validation_error("controller_eta: total_tasks must be >= 1");
    if (t < 1 || t > total_tasks)
        throw validation_error("controller_eta: t=" + std::to_string(t) + " outside [1," + std::to_string(total_tasks) + "]");
    if (beta < 0.0) throw validation_error("controller_eta: beta must be >= 0");
    if (form == ControllerForm::constant) return std::exp(-beta);
    return std::exp(-beta * static_cast<double>(t) / static_cast<double>(total_tasks));
}

struct MetaConfig {
    int total_tasks = 0;      // T, fixed for the whole stream
    int classes_per_task = 0; // U
    int inner_steps = 1;      // r
    std::map<int, int> inner_steps_override; // per-task r
    double beta = 1.0;
    ControllerForm controller = ControllerForm::ratio;
    double lr = 0.01; // inner learning rate alpha
    double lr_decay = 0.2;
    std::vector<int> lr_drops; // epochs at which lr multiplies by lr_decay
    int epochs = 15;
    int batch_size = 128;
    int iters_per_epoch = 0; // 0: ceil(|task data + memory| / batch_size)
    Optimizer opt = Optimizer::sgd;
    double momentum_mu = 0.9;
    double reptile_outer_lr = 1.0;
    double fomaml_outer_lr = 0.0; // 0: reuse lr
    int threads = 1;

    int steps_for_task(int task) const {
        auto it = inner_steps_override.find(task);
        return it == inner_steps_override.end() ? inner_steps : it->second;
    }

    double alpha_for_epoch(int epoch) const {
        double a = lr;
        for (int d : lr_drops)
            if (epoch >= d) a *= lr_decay;
        return a;
    }

    void validate() const {
        if (total_tasks < 1 || classes_per_task < 1)
            throw validation_error("config: total_tasks and classes_per_task must be >= 1");
        if (inner_steps < 1) throw validation_error("config: inner_steps must be >= 1");
        for (auto& [t, r] : inner_steps_override)
            if (t < 0 || r < 1) throw validation_error("config: bad inner_steps override");
        if (epochs < 1 || batch_size < 1) throw validation_error("config: epochs and batch_size must be >= 1");
        if (lr <= 0.0) throw validation_error("config: lr must be > 0");
        if (threads < 1) throw validation_error("config: threads must be >= 1");
    }
};

// r optimizer steps on one micro-batch, gradients masked to the trunk and
// the micro-batch's own head. The base model is copied, never touched. The
// same micro-batch is reused for every step; the applied gradients come back
// with the adapted model so callers can check the accumulated-gradient
// identity.
template <typename T>
struct InnerResult {
    ModelParams<T> params;
    std::vector<Gradients<T>> step_grads;
    double last_loss = 0.0;
};

template <typename T>
InnerResult<T> inner_loop(const ModelParams<T>& base, const Batch& micro, int task, int r, T alpha,
                          Optimizer opt = Optimizer::sgd, T momentum_mu = static_cast<T>(0.9)) {
    if (r < 1) throw validation_error("inner_loop: r must be >= 1");
    if (micro.size() < 1) throw validation_error("inner_loop: empty micro-batch");
    for (int32_t t : micro.task)
        if (t != task)
            throw validation_error("inner_loop: micro-batch contains task " + std::to_string(t) + ", expected " +
                                   std::to_string(task));

    InnerResult<T> res;
    res.params = base;
    const Matrix<T> x = widen<T>(micro.x);
    const Matrix<T> targets = one_hot_targets<T>(micro.y, base.layout.output_dim());
    MomentumSgd<T> mom;
    mom.mu = momentum_mu;
    for (int j = 0; j < r; ++j) {
        ForwardCache<T> cache;
        const Matrix<T> probs = forward(res.params, x, &cache);
        auto lg = bce_loss(probs, targets);
        res.last_loss = lg.loss;
        Gradients<T> g = backward(res.params, cache, lg.dlogits, {task});
        if (opt == Optimizer::momentum)
            mom.step(res.params, g, alpha);
        else
            sgd_step(res.params, g, alpha);
        res.step_grads.push_back(std::move(g));
    }
    return res;
}

// Phi <- eta * mean(task models) + (1 - eta) * base. The average and the
// blend run in double so the result is a true convex combination before the
// final cast.
template <typename T>
ModelParams<T> meta_update(const ModelParams<T>& base, const std::vector<ModelParams<T>>& task_models, double eta) {
    if (task_models.empty()) throw validation_error("meta_update: no task models");
    if (!(eta >= 0.0 && eta <= 1.0)) throw validation_error("meta_update: eta must be in [0,1]");
    for (const auto& m : task_models)
        if (!(m.layout == base.layout)) throw consistency_error("meta_update: task model layout differs from base");

    ModelParams<T> out = base;
    auto out_t = out.tensors();
    auto base_t = base.tensors();
    std::vector<std::vector<const Matrix<T>*>> model_t;
    for (const auto& m : task_models) model_t.push_back(m.tensors());
    const double inv_n = 1.0 / static_cast<double>(task_models.size());
    for (size_t k = 0; k < out_t.size(); ++k) {
        for (size_t i = 0; i < out_t[k]->data.size(); ++i) {
            double acc = 0.0;
            for (const auto& mt : model_t) acc += static_cast<double>(mt[k]->data[i]);
            out_t[k]->data[i] =
                static_cast<T>(eta * (acc * inv_n) + (1.0 - eta) * static_cast<double>(base_t[k]->data[i]));
        }
    }
    return out;
}

// The effective gradient an inner loop applied: (base - adapted) / alpha.
// With plain SGD this equals the sum of the per-step masked gradients
// exactly (in exact arithmetic), which is what the lemma checks exercise.
template <typename T>
Gradients<T> meta_gradient(const ModelParams<T>& base, const ModelParams<T>& adapted, T alpha) {
    if (alpha == T{0}) throw validation_error("meta_gradient: alpha must be nonzero");
    if (!(base.layout == adapted.layout)) throw consistency_error("meta_gradient: layouts differ");
    Gradients<T> g = Gradients<T>::zeros_like(base);
    g.head_active.assign(base.phi.size(), 1);
    auto gt = g.tensors();
    auto bt = base.tensors();
    auto at = adapted.tensors();
    const T inv = T{1} / alpha;
    for (size_t k = 0; k < gt.size(); ++k)
        for (size_t i = 0; i < gt[k]->data.size(); ++i)
            gt[k]->data[i] = (bt[k]->data[i] - at[k]->data[i]) * inv;
    return g;
}

template <typename T>
Gradients<T> sum_gradients(const std::vector<Gradients<T>>& gs) {
    if (gs.empty()) throw validation_error("sum_gradients: empty list");
    Gradients<T> acc = gs.front();
    for (size_t n = 1; n < gs.size(); ++n) {
        auto at = acc.tensors();
        auto bt = gs[n].tensors();
        if (at.size() != bt.size()) throw consistency_error("sum_gradients: structure mismatch");
        for (size_t k = 0; k < at.size(); ++k) axpy_inplace(*at[k], T{1}, *bt[k]);
        for (size_t h = 0; h < acc.head_active.size(); ++h) acc.head_active[h] |= gs[n].head_active[h];
    }
    return acc;
}

// Largest elementwise deviation plus where it lives, for diagnostics that
// must name the offending coordinate.
struct Deviation {
    double value = 0.0;
    size_t tensor = 0; // index into the tensors() ordering
    size_t index = 0;  // flat offset within that tensor
};

template <typename T>
Deviation max_abs_deviation(const Gradients<T>& a, const Gradients<T>& b) {
    auto at = a.tensors();
    auto bt = b.tensors();
    if (at.size() != bt.size()) throw consistency_error("max_abs_deviation: structure mismatch");
    Deviation best;
    for (size_t k = 0; k < at.size(); ++k) {
        if (!at[k]->same_shape(*bt[k])) throw consistency_error("max_abs_deviation: tensor shapes differ");
        for (size_t i = 0; i < at[k]->data.size(); ++i) {
            const double d = std::abs(static_cast<double>(at[k]->data[i]) - static_cast<double>(bt[k]->data[i]));
            if (d > best.value) best = {d, k, i};
        }
    }
    return best;
}

template <typename T>
double max_abs_diff(const Gradients<T>& a, const Gradients<T>& b) {
    return max_abs_deviation(a, b).value;
}

namespace detail {

// Contiguous near-even split into at most r non-empty chunks.
inline std::vector<Batch> split_chunks(const Batch& b, int r) {
    const int n = b.size();
    const int parts = std::min(r, n);
    std::vector<Batch> out;
    out.reserve(static_cast<size_t>(parts));
    int start = 0;
    for (int c = 0; c < parts; ++c) {
        const int len = n / parts + (c < n % parts ? 1 : 0);
        Batch chunk;
        chunk.x = Matrix<float>(len, b.x.cols);
        for (int i = 0; i < len; ++i) {
            std::copy(b.x.row(start + i), b.x.row(start + i) + b.x.cols, chunk.x.row(i));
            chunk.y.push_back(b.y[start + i]);
            chunk.task.push_back(b.task[start + i]);
        }
        start += len;
        out.push_back(std::move(chunk));
    }
    return out;
}

// One unmasked optimizer step on a batch; every head carries gradient.
template <typename T>
Gradients<T> full_gradient(const ModelParams<T>& p, const Batch& b, double* loss_out = nullptr) {
    const Matrix<T> x = widen<T>(b.x);
    const Matrix<T> targets = one_hot_targets<T>(b.y, p.layout.output_dim());
    ForwardCache<T> cache;
    const Matrix<T> probs = forward(p, x, &cache);
    auto lg = bce_loss(probs, targets);
    if (loss_out) *loss_out = lg.loss;
    std::vector<int> all_heads(p.phi.size());
    for (size_t h = 0; h < p.phi.size(); ++h) all_heads[h] = static_cast<int>(h);
    return backward(p, cache, lg.dlogits, all_heads);
}

inline void parallel_over(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    const int workers = std::min(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (int i = w; i < n; i += workers) fn(i);
        });
    for (auto& t : pool) t.join();
}

} // namespace detail

// One joint step: unmasked gradient of the full-batch loss, applied once.
template <typename T>
void baseline_joint_step(ModelParams<T>& p, const Batch& b, T alpha, double* loss_out = nullptr) {
    if (b.size() < 1) throw validation_error("joint step: empty batch");
    Gradients<T> g = detail::full_gradient(p, b, loss_out);
    sgd_step(p, g, alpha);
}

// Reptile-style update: per task, r unmasked SGD steps over disjoint chunks
// of its micro-batch (cycling when the chunk count falls short), then move
// the base toward the averaged task solutions. The diagnostic flag reuses
// the whole batch every step and masks gradients to the batch's own head —
// which is exactly the meta inner loop, useful for cross-checking the two
// code paths against each other.
template <typename T>
ModelParams<T> baseline_reptile_update(const ModelParams<T>& base, const std::vector<Batch>& task_batches, int r,
                                       T alpha, double outer_lr, bool diagnostic_masked_single_batch = false) {
    if (task_batches.empty()) throw validation_error("reptile: no task batches");
    if (r < 1) throw validation_error("reptile: r must be >= 1");
    std::vector<ModelParams<T>> finals;
    for (const auto& tb : task_batches) {
        if (tb.size() < 1) throw validation_error("reptile: empty task batch");
        if (diagnostic_masked_single_batch) {
            finals.push_back(inner_loop(base, tb, tb.task[0], r, alpha).params);
            continue;
        }
        const auto chunks = detail::split_chunks(tb, r);
        ModelParams<T> cur = base;
        for (int j = 0; j < r; ++j) {
            Gradients<T> g = detail::full_gradient(cur, chunks[j % chunks.size()], nullptr);
            sgd_step(cur, g, alpha);
        }
        finals.push_back(std::move(cur));
    }
    ModelParams<T> out = base;
    auto out_t = out.tensors();
    auto base_t = base.tensors();
    std::vector<std::vector<const Matrix<T>*>> fin_t;
    for (const auto& f : finals) fin_t.push_back(f.tensors());
    const double inv_n = 1.0 / static_cast<double>(finals.size());
    for (size_t k = 0; k < out_t.size(); ++k)
        for (size_t i = 0; i < out_t[k]->data.size(); ++i) {
            double delta = 0.0;
            for (const auto& ft : fin_t)
                delta += static_cast<double>(base_t[k]->data[i]) - static_cast<double>(ft[k]->data[i]);
            out_t[k]->data[i] = static_cast<T>(static_cast<double>(base_t[k]->data[i]) - outer_lr * delta * inv_n);
        }
    return out;
}

// First-order MAML-style update: per task, r-1 unmasked steps on the leading
// chunks, then the gradient on the held-out last chunk at the adapted point;
// task gradients are averaged and applied to the base in one outer step.
template <typename T>
ModelParams<T> baseline_fomaml_update(const ModelParams<T>& base, const std::vector<Batch>& task_batches, int r,
                                      T alpha, T outer_lr) {
    if (task_batches.empty()) throw validation_error("fomaml: no task batches");
    if (r < 1) throw validation_error("fomaml: r must be >= 1");
    Gradients<T> acc = Gradients<T>::zeros_like(base);
    acc.head_active.assign(base.phi.size(), 1);
    for (const auto& tb : task_batches) {
        if (tb.size() < 1) throw validation_error("fomaml: empty task batch");
        const auto chunks = detail::split_chunks(tb, r);
        ModelParams<T> cur = base;
        for (int j = 0; j < r - 1; ++j) {
            Gradients<T> g = detail::full_gradient(cur, chunks[j % chunks.size()], nullptr);
            sgd_step(cur, g, alpha);
        }
        Gradients<T> g = detail::full_gradient(cur, chunks[(r - 1) % chunks.size()], nullptr);
        auto at = acc.tensors();
        auto gt = g.tensors();
        for (size_t k = 0; k < at.size(); ++k) axpy_inplace(*at[k], T{1}, *gt[k]);
    }
    auto at = acc.tensors();
    const T inv_n = T{1} / static_cast<T>(task_batches.size());
    for (auto* m : at) scale_inplace(*m, inv_n);
    ModelParams<T> out = base;
    sgd_step(out, acc, outer_lr);
    return out;
}

// Mutable training state threaded through the stream.
template <typename T>
struct TrainerState {
    ModelParams<T> params;
    ExemplarMemory memory;
    int tasks_seen = 0;
    long long skipped_microbatches = 0;
    MomentumSgd<T> joint_momentum; // persistent optimizer state for the joint baseline
};

// Train one task: epochs of mini-batches over current data + memory. For the
// meta method each mini-batch is split into per-task micro-batches, adapted
// independently from the same base snapshot (possibly across threads; each
// adaptation is rng-free so the schedule cannot perturb results) and blended
// by the controller weight. Finishes by folding the task's data into the
// exemplar memory.
template <typename T>
void train_task(TrainerState<T>& state, const TaskStream& stream, int task, const MetaConfig& cfg, Method method,
                Rng& rng) {
    cfg.validate();
    if (task != state.tasks_seen)
        throw validation_error("train_task: expected task " + std::to_string(state.tasks_seen) + ", got " +
                               std::to_string(task));
    if (task >= stream.tasks) throw validation_error("train_task: task index beyond stream");
    if (stream.train[task].size() == 0) throw validation_error("train_task: task has no training data");

    const UnionView pool = make_union(stream.train[task], task, state.memory, cfg.classes_per_task);
    const int iters = cfg.iters_per_epoch > 0
                          ? cfg.iters_per_epoch
                          : static_cast<int>((pool.size() + cfg.batch_size - 1) / static_cast<size_t>(cfg.batch_size));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const T alpha = static_cast<T>(cfg.alpha_for_epoch(epoch));
        for (int iter = 0; iter < iters; ++iter) {
            const Batch mb = sample_minibatch(pool, cfg.batch_size, rng);
            switch (method) {
                case Method::itaml: {
                    const ModelParams<T> base = state.params;
                    std::vector<Batch> micros(static_cast<size_t>(task) + 1);
                    std::vector<int> live;
                    for (int i = 0; i <= task; ++i) {
                        micros[i] = filter_microbatch(mb, i);
                        if (micros[i].size() > 0)
                            live.push_back(i);
                        else
                            ++state.skipped_microbatches;
                    }
                    std::vector<ModelParams<T>> task_models(live.size());
                    std::vector<double> losses(live.size());
                    detail::parallel_over(static_cast<int>(live.size()), cfg.threads, [&](int k) {
                        auto res = inner_loop(base, micros[live[k]], live[k], cfg.steps_for_task(live[k]), alpha,
                                              cfg.opt, static_cast<T>(cfg.momentum_mu));
                        task_models[k] = std::move(res.params);
                        losses[k] = res.last_loss;
                    });
                    for (double l : losses)
                        if (!std::isfinite(l))
                            throw numeric_error("train_task: non-finite loss at task " + std::to_string(task) +
                                                " epoch " + std::to_string(epoch));
                    const double eta = controller_eta(task + 1, cfg.total_tasks, cfg.beta, cfg.controller);
                    state.params = meta_update(base, task_models, eta);
                    break;
                }
                case Method::joint: {
                    double loss = 0.0;
                    if (cfg.opt == Optimizer::momentum) {
                        Gradients<T> g = detail::full_gradient(state.params, mb, &loss);
                        state.joint_momentum.mu = static_cast<T>(cfg.momentum_mu);
                        state.joint_momentum.step(state.params, g, alpha);
                    } else {
                        baseline_joint_step(state.params, mb, alpha, &loss);
                    }
                    if (!std::isfinite(loss))
                        throw numeric_error("train_task: non-finite loss at task " + std::to_string(task));
                    break;
                }
                case Method::reptile:
                case Method::fomaml: {
                    std::vector<Batch> task_batches;
                    for (int i = 0; i <= task; ++i) {
                        Batch micro = filter_microbatch(mb, i);
                        if (micro.size() > 0)
                            task_batches.push_back(std::move(micro));
                        else
                            ++state.skipped_microbatches;
                    }
                    if (method == Method::reptile)
                        state.params = baseline_reptile_update(state.params, task_batches, cfg.inner_steps, alpha,
                                                               cfg.reptile_outer_lr);
                    else
                        state.params = baseline_fomaml_update(
                            state.params, task_batches, cfg.inner_steps, alpha,
                            static_cast<T>(cfg.fomaml_outer_lr > 0.0 ? cfg.fomaml_outer_lr : cfg.alpha_for_epoch(epoch)));
                    break;
                }
            }
        }
    }

    memory_update(state.memory, stream.train[task], task, cfg.classes_per_task, rng);
    state.tasks_seen = task + 1;
}

} // namespace metacl
