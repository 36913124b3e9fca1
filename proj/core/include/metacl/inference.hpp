#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "metacl/meta.hpp"

namespace metacl {

// Stage one: per-task evidence for a continuum of samples that all share one
// (unknown) task. Each sample votes with its maximum head-block response;
// votes accumulate per block and the best block wins, lowest index on ties.
template <typename T>
int predict_task(const ModelParams<T>& p, const Matrix<T>& continuum, int tasks_seen,
                 std::vector<double>* scores_out = nullptr) {
    if (tasks_seen < 1 || tasks_seen > p.layout.tasks)
        throw validation_error("predict_task: tasks_seen=" + std::to_string(tasks_seen) + " outside [1," +
                               std::to_string(p.layout.tasks) + "]");
    const Matrix<T> probs = forward(p, continuum);
    const int u = p.layout.classes_per_task;
    std::vector<double> scores(static_cast<size_t>(tasks_seen), 0.0);
    for (int r = 0; r < probs.rows; ++r) {
        const T* pr = probs.row(r);
        for (int i = 0; i < tasks_seen; ++i) {
            T best = pr[i * u];
            for (int c = 1; c < u; ++c) best = std::max(best, pr[i * u + c]);
            scores[i] += static_cast<double>(best);
        }
    }
    int arg = 0;
    for (int i = 1; i < tasks_seen; ++i)
        if (scores[i] > scores[arg]) arg = i; // strict: ties keep the lowest index
    if (scores_out) *scores_out = std::move(scores);
    return arg;
}

struct AdaptConfig {
    int epochs = 1;    // passes over the task's exemplars
    int batch = 0;     // rows per step; 0 = all exemplars in one step
    double lr = 0.01;
    Optimizer opt = Optimizer::sgd;
    double momentum_mu = 0.9;
};

// Stage two, part one: specialize a copy of the model to the predicted task
// using only that task's exemplars, gradients masked to the trunk and that
// task's head. Deterministic whenever batch == 0 (no sampling involved).
template <typename T>
ModelParams<T> adapt_to_task(const ModelParams<T>& base, int task, const ExemplarMemory& mem, const AdaptConfig& acfg,
                             Rng* rng = nullptr) {
    if (task < 0 || task >= base.layout.tasks)
        throw validation_error("adapt_to_task: task " + std::to_string(task) + " out of range");
    if (acfg.epochs < 1 || acfg.batch < 0 || acfg.lr <= 0.0)
        throw validation_error("adapt_to_task: epochs must be >= 1, batch >= 0, lr > 0");
    const int u = base.layout.classes_per_task;
    const int first = task * u;

    Batch all;
    size_t rows = 0;
    for (int c = first; c < first + u; ++c) rows += mem.count(c);
    if (rows == 0)
        throw validation_error("adapt_to_task: no exemplars stored for task " + std::to_string(task));
    all.x = Matrix<float>(static_cast<int>(rows), mem.dim);
    int at = 0;
    for (int c = first; c < first + u; ++c)
        for (size_t i = 0; i < mem.count(c); ++i) {
            std::copy(mem.row(c, i), mem.row(c, i) + mem.dim, all.x.row(at++));
            all.y.push_back(c);
            all.task.push_back(task);
        }

    ModelParams<T> cur = base;
    const Matrix<T> targets_all = one_hot_targets<T>(all.y, base.layout.output_dim());
    const Matrix<T> x_all = widen<T>(all.x);
    MomentumSgd<T> mom;
    mom.mu = static_cast<T>(acfg.momentum_mu);

    auto step_on = [&](const Matrix<T>& x, const Matrix<T>& targets) {
        ForwardCache<T> cache;
        const Matrix<T> probs = forward(cur, x, &cache);
        auto lg = bce_loss(probs, targets);
        Gradients<T> g = backward(cur, cache, lg.dlogits, {task});
        if (acfg.opt == Optimizer::momentum)
            mom.step(cur, g, static_cast<T>(acfg.lr));
        else
            sgd_step(cur, g, static_cast<T>(acfg.lr));
    };

    const int n = static_cast<int>(rows);
    if (acfg.batch == 0 || acfg.batch >= n) {
        for (int e = 0; e < acfg.epochs; ++e) step_on(x_all, targets_all);
        return cur;
    }

    if (!rng) throw validation_error("adapt_to_task: batch > 0 needs an rng for shuffling");
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int e = 0; e < acfg.epochs; ++e) {
        std::shuffle(order.begin(), order.end(), *rng);
        for (int start = 0; start < n; start += acfg.batch) {
            const int len = std::min(acfg.batch, n - start);
            Matrix<T> x(len, x_all.cols);
            Matrix<T> targets(len, targets_all.cols);
            for (int i = 0; i < len; ++i) {
                std::copy(x_all.row(order[start + i]), x_all.row(order[start + i]) + x_all.cols, x.row(i));
                std::copy(targets_all.row(order[start + i]), targets_all.row(order[start + i]) + targets_all.cols,
                          targets.row(i));
            }
            step_on(x, targets);
        }
    }
    return cur;
}

// Stage two, part two: per-sample argmax inside the chosen task's head
// block, reported as a global class label.
template <typename T>
std::vector<int32_t> predict_classes(const ModelParams<T>& p, const Matrix<T>& x, int task) {
    if (task < 0 || task >= p.layout.tasks)
        throw validation_error("predict_classes: task " + std::to_string(task) + " out of range");
    const Matrix<T> probs = forward(p, x);
    const int u = p.layout.classes_per_task;
    std::vector<int32_t> out(static_cast<size_t>(x.rows));
    for (int r = 0; r < probs.rows; ++r) {
        const T* pr = probs.row(r) + task * u;
        int best = 0;
        for (int c = 1; c < u; ++c)
            if (pr[c] > pr[best]) best = c;
        out[r] = static_cast<int32_t>(task * u + best);
    }
    return out;
}

enum class EvalSetting { agnostic, aware, noupdate };

inline const char* to_string(EvalSetting s) {
    switch (s) {
        case EvalSetting::agnostic: return "task-agnostic";
        case EvalSetting::aware: return "task-aware";
        case EvalSetting::noupdate: return "no-update";
    }
    return "?";
}

inline EvalSetting eval_setting_from_string(const std::string& s) {
    if (s == "task-agnostic" || s == "agnostic") return EvalSetting::agnostic;
    if (s == "task-aware" || s == "aware") return EvalSetting::aware;
    if (s == "no-update" || s == "noupdate") return EvalSetting::noupdate;
    throw validation_error("unknown eval setting '" + s + "' (want task-agnostic|task-aware|no-update)");
}

struct EvalConfig {
    int continuum_size = 20; // test samples grouped per task-prediction vote
    AdaptConfig adapt;
    int threads = 1;
};

struct EvalResult {
    EvalSetting setting = EvalSetting::agnostic;
    int tasks_seen = 0;
    int total_continua = 0;
    int task_correct = 0;
    std::vector<double> per_task_acc;
    long long samples = 0;
    long long class_correct = 0;

    double task_accuracy() const { return total_continua > 0 ? static_cast<double>(task_correct) / total_continua : 0.0; }
    double class_accuracy() const { return samples > 0 ? static_cast<double>(class_correct) / samples : 0.0; }
    double avg_accuracy() const {
        if (per_task_acc.empty()) return 0.0;
        double s = 0.0;
        for (double a : per_task_acc) s += a;
        return s / static_cast<double>(per_task_acc.size());
    }
};

// Sweep the held-out data of every task seen so far. Each task's test set is
// cut into ceil(n/p) consecutive continua; every continuum gets a task vote
// (except in the `aware` setting, where the true task is granted), the model
// is specialized to that task from exemplars (skipped in `noupdate`), and
// samples are scored on the final class prediction. Deterministic-adaptation
// runs (adapt.batch == 0) share one adapted model per task.
template <typename T>
EvalResult evaluate_stream(const ModelParams<T>& model, const TaskStream& stream, const ExemplarMemory& mem,
                           int tasks_seen, EvalSetting setting, const EvalConfig& ecfg, Rng& rng) {
    if (tasks_seen < 1 || tasks_seen > stream.tasks)
        throw validation_error("evaluate_stream: tasks_seen outside [1,tasks]");
    if (ecfg.continuum_size < 1) throw validation_error("evaluate_stream: continuum_size must be >= 1");

    EvalResult res;
    res.setting = setting;
    res.tasks_seen = tasks_seen;
    res.per_task_acc.assign(static_cast<size_t>(tasks_seen), 0.0);

    const bool adapts = setting != EvalSetting::noupdate;
    const bool cacheable = adapts && ecfg.adapt.batch == 0;
    const uint64_t eval_seed = rng();

    // With deterministic adaptation every continuum that votes for task t
    // sees the same specialized model, so build each one once.
    std::vector<ModelParams<T>> adapted;
    if (cacheable) {
        adapted.assign(static_cast<size_t>(tasks_seen), ModelParams<T>{});
        detail::parallel_over(tasks_seen, ecfg.threads, [&](int t) {
            adapted[t] = adapt_to_task(model, t, mem, ecfg.adapt, nullptr);
        });
    }

    struct TaskTally {
        int continua = 0, task_hits = 0;
        long long samples = 0, hits = 0;
    };
    std::vector<TaskTally> tally(static_cast<size_t>(tasks_seen));

    detail::parallel_over(tasks_seen, ecfg.threads, [&](int m) {
        const Dataset& test = stream.test[m];
        const int p = ecfg.continuum_size;
        const int n = static_cast<int>(test.size());
        for (int start = 0, idx = 0; start < n; start += p, ++idx) {
            const int len = std::min(p, n - start);
            Matrix<T> x(len, test.dim);
            for (int i = 0; i < len; ++i) {
                const float* r = test.row(static_cast<size_t>(start + i));
                for (int j = 0; j < test.dim; ++j) x.at(i, j) = static_cast<T>(r[j]);
            }
            int t_used = m;
            if (setting != EvalSetting::aware) t_used = predict_task(model, x, tasks_seen);
            ++tally[m].continua;
            if (t_used == m) ++tally[m].task_hits;

            const ModelParams<T>* cls = &model;
            ModelParams<T> scratch;
            if (adapts) {
                if (cacheable) {
                    cls = &adapted[t_used];
                } else {
                    Rng local(splitmix64(eval_seed ^ (static_cast<uint64_t>(m) << 32 | static_cast<uint64_t>(idx))));
                    scratch = adapt_to_task(model, t_used, mem, ecfg.adapt, &local);
                    cls = &scratch;
                }
            }
            const auto preds = predict_classes(*cls, x, t_used);
            for (int i = 0; i < len; ++i) {
                ++tally[m].samples;
                if (preds[i] == test.y[static_cast<size_t>(start + i)]) ++tally[m].hits;
            }
        }
    });

    for (int m = 0; m < tasks_seen; ++m) {
        res.total_continua += tally[m].continua;
        res.task_correct += setting == EvalSetting::aware ? tally[m].continua : tally[m].task_hits;
        res.samples += tally[m].samples;
        res.class_correct += tally[m].hits;
        res.per_task_acc[m] = tally[m].samples > 0 ? static_cast<double>(tally[m].hits) / tally[m].samples : 0.0;
    }
    return res;
}

} // namespace metacl
