#include "metacl/bound.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "metacl/rng.hpp"

namespace metacl {

double task_hit_prob(double p0, int classes_per_task, int tasks, PhatForm form) {
    if (!(p0 >= 0.0 && p0 <= 1.0)) throw validation_error("task_hit_prob: p0 must be in [0,1]");
    if (classes_per_task < 1 || tasks < 1) throw validation_error("task_hit_prob: classes_per_task and tasks must be >= 1");
    const long long n_classes = static_cast<long long>(classes_per_task) * tasks;
    if (n_classes == 1) return 1.0;
    const double stray = (1.0 - p0) * static_cast<double>(classes_per_task - 1) / static_cast<double>(n_classes - 1);
    return form == PhatForm::full ? p0 + stray : stray;
}

namespace {

// Exact binomial row while it fits in 64 bits (C(62,31) < 2^63), log-gamma
// beyond that.
constexpr int kExactRowLimit = 62;

std::vector<uint64_t> pascal_row(int n) {
    std::vector<uint64_t> row(static_cast<size_t>(n) + 1, 1);
    for (int i = 1; i <= n; ++i) {
        row[i] = 1;
        for (int j = i - 1; j >= 1; --j) row[j] += row[j - 1];
    }
    return row;
}

double log_choose(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

} // namespace

double continuum_success_prob(int n, int tasks, double p_hat) {
    if (n < 1 || tasks < 1) throw validation_error("continuum_success_prob: n and tasks must be >= 1");
    if (!(p_hat >= 0.0 && p_hat <= 1.0)) throw validation_error("continuum_success_prob: p_hat must be in [0,1]");
    if (tasks == 1) return 1.0;

    const long long k0 = std::llround(static_cast<double>(n) / tasks) + 1;
    if (k0 > n) return 0.0;
    const double q = 1.0 - p_hat;

    double sum = 0.0;
    if (n <= kExactRowLimit) {
        const auto row = pascal_row(n);
        for (long long k = k0; k <= n; ++k)
            sum += static_cast<double>(row[static_cast<size_t>(k)]) * std::pow(p_hat, static_cast<double>(k)) *
                   std::pow(q, static_cast<double>(n - k));
    } else {
        if (p_hat == 0.0) return 0.0;
        if (p_hat == 1.0) return 1.0;
        for (long long k = k0; k <= n; ++k)
            sum += std::exp(log_choose(n, static_cast<int>(k)) + k * std::log(p_hat) + (n - k) * std::log(q));
    }
    return sum > 1.0 ? 1.0 : sum;
}

void BoundQuery::validate() const {
    if (!(p0 >= 0.0 && p0 <= 1.0)) throw validation_error("bound: p0 must be in [0,1]");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw validation_error("bound: gamma must be in [0,1)");
    if (classes_per_task < 1 || tasks < 1) throw validation_error("bound: classes_per_task and tasks must be >= 1");
}

BoundResult min_continuum_size(const BoundQuery& q, int n_max) {
    q.validate();
    if (n_max < 1) throw validation_error("bound: n_max must be >= 1");
    BoundResult res;
    res.p_hat = task_hit_prob(q.p0, q.classes_per_task, q.tasks, q.form);
    for (int n = 1; n <= n_max; ++n) {
        const double p = continuum_success_prob(n, q.tasks, res.p_hat);
        if (p > res.best_prob) {
            res.best_prob = p;
            res.best_n = n;
        }
        if (p > q.gamma) {
            res.n = n;
            res.prob_at_n = p;
            return res;
        }
    }
    res.prob_at_n = res.best_prob;
    return res;
}

double monte_carlo_success(int n, int tasks, double p_hat, int trials, uint64_t seed) {
    if (n < 1 || tasks < 1) throw validation_error("monte_carlo_success: n and tasks must be >= 1");
    if (trials < 1) throw validation_error("monte_carlo_success: trials must be >= 1");
    if (!(p_hat >= 0.0 && p_hat <= 1.0)) throw validation_error("monte_carlo_success: p_hat must be in [0,1]");
    if (tasks == 1) return 1.0;

    Rng rng = make_rng(seed, "bound-mc");
    std::bernoulli_distribution hit(p_hat);
    const long long k0 = std::llround(static_cast<double>(n) / tasks) + 1;
    long long ok = 0;
    for (int t = 0; t < trials; ++t) {
        int votes = 0;
        for (int i = 0; i < n; ++i) votes += hit(rng) ? 1 : 0;
        if (votes >= k0) ++ok;
    }
    return static_cast<double>(ok) / trials;
}

} // namespace metacl
