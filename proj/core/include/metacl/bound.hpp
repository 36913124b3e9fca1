#pragma once

#include <cstdint>
#include <optional>

#include "metacl/errors.hpp"

namespace metacl {

// Probability that one sample's maximum response lands in the correct task
// block, given per-sample class accuracy p0 over u*t classes: a correct
// class prediction always hits the right block, a wrong one still does with
// chance (u-1)/(u*t-1). `truncated` drops the first term (the literal
// pseudocode reading) and exists only for comparison.
enum class PhatForm { full, truncated };

double task_hit_prob(double p0, int classes_per_task, int tasks, PhatForm form = PhatForm::full);

// Probability that the correct task collects at least round(n/t)+1 of the n
// independent per-sample votes. Exact binomial tail; one task always wins.
// Not monotone in n: the tail rises until the vote threshold jumps, then
// dips, so minimization below must scan rather than bisect.
double continuum_success_prob(int n, int tasks, double p_hat);

struct BoundQuery {
    double p0 = 0.9;
    int classes_per_task = 2;
    int tasks = 2;
    double gamma = 0.95;
    PhatForm form = PhatForm::full;

    void validate() const;
};

struct BoundResult {
    std::optional<int> n; // smallest n with success prob strictly above gamma
    double p_hat = 0.0;
    double prob_at_n = 0.0; // success prob at n (or the best seen if unreachable)
    int best_n = 0;
    double best_prob = 0.0;
};

BoundResult min_continuum_size(const BoundQuery& q, int n_max = 100000);

// Simulation of the same vote event, for cross-checking the closed form:
// count n Bernoulli(p_hat) hits, success iff count >= round(n/t)+1.
double monte_carlo_success(int n, int tasks, double p_hat, int trials, uint64_t seed);

} // namespace metacl
