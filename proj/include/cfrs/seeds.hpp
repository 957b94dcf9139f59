#pragma once

#include <algorithm>
#include <cstdio>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "cfrs/instance.hpp"
#include "cfrs/routing.hpp"

namespace cfrs {

// K geographic anchor customers plus the scores that selected them.
// `anchor_indices` are 1-based customer indices, pairwise distinct, never
// the depot. When the candidate pool drains before k anchors are found,
// `shortfall` reports how many are missing (anchors are never padded).
struct SeedSet {
    std::vector<int> anchor_indices;
    int k = 0;  // anchors actually selected; fleet size used downstream
    std::vector<double> scores;
    int shortfall = 0;
};

// Depot distance as seediness: peripheral customers make good anchors.
inline std::vector<double> seed_scores(const Instance& inst) {
    std::vector<double> scores(inst.n());
    for (int i = 1; i <= inst.n(); ++i) scores[i - 1] = distance(inst.customer(i), inst.depot());
    return scores;
}

// Negative pairwise distance; the diagonal stays 0 (self-similarity is
// never consulted because a seed leaves the pool before packing).
inline Eigen::MatrixXd default_similarity(const Instance& inst) {
    const int n = inst.n();
    Eigen::MatrixXd sim = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i <= n; ++i)
        for (int j = i + 1; j <= n; ++j) {
            const double s = -distance(inst.customer(i), inst.customer(j));
            sim(i - 1, j - 1) = s;
            sim(j - 1, i - 1) = s;
        }
    return sim;
}

// Greedy anchor selection with a dispersion prior: pick the best-scoring
// unassigned customer as a seed, then fill its vehicle with the most
// similar unassigned customers until capacity is exhausted, removing them
// from the pool so the next seed lands in a different region. Ties in
// score or similarity break toward the lowest customer index.
inline SeedSet capacity_aware_greedy_decode(const Instance& inst, const std::vector<double>& scores,
                                            const Eigen::MatrixXd& similarity, int k) {
    const int n = inst.n();
    if (k < 1) throw std::invalid_argument("capacity_aware_greedy_decode: k must be >= 1");
    if (static_cast<int>(scores.size()) != n)
        throw std::invalid_argument("capacity_aware_greedy_decode: scores must have length N");
    if (similarity.rows() != n || similarity.cols() != n)
        throw std::invalid_argument("capacity_aware_greedy_decode: similarity must be NxN");

    std::vector<bool> unassigned(n + 1, true);
    SeedSet result;
    result.scores = scores;

    for (int round = 0; round < k; ++round) {
        int best = -1;
        for (int i = 1; i <= n; ++i) {
            if (!unassigned[i]) continue;
            if (best == -1 || scores[i - 1] > scores[best - 1]) best = i;
        }
        if (best == -1) break;  // pool exhausted

        result.anchor_indices.push_back(best);
        unassigned[best] = false;
        int load = inst.demand(best);

        // Remaining pool in descending similarity to the seed.
        std::vector<int> order;
        for (int j = 1; j <= n; ++j)
            if (unassigned[j]) order.push_back(j);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return similarity(best - 1, a - 1) > similarity(best - 1, b - 1);
        });
        for (int j : order) {
            if (load + inst.demand(j) <= inst.capacity) {
                load += inst.demand(j);
                unassigned[j] = false;
            }
        }
    }

    result.k = static_cast<int>(result.anchor_indices.size());
    result.shortfall = k - result.k;
    return result;
}

inline SeedSet select_seeds(const Instance& inst, int k) {
    return capacity_aware_greedy_decode(inst, seed_scores(inst), default_similarity(inst), k);
}

// Label extraction from a feasible solution: per route, the m customers
// farthest from the depot (all of them when the route is shorter). Routes
// without customers are skipped with a warning.
inline std::vector<std::vector<int>> ground_truth_seeds(const Solution& solution,
                                                        const Instance& inst, int m) {
    if (m < 1) throw std::invalid_argument("ground_truth_seeds: m must be >= 1");
    std::vector<std::vector<int>> out;
    for (const auto& tour : solution.tours) {
        if (tour.customers.empty()) {
            std::fprintf(stderr, "ground_truth_seeds: skipping route with no customers\n");
            continue;
        }
        std::vector<int> ranked = tour.customers;  // sorted ascending, so ties
                                                   // resolve to the lowest index
        std::stable_sort(ranked.begin(), ranked.end(), [&](int a, int b) {
            return distance(inst.customer(a), inst.depot()) > distance(inst.customer(b), inst.depot());
        });
        if (static_cast<int>(ranked.size()) > m) ranked.resize(m);
        out.push_back(std::move(ranked));
    }
    return out;
}

}  // namespace cfrs
