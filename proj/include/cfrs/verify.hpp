#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "cfrs/baselines.hpp"
#include "cfrs/bench.hpp"
#include "cfrs/cap.hpp"
#include "cfrs/costs.hpp"
#include "cfrs/instance.hpp"
#include "cfrs/ot.hpp"
#include "cfrs/routing.hpp"
#include "cfrs/training.hpp"

namespace cfrs::verify {

struct CheckOutcome {
    std::string name;
    bool pass = false;
    std::string message;
    double seconds = 0.0;
};

// Random unit-square instance with integer demands.
inline Instance random_instance(Rng& rng, int n, int capacity = 50, int demand_lo = 1,
                                int demand_hi = 9, bool centered_depot = false) {
    Instance inst;
    inst.capacity = capacity;
    inst.coords.reserve(n + 1);
    for (int i = 0; i <= n; ++i) inst.coords.push_back({rng.uniform01(), rng.uniform01()});
    if (centered_depot) inst.coords[0] = {0.5, 0.5};
    inst.demands.reserve(n);
    for (int i = 0; i < n; ++i)
        inst.demands.push_back(static_cast<int>(rng.uniform_int(demand_lo, demand_hi)));
    return inst;
}

inline LatentCostMatrix random_costs(Rng& rng, int n, int k, double upper = 2.0) {
    LatentCostMatrix c;
    c.upper_bound = upper;
    c.values.resize(n, k);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j) c.values(i, j) = rng.uniform(0.0, upper);
    return c;
}

inline Isometry random_isometry(Rng& rng) {
    Isometry g;
    g.rotation_angle = rng.uniform(0.0, 6.283185307179586);
    g.reflect = rng.uniform01() < 0.5;
    g.translation = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
    return g;
}

template <typename F>
inline CheckOutcome timed_check(const std::string& name, F&& body) {
    CheckOutcome out;
    out.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        out.message = body();
        out.pass = out.message.empty();
    } catch (const std::exception& e) {
        out.pass = false;
        out.message = e.what();
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

// Branch-and-bound objective equals exhaustive enumeration on random small
// instances (both solvers see the same random cost matrix).
inline CheckOutcome cap_oracle_battery(int count, std::uint64_t seed, double tol = 1e-9) {
    return timed_check("cap-oracle", [&]() -> std::string {
        Rng rng(seed);
        int solved = 0;
        for (int it = 0; it < count; ++it) {
            const int n = static_cast<int>(rng.uniform_int(1, 10));
            const int k = static_cast<int>(rng.uniform_int(1, 3));
            const Instance inst = random_instance(rng, n);
            const LatentCostMatrix delta = random_costs(rng, n, k);
            const BruteForceResult oracle = brute_force_cap(delta, inst, k);

            CapSolveConfig cfg;
            cfg.target_gap = 1e-9;
            const CapResult res = solve_exact(delta, inst, k, cfg);

            if (!oracle.assignment != !res.assignment)
                return "feasibility mismatch at case " + std::to_string(it);
            if (!oracle.assignment) continue;
            const double diff = std::abs(oracle.objective - res.stats.best_objective);
            if (diff > tol)
                return "objective mismatch " + std::to_string(diff) + " at case " + std::to_string(it);
            if (res.stats.lower_bound > res.stats.best_objective + tol)
                return "lower bound above incumbent at case " + std::to_string(it);
            ++solved;
        }
        if (solved == 0) return "no feasible case was generated";
        return "";
    });
}

// Held-Karp equals full-permutation brute force on small clusters.
inline CheckOutcome tsp_oracle_battery(int count, std::uint64_t seed, int max_cluster = 8,
                                       double tol = 1e-9) {
    return timed_check("tsp-oracle", [&]() -> std::string {
        Rng rng(seed);
        for (int it = 0; it < count; ++it) {
            const int n = static_cast<int>(rng.uniform_int(1, max_cluster));
            const Instance inst = random_instance(rng, n);
            std::vector<int> cluster(n);
            for (int i = 0; i < n; ++i) cluster[i] = i + 1;

            const Tour tour = held_karp(inst, cluster);
            const double hk = tour.cost(inst);

            std::vector<int> perm = cluster;
            double best = std::numeric_limits<double>::infinity();
            do {
                double c = distance(inst.depot(), inst.customer(perm.front()));
                for (int i = 0; i + 1 < n; ++i)
                    c += distance(inst.customer(perm[i]), inst.customer(perm[i + 1]));
                c += distance(inst.customer(perm.back()), inst.depot());
                best = std::min(best, c);
            } while (std::next_permutation(perm.begin(), perm.end()));

            if (std::abs(hk - best) > tol)
                return "cost mismatch " + std::to_string(hk - best) + " at case " + std::to_string(it);
        }
        return "";
    });
}

// L_ot evaluated at a raw cost matrix through Sinkhorn + renormalization.
inline double ot_pipeline_loss(const Eigen::MatrixXd& delta, const Instance& inst,
                               const std::vector<int>& target, const SinkhornConfig& cfg) {
    LatentCostMatrix cost;
    cost.values = delta;
    cost.upper_bound = std::max(2.0, delta.maxCoeff());
    const Marginals marg = build_marginals(inst, static_cast<int>(delta.cols()));
    const TransportPlan plan = sinkhorn_log_domain(pad_slack(cost), marg, cfg);
    return cross_entropy_ot(transport_to_probabilities(plan, inst), target);
}

// Small instance whose fleet bound and greedy anchor count both hit k, so
// gradient problems have a true N x k shape.
inline Instance random_instance_with_k_anchors(Rng& rng, int n, int k, SeedSet* seeds_out) {
    for (;;) {
        const Instance inst = random_instance(rng, n, /*capacity=*/15);
        if (fleet_lower_bound(inst) > k) continue;
        SeedSet seeds = select_seeds(inst, k);
        if (seeds.k != k) continue;
        if (seeds_out) *seeds_out = std::move(seeds);
        return inst;
    }
}

// Both gradient contracts: dL_ot/ddelta against central finite differences,
// and d(L_ot + L_bce)/dparams through the full parametric model.
inline CheckOutcome gradient_battery(int count, std::uint64_t seed, int n = 8, int k = 3,
                                     double h = 1e-5, double rel_tol = 1e-4) {
    return timed_check("gradient-fd", [&]() -> std::string {
        Rng rng(seed);
        SinkhornConfig sk{0.01, 20, 1e-15};
        for (int it = 0; it < count; ++it) {
            SeedSet seeds;
            const Instance inst = random_instance_with_k_anchors(rng, n, k, &seeds);
            std::vector<int> target(n);
            for (int i = 0; i < n; ++i) target[i] = static_cast<int>(rng.uniform_int(0, k - 1));

            // Contract 1: gradient with respect to the cost matrix.
            LatentCostMatrix delta = random_costs(rng, n, k);
            {
                const Marginals marg = build_marginals(inst, k);
                const Eigen::MatrixXd padded = pad_slack(delta);
                const TransportPlan plan = sinkhorn_log_domain(padded, marg, sk);
                const SoftAssignment soft = transport_to_probabilities(plan, inst);
                const Eigen::MatrixXd upstream =
                    cross_entropy_ot_plan_gradient(plan, soft, inst, target);
                const Eigen::MatrixXd grad =
                    sinkhorn_gradient(padded, marg, sk, upstream).bottomRows(n);

                Eigen::MatrixXd fd(n, k);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < k; ++j) {
                        Eigen::MatrixXd dp = delta.values, dm = delta.values;
                        dp(i, j) += h;
                        dm(i, j) -= h;
                        fd(i, j) = (ot_pipeline_loss(dp, inst, target, sk) -
                                    ot_pipeline_loss(dm, inst, target, sk)) /
                                   (2.0 * h);
                    }
                const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-10);
                const double err = (grad - fd).cwiseAbs().maxCoeff() / scale;
                if (err > rel_tol)
                    return "dL/ddelta rel err " + std::to_string(err) + " at case " +
                           std::to_string(it);
            }

            // Contract 2: gradient with respect to every model parameter.
            {
                TrainExample ex;
                ex.inst = inst;
                ex.seeds = seeds;
                AssignmentMatrix tgt;
                tgt.k = k;
                tgt.assign = target;
                ex.target = tgt;

                TrainConfig tc;
                tc.sinkhorn = sk;
                tc.with_bce = true;
                CostModelParams params = CostModelParams::random_init(8, rng.next_u64());
                params.gamma = rng.uniform(-1.0, 1.0);
                params.beta = rng.uniform(-1.0, 1.0);

                CostModelParams grads;
                batch_gradient(params, {ex}, tc, grads);

                const int np = flat_param_count(params);
                double worst = 0.0;
                double scale = 1e-10;
                std::vector<double> fdv(np), adv(np);
                for (int p = 0; p < np; ++p) {
                    CostModelParams pp = params, pm = params;
                    add_flat_param(pp, p, h);
                    add_flat_param(pm, p, -h);
                    const auto lp = evaluate_batch(pp, {ex}, tc);
                    const auto lm = evaluate_batch(pm, {ex}, tc);
                    fdv[p] = (lp.total(true) - lm.total(true)) / (2.0 * h);
                    adv[p] = get_flat_param(grads, p);
                    scale = std::max(scale, std::abs(fdv[p]));
                }
                for (int p = 0; p < np; ++p) worst = std::max(worst, std::abs(adv[p] - fdv[p]));
                if (worst / scale > rel_tol)
                    return "dL/dparams rel err " + std::to_string(worst / scale) + " at case " +
                           std::to_string(it);
            }
        }
        return "";
    });
}

// Pairwise distances preserved under random isometries, plus cost
// invariance of the geometric pipeline on small instances.
inline CheckOutcome isometry_battery(int pairs, std::uint64_t seed, double dist_tol = 1e-9,
                                     double cost_tol = 1e-6) {
    return timed_check("isometry", [&]() -> std::string {
        Rng rng(seed);
        for (int it = 0; it < pairs; ++it) {
            const int n = static_cast<int>(rng.uniform_int(4, 10));
            const Instance inst = random_instance(rng, n);
            const Isometry g = random_isometry(rng);
            const Instance moved = apply_isometry(inst, g);

            for (std::size_t a = 0; a < inst.coords.size(); ++a)
                for (std::size_t b = a + 1; b < inst.coords.size(); ++b) {
                    const double d0 = distance(inst.coords[a], inst.coords[b]);
                    const double d1 = distance(moved.coords[a], moved.coords[b]);
                    if (std::abs(d0 - d1) > dist_tol)
                        return "distance drift " + std::to_string(d0 - d1) + " at case " +
                               std::to_string(it);
                }

            PipelineConfig cfg;
            cfg.cap.target_gap = 1e-9;
            const auto base = run_pipeline(inst, CostProvider::euclidean(), DecodeMode::exact, cfg);
            const auto trans = run_pipeline(moved, CostProvider::euclidean(), DecodeMode::exact, cfg);
            if (std::abs(base.solution.total_cost - trans.solution.total_cost) > cost_tol)
                return "pipeline cost drift " +
                       std::to_string(base.solution.total_cost - trans.solution.total_cost) +
                       " at case " + std::to_string(it);
        }
        return "";
    });
}

}  // namespace cfrs::verify
