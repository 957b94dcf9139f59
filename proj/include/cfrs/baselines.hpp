#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "cfrs/cap.hpp"
#include "cfrs/costs.hpp"
#include "cfrs/errors.hpp"
#include "cfrs/instance.hpp"
#include "cfrs/routing.hpp"
#include "cfrs/seeds.hpp"

namespace cfrs {

struct SweepConfig {
    bool best_of_all_starts = false;
    RoutingConfig routing;
};

namespace detail {

struct PolarKey {
    double angle;   // [0, 2*pi); coincident with the depot -> 0
    double radius;
    int index;
};

inline std::vector<PolarKey> polar_order(const Instance& inst, bool reversed) {
    constexpr double two_pi = 6.283185307179586476925286766559;
    std::vector<PolarKey> keys;
    keys.reserve(inst.n());
    for (int i = 1; i <= inst.n(); ++i) {
        const double dx = inst.customer(i).x - inst.depot().x;
        const double dy = inst.customer(i).y - inst.depot().y;
        double angle = std::atan2(dy, dx);
        if (angle < 0.0) angle += two_pi;
        if (dx == 0.0 && dy == 0.0) angle = 0.0;
        if (reversed) angle = std::fmod(two_pi - angle, two_pi);
        keys.push_back({angle, std::hypot(dx, dy), i});
    }
    std::sort(keys.begin(), keys.end(), [](const PolarKey& a, const PolarKey& b) {
        if (a.angle != b.angle) return a.angle < b.angle;
        if (a.radius != b.radius) return a.radius < b.radius;
        return a.index < b.index;
    });
    return keys;
}

inline std::vector<std::vector<int>> sweep_clusters(const Instance& inst,
                                                    const std::vector<PolarKey>& keys, int start) {
    const int n = inst.n();
    std::vector<std::vector<int>> clusters;
    std::vector<int> current;
    int load = 0;
    for (int off = 0; off < n; ++off) {
        const int i = keys[(start + off) % n].index;
        if (load + inst.demand(i) > inst.capacity) {
            clusters.push_back(std::move(current));
            current.clear();
            load = 0;
        }
        current.push_back(i);
        load += inst.demand(i);
    }
    if (!current.empty()) clusters.push_back(std::move(current));
    return clusters;
}

}  // namespace detail

// Classical sweep: fill vehicles in polar-angle order about the depot,
// anchored at customer 1's angle. Both sweep directions are evaluated and
// the cheaper kept, which makes the result invariant under translation and
// reflection (a reflection swaps the two directions); rotations can still
// shift the start angle. With `best_of_all_starts` every rotation of the
// sweep start is tried as well.
inline Solution sweep_solve(const Instance& inst, const SweepConfig& cfg = {}) {
    Solution best;
    bool have = false;
    for (int rev = 0; rev < 2; ++rev) {
        const auto keys = detail::polar_order(inst, rev == 1);
        int anchor = 0;
        for (int p = 0; p < static_cast<int>(keys.size()); ++p)
            if (keys[p].index == 1) anchor = p;
        std::vector<int> starts{anchor};
        if (cfg.best_of_all_starts) {
            starts.clear();
            for (int p = 0; p < static_cast<int>(keys.size()); ++p) starts.push_back(p);
        }
        for (int start : starts) {
            Solution sol = route_clusters(inst, detail::sweep_clusters(inst, keys, start), cfg.routing);
            if (!have || sol.total_cost < best.total_cost) {
                best = std::move(sol);
                have = true;
            }
        }
    }
    return best;
}

// Fisher-Jaikumar: anchor seeds via capacity-aware greedy decoding, assign
// customers by an exact solve of the insertion-cost surrogate
// c_ij = d(0,i) + d(i,seed_j) - d(0,seed_j) (clamped at zero), then route
// each cluster. Infeasible fleets retry with one more vehicle.
inline Solution fisher_jaikumar_solve(const Instance& inst, const CapSolveConfig& config = {},
                                      const RoutingConfig& routing = {}) {
    const int k_min = fleet_lower_bound(inst);
    for (int k = k_min; k <= inst.n(); ++k) {
        const SeedSet seeds = select_seeds(inst, k);
        const int k_eff = seeds.k;

        LatentCostMatrix cost;
        cost.values.resize(inst.n(), k_eff);
        for (int i = 1; i <= inst.n(); ++i) {
            const double d0i = distance(inst.depot(), inst.customer(i));
            for (int j = 0; j < k_eff; ++j) {
                const int a = seeds.anchor_indices[j];
                const double c = d0i + distance(inst.customer(i), inst.customer(a)) -
                                 distance(inst.depot(), inst.customer(a));
                cost.values(i - 1, j) = std::max(c, 0.0);
            }
        }
        cost.upper_bound = cost.values.size() > 0 ? cost.values.maxCoeff() : 0.0;

        const CapResult res = solve_exact(cost, inst, k_eff, config);
        if (res.assignment)
            return route_clusters(inst, assignment_to_clusters(*res.assignment), routing);
    }
    throw InfeasibleError("fisher_jaikumar_solve: no feasible fleet size found");
}

}  // namespace cfrs
