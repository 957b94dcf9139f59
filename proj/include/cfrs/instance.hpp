#pragma once

#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cfrs/geometry.hpp"
#include "cfrs/rng.hpp"

namespace cfrs {

// Fixed service-area geography: a pool of candidate locations from which
// daily instances draw their customers. Index 0 is the depot.
struct SpatialSupport {
    std::vector<Point> points;
    int depot_index = 0;
    std::uint64_t rng_seed = 0;

    int size() const { return static_cast<int>(points.size()); }
};

// One CVRP instance. Row 0 of `coords` is the depot; customer i (1-based)
// sits at coords[i] with integer demand demands[i-1]. Fractional demands
// q_i = d_i / Q are computed on the fly and never stored.
struct Instance {
    std::vector<Point> coords;            // (N+1) rows, row 0 = depot
    std::vector<int> demands;             // length N, all >= 1
    int capacity = 0;                     // Q
    std::optional<std::vector<int>> support_ids;  // length N+1 when present

    int n() const { return static_cast<int>(demands.size()); }

    const Point& depot() const { return coords[0]; }
    const Point& customer(int i) const { return coords[i]; }  // i in [1, N]

    int demand(int i) const { return demands[i - 1]; }  // i in [1, N]

    double q(int i) const { return static_cast<double>(demands[i - 1]) / capacity; }

    double total_q() const {
        long long sum = std::accumulate(demands.begin(), demands.end(), 0LL);
        return static_cast<double>(sum) / capacity;
    }

    void validate() const {
        if (demands.empty()) throw std::invalid_argument("instance: no customers");
        if (coords.size() != demands.size() + 1)
            throw std::invalid_argument("instance: coords must have N+1 rows");
        if (capacity <= 0) throw std::invalid_argument("instance: capacity must be positive");
        for (int d : demands) {
            if (d < 1) throw std::invalid_argument("instance: demands must be >= 1");
            if (d > capacity) throw std::invalid_argument("instance: demand exceeds capacity");
        }
        if (support_ids && support_ids->size() != coords.size())
            throw std::invalid_argument("instance: support_ids must have N+1 entries");
    }

    friend bool operator==(const Instance& a, const Instance& b) {
        return a.coords == b.coords && a.demands == b.demands && a.capacity == b.capacity &&
               a.support_ids == b.support_ids;
    }
};

// `size` i.i.d. uniform points on the unit square. With `centered_depot`
// the depot (index 0) is pinned at (0.5, 0.5) instead of being sampled.
inline SpatialSupport generate_support(int size, std::uint64_t seed, bool centered_depot = false) {
    if (size < 2) throw std::invalid_argument("generate_support: size must be >= 2");
    Rng rng(seed);
    SpatialSupport support;
    support.rng_seed = seed;
    support.points.reserve(size);
    for (int i = 0; i < size; ++i) {
        const double x = rng.uniform01();
        const double y = rng.uniform01();
        support.points.push_back({x, y});
    }
    if (centered_depot) support.points[0] = {0.5, 0.5};
    return support;
}

// n distinct non-depot support points, demands i.i.d. uniform integers in
// [demand_lo, demand_hi]. Deterministic for a fixed seed.
inline Instance sample_instance(const SpatialSupport& support, int n, int capacity, int demand_lo,
                                int demand_hi, std::uint64_t seed) {
    if (n < 1 || n > support.size() - 1)
        throw std::invalid_argument("sample_instance: n must be in [1, support size - 1]");
    if (demand_lo < 1 || demand_lo > demand_hi || demand_hi > capacity)
        throw std::invalid_argument("sample_instance: need 1 <= demand_lo <= demand_hi <= capacity");

    Rng rng(seed);
    // Sample customer ids from the support minus the depot slot.
    std::vector<int> picks = rng.sample_without_replacement(support.size() - 1, n);

    Instance inst;
    inst.capacity = capacity;
    inst.coords.reserve(n + 1);
    inst.coords.push_back(support.points[support.depot_index]);
    std::vector<int> ids;
    ids.reserve(n + 1);
    ids.push_back(support.depot_index);
    for (int p : picks) {
        const int id = p >= support.depot_index ? p + 1 : p;
        inst.coords.push_back(support.points[id]);
        ids.push_back(id);
    }
    inst.demands.reserve(n);
    for (int i = 0; i < n; ++i)
        inst.demands.push_back(static_cast<int>(rng.uniform_int(demand_lo, demand_hi)));
    inst.support_ids = std::move(ids);
    return inst;
}

// Fleet-size lower bound K = ceil(sum d_i / Q).
inline int fleet_lower_bound(const Instance& inst) {
    long long sum = std::accumulate(inst.demands.begin(), inst.demands.end(), 0LL);
    return static_cast<int>((sum + inst.capacity - 1) / inst.capacity);
}

// Transforms coordinates only; demands, capacity and support ids carry over.
inline Instance apply_isometry(const Instance& inst, const Isometry& g) {
    Instance out = inst;
    for (auto& p : out.coords) p = g.apply(p);
    return out;
}

}  // namespace cfrs
