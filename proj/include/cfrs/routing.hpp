#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfrs/errors.hpp"
#include "cfrs/instance.hpp"

namespace cfrs {

// One vehicle route as an undirected closed walk through the depot. Edges
// are a multiset of unordered index pairs: a single-customer route holds
// the depot edge twice so its cost is the full round trip.
struct Tour {
    std::vector<std::pair<int, int>> edges;  // pairs stored (min, max)
    std::vector<int> customers;              // sorted, 1-based
    std::vector<int> order;                  // construction traversal (presentational)

    double cost(const Instance& inst) const {
        double c = 0.0;
        for (const auto& e : edges) c += distance(inst.coords[e.first], inst.coords[e.second]);
        return c;
    }
};

// Builds a tour from a depot-anchored visit order (depot not listed).
inline Tour make_tour(const std::vector<int>& visit_order) {
    if (visit_order.empty()) throw std::invalid_argument("make_tour: empty visit order");
    Tour t;
    t.order = visit_order;
    t.customers = visit_order;
    std::sort(t.customers.begin(), t.customers.end());
    int prev = 0;
    for (int c : visit_order) {
        t.edges.emplace_back(std::min(prev, c), std::max(prev, c));
        prev = c;
    }
    t.edges.emplace_back(0, prev);
    return t;
}

struct Solution {
    std::vector<Tour> tours;
    double total_cost = 0.0;

    double recompute_cost(const Instance& inst) const {
        double c = 0.0;
        for (const auto& t : tours) c += t.cost(inst);
        return c;
    }
};

struct RoutingConfig {
    int exact_threshold = 16;      // largest cluster handed to Held-Karp
    std::uint64_t rng_seed = 0;
};

// Optimal Hamiltonian cycle through depot + cluster by bitmask dynamic
// programming, O(2^n n^2).
inline Tour held_karp(const Instance& inst, const std::vector<int>& cluster,
                      int exact_threshold = 16) {
    const int n = static_cast<int>(cluster.size());
    if (n < 1) throw std::invalid_argument("held_karp: empty cluster");
    if (n > exact_threshold)
        throw std::invalid_argument("held_karp: cluster size " + std::to_string(n) +
                                    " above exact threshold " + std::to_string(exact_threshold));

    std::vector<int> nodes(cluster);
    std::sort(nodes.begin(), nodes.end());
    if (n == 1) return make_tour(nodes);

    std::vector<double> d_depot(n);
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) {
        d_depot[i] = distance(inst.depot(), inst.coords[nodes[i]]);
        for (int j = i + 1; j < n; ++j)
            d[i][j] = d[j][i] = distance(inst.coords[nodes[i]], inst.coords[nodes[j]]);
    }

    const int full = (1 << n) - 1;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dp(static_cast<std::size_t>(full + 1) * n, inf);
    std::vector<std::int16_t> parent(static_cast<std::size_t>(full + 1) * n, -1);
    for (int i = 0; i < n; ++i) dp[(std::size_t)(1 << i) * n + i] = d_depot[i];

    for (int mask = 1; mask <= full; ++mask) {
        for (int last = 0; last < n; ++last) {
            if (!(mask & (1 << last))) continue;
            const double base = dp[(std::size_t)mask * n + last];
            if (base == inf) continue;
            for (int next = 0; next < n; ++next) {
                if (mask & (1 << next)) continue;
                const int m2 = mask | (1 << next);
                const double cand = base + d[last][next];
                if (cand < dp[(std::size_t)m2 * n + next]) {
                    dp[(std::size_t)m2 * n + next] = cand;
                    parent[(std::size_t)m2 * n + next] = static_cast<std::int16_t>(last);
                }
            }
        }
    }

    int best_end = 0;
    double best = inf;
    for (int i = 0; i < n; ++i) {
        const double cand = dp[(std::size_t)full * n + i] + d_depot[i];
        if (cand < best) {
            best = cand;
            best_end = i;
        }
    }

    std::vector<int> order_local;
    int mask = full, last = best_end;
    while (last != -1) {
        order_local.push_back(last);
        const int p = parent[(std::size_t)mask * n + last];
        mask ^= (1 << last);
        last = p;
    }
    std::reverse(order_local.begin(), order_local.end());

    std::vector<int> visit;
    visit.reserve(n);
    for (int idx : order_local) visit.push_back(nodes[idx]);
    return make_tour(visit);
}

// Nearest-neighbor construction from the depot, then 2-opt to a local
// optimum with a first-improvement, deterministic scan. The seed is part
// of the interface for future randomized restarts; the current procedure
// is deterministic.
inline Tour improve_tour(const Instance& inst, const std::vector<int>& cluster,
                         std::uint64_t /*rng_seed*/ = 0) {
    const int n = static_cast<int>(cluster.size());
    if (n < 1) throw std::invalid_argument("improve_tour: empty cluster");

    std::vector<int> pool(cluster);
    std::sort(pool.begin(), pool.end());
    std::vector<int> seq;  // cycle nodes, seq[0] = depot (index 0)
    seq.reserve(n + 1);
    seq.push_back(0);
    int current = 0;
    std::vector<bool> used(pool.size(), false);
    for (int step = 0; step < n; ++step) {
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < pool.size(); ++t) {
            if (used[t]) continue;
            const double dd = distance(inst.coords[current], inst.coords[pool[t]]);
            if (dd < best_d) {
                best_d = dd;
                best = static_cast<int>(t);
            }
        }
        used[best] = true;
        seq.push_back(pool[best]);
        current = pool[best];
    }

    const int m = static_cast<int>(seq.size());
    auto dist_at = [&](int a, int b) { return distance(inst.coords[seq[a]], inst.coords[seq[b]]); };
    bool improved = true;
    while (improved) {
        improved = false;
        for (int a = 0; a < m - 1 && !improved; ++a) {
            for (int b = a + 1; b < m && !improved; ++b) {
                const int an = a + 1;
                const int bn = (b + 1) % m;
                if (bn == a) continue;  // edges share a node
                const double before = dist_at(a, an) + dist_at(b, bn);
                const double after = dist_at(a, b) + dist_at(an, bn);
                if (after < before - 1e-12) {
                    std::reverse(seq.begin() + an, seq.begin() + b + 1);
                    improved = true;
                }
            }
        }
    }

    return make_tour(std::vector<int>(seq.begin() + 1, seq.end()));
}

// Per-cluster TSP with threshold dispatch (exact below, 2-opt above); empty
// clusters are skipped and tours aggregate as an unordered collection.
inline Solution route_clusters(const Instance& inst, const std::vector<std::vector<int>>& clusters,
                               const RoutingConfig& cfg = {}) {
    std::vector<bool> seen(inst.n() + 1, false);
    int covered = 0;
    for (const auto& cl : clusters)
        for (int c : cl) {
            if (c < 1 || c > inst.n()) throw std::invalid_argument("route_clusters: bad customer index");
            if (seen[c]) throw std::invalid_argument("route_clusters: clusters overlap at customer " +
                                                     std::to_string(c));
            seen[c] = true;
            ++covered;
        }
    if (covered != inst.n()) throw std::invalid_argument("route_clusters: clusters do not cover all customers");

    Solution sol;
    for (const auto& cl : clusters) {
        if (cl.empty()) continue;
        Tour t = static_cast<int>(cl.size()) <= cfg.exact_threshold
                     ? held_karp(inst, cl, cfg.exact_threshold)
                     : improve_tour(inst, cl, cfg.rng_seed);
        sol.total_cost += t.cost(inst);
        sol.tours.push_back(std::move(t));
    }
    return sol;
}

// Order-free solution identity: per tour, edges as sorted (min, max) pairs
// with multiplicity; tours sorted by their smallest customer index.
// Equality of canonical forms is the comparison used by every symmetry
// check.
struct CanonicalSolution {
    std::vector<std::vector<std::pair<int, int>>> tours;

    friend bool operator==(const CanonicalSolution& a, const CanonicalSolution& b) {
        return a.tours == b.tours;
    }
    friend bool operator!=(const CanonicalSolution& a, const CanonicalSolution& b) {
        return !(a == b);
    }

    std::string to_string() const {
        std::string s;
        for (const auto& t : tours) {
            s += "[";
            for (const auto& e : t)
                s += "(" + std::to_string(e.first) + "," + std::to_string(e.second) + ")";
            s += "]";
        }
        return s;
    }
};

inline CanonicalSolution canonicalize(const Solution& sol) {
    CanonicalSolution canon;
    std::vector<std::pair<int, std::vector<std::pair<int, int>>>> keyed;
    for (const auto& t : sol.tours) {
        std::vector<std::pair<int, int>> edges = t.edges;
        for (auto& e : edges)
            if (e.first > e.second) std::swap(e.first, e.second);
        std::sort(edges.begin(), edges.end());
        const int key = t.customers.empty() ? 0 : t.customers.front();
        keyed.emplace_back(key, std::move(edges));
    }
    std::sort(keyed.begin(), keyed.end());
    for (auto& kv : keyed) canon.tours.push_back(std::move(kv.second));
    return canon;
}

inline nlohmann::json solution_to_json(const Solution& sol) {
    nlohmann::json routes = nlohmann::json::array();
    for (const auto& t : sol.tours) routes.push_back(t.order);
    return {{"routes", std::move(routes)}, {"cost", sol.total_cost}};
}

// Rebuilds tours from traversal orders; the cost is recomputed from the
// instance rather than trusted from the file.
inline Solution solution_from_json(const nlohmann::json& j, const Instance& inst) {
    Solution sol;
    try {
        for (const auto& route : j.at("routes")) {
            Tour t = make_tour(route.get<std::vector<int>>());
            sol.total_cost += t.cost(inst);
            sol.tours.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("solution JSON: ") + e.what());
    }
    return sol;
}

}  // namespace cfrs
