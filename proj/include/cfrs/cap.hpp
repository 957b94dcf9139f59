#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "cfrs/costs.hpp"
#include "cfrs/instance.hpp"
#include "cfrs/ot.hpp"
#include "cfrs/rng.hpp"

namespace cfrs {

enum class CapStatus { optimal, gap_reached, time_limit, infeasible };

inline const char* to_string(CapStatus s) {
    switch (s) {
        case CapStatus::optimal: return "optimal";
        case CapStatus::gap_reached: return "gap_reached";
        case CapStatus::time_limit: return "time_limit";
        case CapStatus::infeasible: return "infeasible";
    }
    return "?";
}

// Discrete customer-to-vehicle assignment; assign[i-1] is the vehicle of
// customer i. Exactly-once coverage is encoded by construction.
struct AssignmentMatrix {
    std::vector<int> assign;
    int k = 0;

    double objective(const LatentCostMatrix& delta) const {
        double c = 0.0;
        for (std::size_t i = 0; i < assign.size(); ++i) c += delta.values(i, assign[i]);
        return c;
    }

    std::vector<double> loads(const Instance& inst) const {
        std::vector<double> load(k, 0.0);
        for (std::size_t i = 0; i < assign.size(); ++i) load[assign[i]] += inst.q(static_cast<int>(i) + 1);
        return load;
    }
};

struct CapSolveConfig {
    double time_limit = 100.0;       // seconds per solve attempt
    double target_gap = 0.001;       // relative MIP gap
    double tau_high = 0.99;
    double tau_low = 1e-4;
    double augment_fraction = 0.02;  // nearest-vehicle edges added per customer
    double prune_fraction = 0.10;    // fixed customers released per fallback round
    int max_fallback_retries = 20;
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (!(time_limit > 0.0)) throw std::invalid_argument("cap: time_limit must be positive");
        if (!(target_gap > 0.0 && target_gap < 1.0))
            throw std::invalid_argument("cap: target_gap must be in (0, 1)");
        if (!(tau_high > 0.0 && tau_high < 1.0))
            throw std::invalid_argument("cap: tau_high must be in (0, 1)");
        if (!(tau_low >= 0.0 && tau_low < tau_high))
            throw std::invalid_argument("cap: need 0 <= tau_low < tau_high");
        if (augment_fraction < 0.0 || prune_fraction < 0.0 || prune_fraction > 1.0)
            throw std::invalid_argument("cap: bad fraction");
        if (max_fallback_retries < 0) throw std::invalid_argument("cap: bad retry count");
    }
};

struct CapSolveStats {
    double best_objective = std::numeric_limits<double>::quiet_NaN();
    double lower_bound = -std::numeric_limits<double>::infinity();
    double gap = std::numeric_limits<double>::infinity();
    long long nodes_explored = 0;
    double wall_time = 0.0;
    CapStatus status = CapStatus::infeasible;
    int fallback_prunes = 0;  // node-fixing fallback rounds taken
};

struct CapResult {
    std::optional<AssignmentMatrix> assignment;
    CapSolveStats stats;
};

namespace detail {

constexpr double kLoadTol = 1e-12;

// Depth-first branch and bound for min-cost capacitated assignment.
// Branches on the free customer with the largest demand fraction, children
// ordered by ascending cost; the bound relaxes the coupling between
// customers (each free customer priced at its cheapest vehicle that could
// still take it alone). A multiset of frontier bounds maintains the global
// lower bound for MIP-gap termination.
class CapBnb {
public:
    CapBnb(const Eigen::MatrixXd& delta, const std::vector<double>& q, int k,
           const std::vector<std::uint8_t>* edge_mask, std::vector<double> initial_loads,
           const CapSolveConfig& cfg)
        : delta_(delta),
          q_(q),
          k_(k),
          mask_(edge_mask),
          loads_(std::move(initial_loads)),
          cfg_(cfg),
          n_(static_cast<int>(q.size())) {
        order_.resize(n_);
        for (int i = 0; i < n_; ++i) order_[i] = i;
        std::stable_sort(order_.begin(), order_.end(),
                         [&](int a, int b) { return q_[a] > q_[b]; });
        assign_.assign(n_, -1);
    }

    CapResult run() {
        const auto t0 = std::chrono::steady_clock::now();
        deadline_ = t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                             std::chrono::duration<double>(cfg_.time_limit));

        CapResult result;
        seed_incumbent();
        const double root_bound = node_bound(0.0);
        if (root_bound < std::numeric_limits<double>::infinity()) {
            dfs(0, 0.0, root_bound);
        }

        result.stats.nodes_explored = nodes_;
        result.stats.wall_time =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (has_incumbent_) {
            AssignmentMatrix a;
            a.assign = best_assign_;
            a.k = k_;
            result.stats.best_objective = best_cost_;
            if (stop_ == Stop::none) {
                result.stats.status = CapStatus::optimal;
                result.stats.lower_bound = best_cost_;
                result.stats.gap = 0.0;
            } else {
                result.stats.status =
                    stop_ == Stop::gap ? CapStatus::gap_reached : CapStatus::time_limit;
                result.stats.lower_bound = std::min(stop_lower_bound_, best_cost_);
                result.stats.gap = relative_gap(best_cost_, result.stats.lower_bound);
            }
            result.assignment = std::move(a);
        } else {
            result.stats.status =
                stop_ == Stop::time ? CapStatus::time_limit : CapStatus::infeasible;
            result.stats.lower_bound = std::numeric_limits<double>::infinity();
        }
        return result;
    }

private:
    enum class Stop { none, gap, time };

    static double relative_gap(double best, double bound) {
        return (best - bound) / std::max(std::abs(best), 1e-12);
    }

    bool edge_allowed(int i, int j) const { return !mask_ || (*mask_)[i * k_ + j] != 0; }

    bool fits(int i, int j) const { return loads_[j] + q_[i] <= 1.0 + kLoadTol; }

    // Cheapest-feasible greedy in branching order; a decent incumbent makes
    // the first descent prune hard.
    void seed_incumbent() {
        std::vector<int> tmp(n_, -1);
        std::vector<double> saved = loads_;
        for (int idx = 0; idx < n_; ++idx) {
            const int i = order_[idx];
            int best_j = -1;
            for (int j = 0; j < k_; ++j) {
                if (!edge_allowed(i, j) || !fits(i, j)) continue;
                if (best_j == -1 || delta_(i, j) < delta_(i, best_j)) best_j = j;
            }
            if (best_j == -1) {
                loads_ = saved;
                return;
            }
            tmp[i] = best_j;
            loads_[best_j] += q_[i];
        }
        loads_ = saved;
        update_incumbent(tmp);
    }

    void update_incumbent(const std::vector<int>& assign) {
        double cost = 0.0;
        for (int i = 0; i < n_; ++i) cost += delta_(i, assign[i]);
        if (!has_incumbent_ || cost < best_cost_) {
            best_cost_ = cost;
            best_assign_ = assign;
            has_incumbent_ = true;
        }
    }

    // Partial cost plus the sum over free customers of the cheapest vehicle
    // that could still take each alone; +inf when some customer has none.
    double node_bound(double partial) const {
        double bound = partial;
        for (int idx = depth_; idx < n_; ++idx) {
            const int i = order_[idx];
            double m = std::numeric_limits<double>::infinity();
            for (int j = 0; j < k_; ++j)
                if (edge_allowed(i, j) && fits(i, j)) m = std::min(m, delta_(i, j));
            if (m == std::numeric_limits<double>::infinity()) return m;
            bound += m;
        }
        return bound;
    }

    bool should_stop(double own_bound) {
        if (stop_ != Stop::none) return true;
        if (std::chrono::steady_clock::now() >= deadline_) {
            stop_ = Stop::time;
            stop_lower_bound_ = current_lower_bound(own_bound);
            return true;
        }
        if (has_incumbent_) {
            const double glb = current_lower_bound(own_bound);
            if (relative_gap(best_cost_, glb) <= cfg_.target_gap) {
                stop_ = Stop::gap;
                stop_lower_bound_ = glb;
                return true;
            }
        }
        return false;
    }

    double current_lower_bound(double own_bound) const {
        double glb = own_bound;
        if (!open_.empty()) glb = std::min(glb, *open_.begin());
        if (has_incumbent_) glb = std::min(glb, best_cost_);
        return glb;
    }

    void dfs(int depth, double partial, double own_bound) {
        ++nodes_;
        depth_ = depth;
        if (should_stop(own_bound)) return;

        if (depth == n_) {
            update_incumbent(assign_);
            return;
        }

        // Tight bound with current loads; also detects stranded customers.
        const double bound = node_bound(partial);
        if (has_incumbent_ && bound >= best_cost_ - kLoadTol) return;
        if (bound == std::numeric_limits<double>::infinity()) return;

        const int i = order_[depth];
        const double tail = bound - partial - cheapest_for(i);

        struct Child {
            int j;
            double cost;
            double open_bound;
            std::multiset<double>::iterator it;
        };
        std::vector<Child> children;
        children.reserve(k_);
        for (int j = 0; j < k_; ++j) {
            if (!edge_allowed(i, j) || !fits(i, j)) continue;
            const double c = partial + delta_(i, j);
            children.push_back({j, c, c + tail, {}});
        }
        std::sort(children.begin(), children.end(), [&](const Child& a, const Child& b) {
            if (a.cost != b.cost) return a.cost < b.cost;
            return a.j < b.j;
        });
        for (auto& ch : children) ch.it = open_.insert(ch.open_bound);

        for (auto& ch : children) {
            open_.erase(ch.it);
            if (stop_ != Stop::none) continue;
            if (has_incumbent_ && ch.open_bound >= best_cost_ - kLoadTol) continue;
            assign_[i] = ch.j;
            loads_[ch.j] += q_[i];
            dfs(depth + 1, ch.cost, ch.open_bound);
            loads_[ch.j] -= q_[i];
            assign_[i] = -1;
            depth_ = depth;
        }
    }

    double cheapest_for(int i) const {
        double m = std::numeric_limits<double>::infinity();
        for (int j = 0; j < k_; ++j)
            if (edge_allowed(i, j) && fits(i, j)) m = std::min(m, delta_(i, j));
        return m;
    }

    const Eigen::MatrixXd& delta_;
    const std::vector<double>& q_;
    int k_;
    const std::vector<std::uint8_t>* mask_;
    std::vector<double> loads_;
    CapSolveConfig cfg_;
    int n_;

    std::vector<int> order_;
    std::vector<int> assign_;
    int depth_ = 0;
    long long nodes_ = 0;
    std::multiset<double> open_;
    bool has_incumbent_ = false;
    double best_cost_ = std::numeric_limits<double>::infinity();
    std::vector<int> best_assign_;
    Stop stop_ = Stop::none;
    double stop_lower_bound_ = -std::numeric_limits<double>::infinity();
    std::chrono::steady_clock::time_point deadline_;
};

inline std::vector<double> fractional_demands(const Instance& inst) {
    std::vector<double> q(inst.n());
    for (int i = 1; i <= inst.n(); ++i) q[i - 1] = inst.q(i);
    return q;
}

}  // namespace detail

// Exact capacitated assignment by depth-first branch and bound.
inline CapResult solve_exact(const LatentCostMatrix& delta, const Instance& inst, int k,
                             const CapSolveConfig& config = {}) {
    config.validate();
    if (delta.n() != inst.n() || delta.k() != k)
        throw std::invalid_argument("solve_exact: delta must be N x k");
    const std::vector<double> q = detail::fractional_demands(inst);
    const double total = inst.total_q();
    if (total > k + 1e-12) {
        CapResult r;
        r.stats.status = CapStatus::infeasible;
        r.stats.lower_bound = std::numeric_limits<double>::infinity();
        return r;
    }
    detail::CapBnb bnb(delta.values, q, k, nullptr, std::vector<double>(k, 0.0), config);
    return bnb.run();
}

struct BruteForceResult {
    std::optional<AssignmentMatrix> assignment;
    double objective = std::numeric_limits<double>::quiet_NaN();
    // Best objective over feasible assignments that differ from the
    // minimizer; +inf when the minimizer is the only feasible assignment.
    double second_objective = std::numeric_limits<double>::infinity();
};

// Exhaustive oracle over all k^N assignments; ties resolve to the
// lexicographically smallest assignment vector. Refuses searches beyond
// 1e7 candidates.
inline BruteForceResult brute_force_cap(const LatentCostMatrix& delta, const Instance& inst, int k) {
    const int n = inst.n();
    if (delta.n() != n || delta.k() != k)
        throw std::invalid_argument("brute_force_cap: delta must be N x k");
    double space = 1.0;
    for (int i = 0; i < n; ++i) {
        space *= k;
        if (space > 1e7) throw std::invalid_argument("brute_force_cap: search space exceeds 1e7");
    }

    const std::vector<double> q = detail::fractional_demands(inst);
    std::vector<int> assign(n, 0);
    std::vector<double> loads(k, 0.0);
    BruteForceResult best;

    // Odometer enumeration in lexicographic order.
    const long long total = static_cast<long long>(space);
    for (long long code = 0; code < total; ++code) {
        long long c = code;
        std::fill(loads.begin(), loads.end(), 0.0);
        bool feasible = true;
        double cost = 0.0;
        // Digit 0 (customer 1) is the most significant digit.
        for (int i = n - 1; i >= 0; --i) {
            assign[i] = static_cast<int>(c % k);
            c /= k;
        }
        for (int i = 0; i < n && feasible; ++i) {
            loads[assign[i]] += q[i];
            if (loads[assign[i]] > 1.0 + detail::kLoadTol) feasible = false;
            cost += delta.values(i, assign[i]);
        }
        if (!feasible) continue;
        if (!best.assignment || cost < best.objective) {
            if (best.assignment) best.second_objective = std::min(best.second_objective, best.objective);
            AssignmentMatrix a;
            a.assign = assign;
            a.k = k;
            best.assignment = std::move(a);
            best.objective = cost;
        } else {
            best.second_objective = std::min(best.second_objective, cost);
        }
    }
    return best;
}

// Node fixing: hard-assign every customer whose soft probability clears
// tau_high, solve the residual exactly, and on failure release a random
// tenth of the fixed customers and retry; the terminal fallback is the
// unrestricted exact solve.
inline CapResult solve_fixed(const LatentCostMatrix& delta, const SoftAssignment& y_hat,
                             const Instance& inst, int k, const CapSolveConfig& config = {}) {
    config.validate();
    const int n = inst.n();
    if (y_hat.y_hat.rows() != n || y_hat.y_hat.cols() != k)
        throw std::invalid_argument("solve_fixed: y_hat must be N x k");
    if (delta.n() != n || delta.k() != k)
        throw std::invalid_argument("solve_fixed: delta must be N x k");

    const std::vector<double> q = detail::fractional_demands(inst);

    std::vector<int> fixed_vehicle(n, -1);
    std::vector<int> fixed_list;
    for (int i = 0; i < n; ++i) {
        int arg = 0;
        double m = y_hat.y_hat(i, 0);
        for (int j = 1; j < k; ++j)
            if (y_hat.y_hat(i, j) > m) {
                m = y_hat.y_hat(i, j);
                arg = j;
            }
        if (m > config.tau_high) {
            fixed_vehicle[i] = arg;
            fixed_list.push_back(i);
        }
    }

    Rng rng(config.rng_seed);
    int prune_rounds = 0;

    for (int attempt = 0; attempt <= config.max_fallback_retries; ++attempt) {
        std::vector<double> loads(k, 0.0);
        double base_cost = 0.0;
        bool overload = false;
        for (int i : fixed_list) {
            loads[fixed_vehicle[i]] += q[i];
            base_cost += delta.values(i, fixed_vehicle[i]);
            if (loads[fixed_vehicle[i]] > 1.0 + detail::kLoadTol) overload = true;
        }

        if (!overload) {
            std::vector<int> free_idx;
            for (int i = 0; i < n; ++i)
                if (fixed_vehicle[i] == -1) free_idx.push_back(i);

            Eigen::MatrixXd delta_sub(free_idx.size(), k);
            std::vector<double> q_sub(free_idx.size());
            for (std::size_t r = 0; r < free_idx.size(); ++r) {
                delta_sub.row(r) = delta.values.row(free_idx[r]);
                q_sub[r] = q[free_idx[r]];
            }
            detail::CapBnb bnb(delta_sub, q_sub, k, nullptr, loads, config);
            CapResult sub = bnb.run();
            if (sub.assignment) {
                AssignmentMatrix full;
                full.k = k;
                full.assign = fixed_vehicle;
                for (std::size_t r = 0; r < free_idx.size(); ++r)
                    full.assign[free_idx[r]] = sub.assignment->assign[r];
                sub.stats.best_objective += base_cost;
                sub.stats.lower_bound += base_cost;
                sub.stats.gap = (sub.stats.best_objective - sub.stats.lower_bound) /
                                std::max(std::abs(sub.stats.best_objective), 1e-12);
                sub.stats.fallback_prunes = prune_rounds;
                return {std::move(full), sub.stats};
            }
        }

        if (fixed_list.empty()) break;
        // Release a random slice of the fixed customers and try again.
        const int release = static_cast<int>(
            std::ceil(config.prune_fraction * static_cast<double>(fixed_list.size())));
        std::vector<int> pick =
            rng.sample_without_replacement(static_cast<int>(fixed_list.size()), std::min<int>(release, fixed_list.size()));
        std::sort(pick.begin(), pick.end(), std::greater<int>());
        for (int p : pick) {
            fixed_vehicle[fixed_list[p]] = -1;
            fixed_list.erase(fixed_list.begin() + p);
        }
        ++prune_rounds;
    }

    CapResult full = solve_exact(delta, inst, k, config);
    full.stats.fallback_prunes = prune_rounds;
    return full;
}

// Sinkhorn-guided sparsification: restrict decision variables to edges with
// y_hat >= tau_low plus each customer's nearest vehicles by delta, widening
// the augmentation until the restricted problem is feasible (full density
// in the limit).
inline CapResult solve_sparse(const LatentCostMatrix& delta, const SoftAssignment& y_hat,
                              const Instance& inst, int k, const CapSolveConfig& config = {}) {
    config.validate();
    const int n = inst.n();
    if (y_hat.y_hat.rows() != n || y_hat.y_hat.cols() != k)
        throw std::invalid_argument("solve_sparse: y_hat must be N x k");
    if (delta.n() != n || delta.k() != k)
        throw std::invalid_argument("solve_sparse: delta must be N x k");

    const std::vector<double> q = detail::fractional_demands(inst);

    // Vehicles of each row ordered by ascending delta (ties to lower index).
    std::vector<std::vector<int>> nearest(n);
    for (int i = 0; i < n; ++i) {
        nearest[i].resize(k);
        for (int j = 0; j < k; ++j) nearest[i][j] = j;
        std::stable_sort(nearest[i].begin(), nearest[i].end(), [&](int a, int b) {
            return delta.values(i, a) < delta.values(i, b);
        });
    }

    int augment = static_cast<int>(std::ceil(config.augment_fraction * n));
    if (augment < 0) augment = 0;

    for (;; ++augment) {
        if (augment >= k) return solve_exact(delta, inst, k, config);

        std::vector<std::uint8_t> mask(static_cast<std::size_t>(n) * k, 0);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < k; ++j)
                if (y_hat.y_hat(i, j) >= config.tau_low) mask[i * k + j] = 1;
            for (int r = 0; r < augment; ++r) mask[i * k + nearest[i][r]] = 1;
        }

        detail::CapBnb bnb(delta.values, q, k, &mask, std::vector<double>(k, 0.0), config);
        CapResult res = bnb.run();
        if (res.assignment) return res;
    }
}

// Vehicle clusters as 1-based customer index sets; empty clusters allowed.
inline std::vector<std::vector<int>> assignment_to_clusters(const AssignmentMatrix& a) {
    std::vector<std::vector<int>> clusters(a.k);
    for (std::size_t i = 0; i < a.assign.size(); ++i) {
        const int j = a.assign[i];
        if (j < 0 || j >= a.k) throw std::invalid_argument("assignment_to_clusters: vehicle out of range");
        clusters[j].push_back(static_cast<int>(i) + 1);
    }
    return clusters;
}

inline AssignmentMatrix clusters_to_assignment(const std::vector<std::vector<int>>& clusters, int n) {
    AssignmentMatrix a;
    a.k = static_cast<int>(clusters.size());
    a.assign.assign(n, -1);
    for (int j = 0; j < a.k; ++j)
        for (int c : clusters[j]) {
            if (c < 1 || c > n || a.assign[c - 1] != -1)
                throw std::invalid_argument("clusters_to_assignment: bad cluster contents");
            a.assign[c - 1] = j;
        }
    for (int v : a.assign)
        if (v == -1) throw std::invalid_argument("clusters_to_assignment: uncovered customer");
    return a;
}

inline double cross_entropy_ot(const SoftAssignment& y_hat, const AssignmentMatrix& target) {
    if (target.k != y_hat.y_hat.cols())
        throw std::invalid_argument("cross_entropy_ot: vehicle count mismatch");
    return cross_entropy_ot(y_hat, target.assign);
}

}  // namespace cfrs
