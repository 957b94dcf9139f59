#pragma once

#include <atomic>
#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cfrs/baselines.hpp"
#include "cfrs/cap.hpp"
#include "cfrs/costs.hpp"
#include "cfrs/errors.hpp"
#include "cfrs/instance.hpp"
#include "cfrs/ot.hpp"
#include "cfrs/routing.hpp"
#include "cfrs/seeds.hpp"

namespace cfrs {

enum class DecodeMode { exact, sparse, fixed };

inline const char* to_string(DecodeMode m) {
    switch (m) {
        case DecodeMode::exact: return "exact";
        case DecodeMode::sparse: return "sparse";
        case DecodeMode::fixed: return "fixed";
    }
    return "?";
}

inline DecodeMode decode_mode_from_string(const std::string& s) {
    if (s == "exact") return DecodeMode::exact;
    if (s == "sparse") return DecodeMode::sparse;
    if (s == "fixed") return DecodeMode::fixed;
    throw std::invalid_argument("unknown decode mode: " + s);
}

// Latent cost source: plain geometry or the trained parametric model.
struct CostProvider {
    enum class Kind { euclidean, model };
    Kind kind = Kind::euclidean;
    CostModelParams params;

    LatentCostMatrix delta(const Instance& inst, const SeedSet& seeds) const {
        if (kind == Kind::euclidean) return euclidean_costs(inst, seeds);
        return parametric_costs(params, pair_features(inst, seeds));
    }

    std::string label() const { return kind == Kind::euclidean ? "euclid" : "model"; }

    static CostProvider euclidean() { return {}; }
    static CostProvider model(CostModelParams p) {
        CostProvider c;
        c.kind = Kind::model;
        c.params = std::move(p);
        return c;
    }
};

struct PipelineConfig {
    CapSolveConfig cap;
    SinkhornConfig sinkhorn = SinkhornConfig::inference();
    RoutingConfig routing;
    std::optional<int> fleet_size;  // defaults to the capacity lower bound
};

struct BenchRecord {
    std::string instance_id;
    std::string method;
    std::string decode;
    int k_used = 0;
    double cap_objective = std::numeric_limits<double>::quiet_NaN();
    double cap_gap = std::numeric_limits<double>::quiet_NaN();
    double route_cost = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> gap_pct;  // vs. reference cost, filled by corpus runs
    double wall_time_s = 0.0;
    std::string status;
};

struct PipelineOutput {
    Solution solution;
    BenchRecord record;
    AssignmentMatrix assignment;
    std::optional<SoftAssignment> soft;  // present for sparse/fixed decoding
    LatentCostMatrix delta;
};

// Full cluster-first pipeline: anchor seeds, latent costs, (for guided
// decoding) the Sinkhorn plan, a CAP decode, and per-cluster TSP recovery.
inline PipelineOutput run_pipeline(const Instance& inst, const CostProvider& provider,
                                   DecodeMode mode, const PipelineConfig& config = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    const int k_requested = config.fleet_size.value_or(fleet_lower_bound(inst));

    PipelineOutput out;
    const SeedSet seeds = select_seeds(inst, k_requested);
    const int k = seeds.k;
    out.delta = provider.delta(inst, seeds);

    CapResult cap_result;
    if (mode == DecodeMode::exact) {
        cap_result = solve_exact(out.delta, inst, k, config.cap);
    } else {
        const Marginals marg = build_marginals(inst, k);
        const TransportPlan plan = sinkhorn_log_domain(pad_slack(out.delta), marg, config.sinkhorn);
        out.soft = transport_to_probabilities(plan, inst);
        cap_result = mode == DecodeMode::sparse
                         ? solve_sparse(out.delta, *out.soft, inst, k, config.cap)
                         : solve_fixed(out.delta, *out.soft, inst, k, config.cap);
    }
    if (!cap_result.assignment)
        throw InfeasibleError(std::string("run_pipeline: CAP ") + to_string(cap_result.stats.status) +
                              " with k=" + std::to_string(k) + " under " + to_string(mode) +
                              " decoding");

    out.assignment = *cap_result.assignment;
    out.solution = route_clusters(inst, assignment_to_clusters(out.assignment), config.routing);

    out.record.method = "cfrs-" + provider.label();
    out.record.decode = to_string(mode);
    out.record.k_used = k;
    out.record.cap_objective = cap_result.stats.best_objective;
    out.record.cap_gap = cap_result.stats.gap;
    out.record.route_cost = out.solution.total_cost;
    out.record.status = to_string(cap_result.stats.status);
    out.record.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

// Optimality gap in percent, negative when `cost` beats the reference.
inline double gap(double cost, double reference) {
    if (!(reference > 0.0)) throw std::invalid_argument("gap: reference must be positive");
    return 100.0 * (cost - reference) / reference;
}

struct PrCurveRow {
    double tau = 0.0;
    double recall = 0.0;
    std::optional<double> precision;  // null when no edge is retained
    std::optional<double> accuracy;   // null when no customer clears tau
    long long retained = 0;
    long long confident = 0;
};

// Thresholding harness: per tau, edges with y_hat >= tau are retained and
// compared against the exact assignment's edge set; accuracy covers the
// customers whose max probability clears tau.
inline std::vector<PrCurveRow> precision_recall_curve(const SoftAssignment& y_hat,
                                                      const AssignmentMatrix& y_exact,
                                                      const std::vector<double>& thresholds) {
    const int n = static_cast<int>(y_hat.y_hat.rows());
    const int k = static_cast<int>(y_hat.y_hat.cols());
    if (static_cast<int>(y_exact.assign.size()) != n || y_exact.k != k)
        throw std::invalid_argument("precision_recall_curve: shape mismatch");

    std::vector<PrCurveRow> rows;
    rows.reserve(thresholds.size());
    for (double tau : thresholds) {
        PrCurveRow row;
        row.tau = tau;
        long long hit = 0;
        long long correct = 0;
        for (int i = 0; i < n; ++i) {
            int arg = 0;
            for (int j = 0; j < k; ++j) {
                if (y_hat.y_hat(i, j) >= tau) {
                    ++row.retained;
                    if (y_exact.assign[i] == j) ++hit;
                }
                if (y_hat.y_hat(i, j) > y_hat.y_hat(i, arg)) arg = j;
            }
            if (y_hat.y_hat(i, arg) > tau) {
                ++row.confident;
                if (arg == y_exact.assign[i]) ++correct;
            }
        }
        row.recall = static_cast<double>(hit) / n;
        if (row.retained > 0) row.precision = static_cast<double>(hit) / row.retained;
        if (row.confident > 0) row.accuracy = static_cast<double>(correct) / row.confident;
        rows.push_back(row);
    }
    return rows;
}

// Runs the pipeline at the capacity lower bound and at one extra vehicle,
// returning the cheaper feasible solution.
inline PipelineOutput best_of_k(const Instance& inst, const CostProvider& provider, DecodeMode mode,
                                const PipelineConfig& config = {}) {
    const int k_min = fleet_lower_bound(inst);
    std::optional<PipelineOutput> best;
    std::string failures;
    for (int k : {k_min, k_min + 1}) {
        PipelineConfig cfg = config;
        cfg.fleet_size = k;
        try {
            PipelineOutput out = run_pipeline(inst, provider, mode, cfg);
            if (!best || out.solution.total_cost < best->solution.total_cost) best = std::move(out);
        } catch (const InfeasibleError& e) {
            failures += std::string(failures.empty() ? "" : "; ") + e.what();
        }
    }
    if (!best) throw InfeasibleError("best_of_k: both fleet sizes infeasible: " + failures);
    return *best;
}

struct GapSweepRow {
    double gap_limit = 0.0;
    double mean_route_gap_pct = 0.0;
    double mean_time_s = 0.0;
};

// Re-solves the corpus once per MIP-gap limit; reference costs must cover
// every instance id.
inline std::vector<GapSweepRow> mip_gap_sweep(
    const std::vector<std::pair<std::string, Instance>>& corpus, const std::vector<double>& gap_limits,
    DecodeMode mode, const CostProvider& provider, const PipelineConfig& base_config,
    const std::map<std::string, double>& reference) {
    std::vector<GapSweepRow> rows;
    for (double limit : gap_limits) {
        PipelineConfig cfg = base_config;
        cfg.cap.target_gap = limit;
        GapSweepRow row;
        row.gap_limit = limit;
        for (const auto& [id, inst] : corpus) {
            const auto it = reference.find(id);
            if (it == reference.end())
                throw std::invalid_argument("mip_gap_sweep: no reference cost for " + id);
            const PipelineOutput out = run_pipeline(inst, provider, mode, cfg);
            row.mean_route_gap_pct += gap(out.solution.total_cost, it->second);
            row.mean_time_s += out.record.wall_time_s;
        }
        row.mean_route_gap_pct /= corpus.size();
        row.mean_time_s /= corpus.size();
        rows.push_back(row);
    }
    return rows;
}

namespace detail {

inline std::string csv_number(double v) {
    if (std::isnan(v)) return "";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace detail

inline std::string bench_csv_header() {
    return "instance_id,method,decode,k,cap_obj,cap_gap,route_cost,gap_pct,time_s,status";
}

inline std::string bench_csv_row(const BenchRecord& r) {
    std::string line = r.instance_id + "," + r.method + "," + r.decode + "," + std::to_string(r.k_used);
    line += "," + detail::csv_number(r.cap_objective);
    line += "," + detail::csv_number(r.cap_gap);
    line += "," + detail::csv_number(r.route_cost);
    line += ",";
    if (r.gap_pct) line += detail::csv_number(*r.gap_pct);
    line += "," + detail::csv_number(r.wall_time_s);
    line += "," + r.status;
    return line;
}

struct CorpusMethod {
    std::string name;  // cfrs-exact | cfrs-sparse | cfrs-fixed | sweep | fisher-jaikumar
};

// Corpus evaluation across methods with an optional worker pool. Records
// come back in deterministic (instance, method) order regardless of the
// job count; gap_pct is measured against the reference map when given,
// otherwise against the best cost observed per instance.
inline std::vector<BenchRecord> run_corpus(
    const std::vector<std::pair<std::string, Instance>>& corpus,
    const std::vector<std::string>& methods, const CostProvider& provider,
    const PipelineConfig& config, int jobs = 1, bool use_best_of_k = false,
    const std::map<std::string, double>* reference = nullptr) {
    const int m = static_cast<int>(methods.size());
    std::vector<BenchRecord> records(corpus.size() * m);

    auto run_one = [&](std::size_t idx) {
        const auto& [id, inst] = corpus[idx / m];
        const std::string& method = methods[idx % m];
        BenchRecord rec;
        rec.instance_id = id;
        rec.method = method;
        rec.decode = "-";
        const auto t0 = std::chrono::steady_clock::now();
        try {
            if (method == "sweep") {
                const Solution sol = sweep_solve(inst, {false, config.routing});
                rec.k_used = static_cast<int>(sol.tours.size());
                rec.route_cost = sol.total_cost;
                rec.status = "optimal";
            } else if (method == "fisher-jaikumar") {
                const Solution sol = fisher_jaikumar_solve(inst, config.cap, config.routing);
                rec.k_used = static_cast<int>(sol.tours.size());
                rec.route_cost = sol.total_cost;
                rec.status = "optimal";
            } else if (method.rfind("cfrs-", 0) == 0) {
                const DecodeMode mode = decode_mode_from_string(method.substr(5));
                const PipelineOutput out = use_best_of_k
                                               ? best_of_k(inst, provider, mode, config)
                                               : run_pipeline(inst, provider, mode, config);
                rec = out.record;
                rec.instance_id = id;
                rec.method = method;
            } else {
                throw std::invalid_argument("unknown method: " + method);
            }
        } catch (const InfeasibleError&) {
            rec.status = "infeasible";
        }
        rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        records[idx] = std::move(rec);
    };

    const std::size_t total = records.size();
    if (jobs <= 1) {
        for (std::size_t i = 0; i < total; ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        for (int w = 0; w < jobs; ++w)
            workers.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < total; i = next.fetch_add(1)) run_one(i);
            });
        for (auto& t : workers) t.join();
    }

    // Reference = explicit file when given, else best-known across methods.
    for (std::size_t c = 0; c < corpus.size(); ++c) {
        double ref = std::numeric_limits<double>::quiet_NaN();
        if (reference) {
            const auto it = reference->find(corpus[c].first);
            if (it != reference->end()) ref = it->second;
        } else {
            for (int j = 0; j < m; ++j) {
                const double rc = records[c * m + j].route_cost;
                if (!std::isnan(rc) && (std::isnan(ref) || rc < ref)) ref = rc;
            }
        }
        if (std::isnan(ref) || ref <= 0.0) continue;
        for (int j = 0; j < m; ++j) {
            BenchRecord& rec = records[c * m + j];
            if (!std::isnan(rec.route_cost)) rec.gap_pct = gap(rec.route_cost, ref);
        }
    }
    return records;
}

}  // namespace cfrs
