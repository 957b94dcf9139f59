// Command-line front end: instance generation, single-instance solves,
// corpus benchmarking, cost-model training, and the self-check oracles.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cfrs/baselines.hpp"
#include "cfrs/bench.hpp"
#include "cfrs/cap.hpp"
#include "cfrs/costs.hpp"
#include "cfrs/instance.hpp"
#include "cfrs/instance_io.hpp"
#include "cfrs/ot.hpp"
#include "cfrs/routing.hpp"
#include "cfrs/training.hpp"
#include "cfrs/verify.hpp"

namespace fs = std::filesystem;

namespace {

struct SolveFlags {
    std::string decode = "exact";
    std::string cost = "euclid";
    std::string params_path;
    double eps = 0.001;
    int max_iters = 1000;
    double tau_high = 0.99;
    double tau_low = 1e-4;
    double time_limit = 100.0;
    double mip_gap = 0.001;
    bool best_of_k = false;
    std::uint64_t seed = 0;
};

void add_solve_flags(CLI::App* cmd, SolveFlags& f) {
    cmd->add_option("--decode", f.decode, "CAP decoding mode: exact|sparse|fixed")
        ->check(CLI::IsMember({"exact", "sparse", "fixed"}));
    cmd->add_option("--cost", f.cost, "cost provider: euclid|model")
        ->check(CLI::IsMember({"euclid", "model"}));
    cmd->add_option("--params", f.params_path, "trained cost-model params (required for --cost model)");
    cmd->add_option("--eps", f.eps, "Sinkhorn entropic regularizer (inference)");
    cmd->add_option("--max-iters", f.max_iters, "Sinkhorn iteration cap");
    cmd->add_option("--tau-high", f.tau_high, "node-fixing confidence threshold");
    cmd->add_option("--tau-low", f.tau_low, "sparsification edge threshold");
    cmd->add_option("--time-limit", f.time_limit, "CAP time limit per solve (s)");
    cmd->add_option("--mip-gap", f.mip_gap, "CAP relative gap target");
    cmd->add_flag("--best-of-k", f.best_of_k, "try both K_min and K_min+1, keep the cheaper");
    cmd->add_option("--seed", f.seed, "seed for the fallback pruning RNG");
}

cfrs::PipelineConfig pipeline_config(const SolveFlags& f) {
    cfrs::PipelineConfig cfg;
    cfg.cap.time_limit = f.time_limit;
    cfg.cap.target_gap = f.mip_gap;
    cfg.cap.tau_high = f.tau_high;
    cfg.cap.tau_low = f.tau_low;
    cfg.cap.rng_seed = f.seed;
    cfg.sinkhorn.epsilon = f.eps;
    cfg.sinkhorn.max_iterations = f.max_iters;
    return cfg;
}

cfrs::CostProvider cost_provider(const SolveFlags& f) {
    if (f.cost == "euclid") return cfrs::CostProvider::euclidean();
    if (f.params_path.empty())
        throw cfrs::ParseError("--cost model requires --params PARAMS.json");
    std::ifstream in(f.params_path);
    if (!in) throw cfrs::ParseError("cannot open params file: " + f.params_path);
    return cfrs::CostProvider::model(cfrs::CostModelParams::from_json(nlohmann::json::parse(in)));
}

std::vector<std::pair<std::string, cfrs::Instance>> load_corpus(const std::string& dir) {
    std::vector<std::pair<std::string, cfrs::Instance>> corpus;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const fs::path& p = entry.path();
        if (p.extension() != ".json" && p.extension() != ".vrp") continue;
        if (p.filename() == "support.json") continue;
        files.push_back(p);
    }
    std::sort(files.begin(), files.end());
    for (const auto& p : files)
        corpus.emplace_back(p.stem().string(), cfrs::read_instance(p.string()));
    if (corpus.empty()) throw cfrs::ParseError("no instances found in " + dir);
    return corpus;
}

int cmd_generate(int support_size, int n, int capacity, int demand_lo, int demand_hi, int count,
                 std::uint64_t seed, const std::string& out_dir, bool central_depot) {
    const cfrs::SpatialSupport support = cfrs::generate_support(support_size, seed, central_depot);
    fs::create_directories(out_dir);
    cfrs::write_support(support, (fs::path(out_dir) / "support.json").string());
    cfrs::Rng root(seed);
    for (int i = 0; i < count; ++i) {
        const cfrs::Instance inst = cfrs::sample_instance(support, n, capacity, demand_lo, demand_hi,
                                                          root.derive(i + 1).seed());
        char name[32];
        std::snprintf(name, sizeof(name), "inst_%04d.json", i);
        cfrs::write_instance(inst, (fs::path(out_dir) / name).string());
    }
    std::cout << "wrote " << count << " instances + support.json to " << out_dir << "\n";
    return 0;
}

int cmd_solve(const std::string& instance_path, const SolveFlags& flags, const std::string& out_path) {
    const cfrs::Instance inst = cfrs::read_instance(instance_path);
    const cfrs::CostProvider provider = cost_provider(flags);
    const cfrs::DecodeMode mode = cfrs::decode_mode_from_string(flags.decode);
    const cfrs::PipelineConfig config = pipeline_config(flags);

    const cfrs::PipelineOutput out = flags.best_of_k
                                         ? cfrs::best_of_k(inst, provider, mode, config)
                                         : cfrs::run_pipeline(inst, provider, mode, config);
    const std::string text = cfrs::solution_to_json(out.solution).dump(2);
    if (out_path.empty()) {
        std::cout << text << "\n";
    } else {
        std::ofstream f(out_path);
        if (!f) throw cfrs::ParseError("cannot open output file: " + out_path);
        f << text << "\n";
    }
    std::cerr << "k=" << out.record.k_used << " cap_obj=" << out.record.cap_objective
              << " route_cost=" << out.record.route_cost << " status=" << out.record.status << "\n";
    return 0;
}

int cmd_bench(const std::string& corpus_dir, std::vector<std::string> methods,
              const std::string& reference_path, const std::string& csv_path,
              const SolveFlags& flags, int jobs, const std::vector<double>& gap_sweep,
              const std::string& gap_sweep_csv) {
    const auto corpus = load_corpus(corpus_dir);
    const cfrs::CostProvider provider = cost_provider(flags);
    const cfrs::PipelineConfig config = pipeline_config(flags);

    std::map<std::string, double> reference;
    const std::map<std::string, double>* ref_ptr = nullptr;
    if (!reference_path.empty()) {
        std::ifstream in(reference_path);
        if (!in) throw cfrs::ParseError("cannot open reference file: " + reference_path);
        const nlohmann::json j = nlohmann::json::parse(in);
        for (auto it = j.begin(); it != j.end(); ++it) reference[it.key()] = it.value().get<double>();
        ref_ptr = &reference;
    }

    const auto records =
        cfrs::run_corpus(corpus, methods, provider, config, jobs, flags.best_of_k, ref_ptr);

    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!csv_path.empty()) {
        file.open(csv_path);
        if (!file) throw cfrs::ParseError("cannot open CSV output: " + csv_path);
        out = &file;
    }
    *out << cfrs::bench_csv_header() << "\n";
    for (const auto& r : records) *out << cfrs::bench_csv_row(r) << "\n";

    if (!gap_sweep.empty()) {
        std::map<std::string, double> ref = reference;
        if (ref.empty()) {
            for (const auto& r : records) {
                auto it = ref.find(r.instance_id);
                if (!std::isnan(r.route_cost) && (it == ref.end() || r.route_cost < it->second))
                    ref[r.instance_id] = r.route_cost;
            }
        }
        const cfrs::DecodeMode mode = cfrs::decode_mode_from_string(flags.decode);
        const auto rows = cfrs::mip_gap_sweep(corpus, gap_sweep, mode, provider, config, ref);
        std::ofstream gfile;
        std::ostream* gout = &std::cout;
        if (!gap_sweep_csv.empty()) {
            gfile.open(gap_sweep_csv);
            if (!gfile) throw cfrs::ParseError("cannot open CSV output: " + gap_sweep_csv);
            gout = &gfile;
        }
        *gout << "gap_limit,mean_route_gap_pct,mean_time_s\n";
        for (const auto& row : rows)
            *gout << row.gap_limit << "," << row.mean_route_gap_pct << "," << row.mean_time_s << "\n";
    }
    return 0;
}

int cmd_train(const std::string& corpus_dir, int steps, double lr, int hidden, bool with_bce,
              const std::string& out_path, const std::string& trace_path, double eps, int max_iters,
              std::uint64_t seed) {
    const auto corpus = load_corpus(corpus_dir);

    std::vector<cfrs::TrainExample> batch;
    cfrs::CapSolveConfig label_cfg;
    for (const auto& [id, inst] : corpus) {
        // Self-generated expert labels: exact CAP on geometric costs.
        bool labeled = false;
        for (int k = cfrs::fleet_lower_bound(inst); k <= cfrs::fleet_lower_bound(inst) + 1; ++k) {
            const cfrs::SeedSet seeds = cfrs::select_seeds(inst, k);
            const cfrs::LatentCostMatrix delta = cfrs::euclidean_costs(inst, seeds);
            const cfrs::CapResult res = cfrs::solve_exact(delta, inst, seeds.k, label_cfg);
            if (res.assignment) {
                batch.push_back({inst, seeds, *res.assignment});
                labeled = true;
                break;
            }
        }
        if (!labeled) std::cerr << "train-cost: skipping " << id << " (no exact CAP label)\n";
    }
    if (batch.empty()) throw cfrs::ParseError("train-cost: no trainable instances in corpus");

    cfrs::TrainConfig cfg;
    cfg.steps = steps;
    cfg.learning_rate = lr;
    cfg.with_bce = with_bce;
    cfg.sinkhorn.epsilon = eps;
    cfg.sinkhorn.max_iterations = max_iters;

    const cfrs::CostModelParams init = cfrs::CostModelParams::random_init(hidden, seed);
    const cfrs::TrainResult result = cfrs::train_cost_model(init, batch, cfg);

    std::ofstream out(out_path);
    if (!out) throw cfrs::ParseError("cannot open output file: " + out_path);
    out << result.params.to_json().dump(2) << "\n";

    const std::string tpath = trace_path.empty() ? out_path + ".trace.csv" : trace_path;
    std::ofstream trace(tpath);
    if (!trace) throw cfrs::ParseError("cannot open trace file: " + tpath);
    trace << "step,total,l_ot,l_bce\n";
    for (const auto& s : result.trace)
        trace << s.step << "," << s.total << "," << s.l_ot << "," << s.l_bce << "\n";

    if (!result.trace.empty())
        std::cerr << "trained " << batch.size() << " instances, loss " << result.trace.front().total
                  << " -> " << result.trace.back().total << "\n";
    return 0;
}

int cmd_verify(bool quick) {
    using namespace cfrs::verify;
    std::vector<CheckOutcome> outcomes;
    outcomes.push_back(cap_oracle_battery(quick ? 25 : 60, 11));
    outcomes.push_back(tsp_oracle_battery(quick ? 15 : 40, 12, quick ? 7 : 8));
    outcomes.push_back(gradient_battery(quick ? 2 : 5, 13));
    outcomes.push_back(isometry_battery(quick ? 5 : 12, 14));

    bool all = true;
    for (const auto& o : outcomes) {
        std::printf("%-12s %s (%.2fs)%s%s\n", o.name.c_str(), o.pass ? "PASS" : "FAIL", o.seconds,
                    o.pass ? "" : " - ", o.pass ? "" : o.message.c_str());
        all = all && o.pass;
    }
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cluster-first route-second CVRP solver toolkit"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "sample a spatial support and instance corpus");
    int support_size = 3000, gen_n = 100, gen_capacity = 50, demand_lo = 1, demand_hi = 9, count = 1;
    std::uint64_t gen_seed = 1;
    std::string gen_out = ".";
    bool central_depot = false;
    gen->add_option("--support-size", support_size, "spatial support size");
    gen->add_option("--n", gen_n, "customers per instance");
    gen->add_option("--capacity", gen_capacity, "vehicle capacity Q");
    gen->add_option("--demand-lo", demand_lo, "demand lower bound");
    gen->add_option("--demand-hi", demand_hi, "demand upper bound");
    gen->add_option("--count", count, "number of instances");
    gen->add_option("--seed", gen_seed, "RNG seed");
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_flag("--central-depot", central_depot, "pin the depot at (0.5, 0.5)");

    // solve
    auto* solve = app.add_subcommand("solve", "solve one instance, print solution JSON");
    std::string instance_path, solve_out;
    SolveFlags solve_flags;
    solve->add_option("instance", instance_path, "instance file (JSON or VRPLIB)")->required();
    solve->add_option("--out", solve_out, "write solution JSON here instead of stdout");
    add_solve_flags(solve, solve_flags);

    // bench
    auto* bench = app.add_subcommand("bench", "evaluate a corpus, emit a CSV of records");
    std::string corpus_dir, reference_path, csv_path, gap_sweep_csv;
    std::vector<std::string> methods{"cfrs-exact", "cfrs-sparse", "cfrs-fixed", "sweep",
                                     "fisher-jaikumar"};
    std::vector<double> gap_sweep;
    int jobs = 1;
    SolveFlags bench_flags;
    bench->add_option("corpus", corpus_dir, "directory of instance files")->required();
    bench->add_option("--methods", methods, "methods to run")->delimiter(',');
    bench->add_option("--reference", reference_path, "JSON map instance_id -> reference cost");
    bench->add_option("--csv", csv_path, "CSV output path (stdout when omitted)");
    bench->add_option("--jobs", jobs, "parallel workers");
    bench->add_option("--gap-sweep", gap_sweep, "MIP gap limits for a sweep run")->delimiter(',');
    bench->add_option("--gap-sweep-csv", gap_sweep_csv, "CSV output for the gap sweep");
    add_solve_flags(bench, bench_flags);

    // train-cost
    auto* train = app.add_subcommand("train-cost", "fit the parametric cost model on a corpus");
    std::string train_corpus, train_out, trace_path;
    int steps = 200, hidden = 16, train_iters = 20;
    double lr = 0.1, train_eps = 0.01;
    bool with_bce = false;
    std::uint64_t train_seed = 1;
    train->add_option("corpus", train_corpus, "directory of instance files")->required();
    train->add_option("--steps", steps, "gradient steps");
    train->add_option("--lr", lr, "learning rate");
    train->add_option("--hidden", hidden, "hidden width of the cost model");
    train->add_flag("--with-bce", with_bce, "add the logit BCE term to the loss");
    train->add_option("--out", train_out, "params JSON output")->required();
    train->add_option("--trace", trace_path, "loss trace CSV (default: <out>.trace.csv)");
    train->add_option("--eps", train_eps, "Sinkhorn epsilon during training");
    train->add_option("--max-iters", train_iters, "Sinkhorn iteration cap during training");
    train->add_option("--seed", train_seed, "parameter init seed");

    // verify
    auto* ver = app.add_subcommand("verify", "run the oracle self-checks");
    bool quick = false;
    ver->add_flag("--quick", quick, "smaller batteries");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed())
            return cmd_generate(support_size, gen_n, gen_capacity, demand_lo, demand_hi, count,
                                gen_seed, gen_out, central_depot);
        if (solve->parsed()) return cmd_solve(instance_path, solve_flags, solve_out);
        if (bench->parsed())
            return cmd_bench(corpus_dir, methods, reference_path, csv_path, bench_flags, jobs,
                             gap_sweep, gap_sweep_csv);
        if (train->parsed())
            return cmd_train(train_corpus, steps, lr, hidden, with_bce, train_out, trace_path,
                             train_eps, train_iters, train_seed);
        if (ver->parsed()) return cmd_verify(quick);
    } catch (const cfrs::InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
