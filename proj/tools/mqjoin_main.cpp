#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mqjoin/bench.hpp"
#include "mqjoin/cost.hpp"
#include "mqjoin/generator.hpp"
#include "mqjoin/io.hpp"
#include "mqjoin/runtime.hpp"

namespace {

using namespace mqjoin;

SolveLimits limits_from_ms(int64_t ms) {
    SolveLimits limits;
    limits.time_limit = std::chrono::milliseconds(ms);
    limits.node_limit = 0;
    return limits;
}

std::string status_name(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Timeout: return "timeout";
        case SolveStatus::Infeasible: return "infeasible";
    }
    return "unknown";
}

int cmd_optimize(const std::string& workload_path, const std::string& out_path,
                 const std::string& lp_path, const std::string& mode, int64_t time_limit) {
    Workload w = load_workload(workload_path);
    SubJoinSet sj = SubJoinSet::enumerate(w);
    Statistics stats(&w);
    CostModel cost(w, sj, stats);
    CandidateSet cs = build_candidates(w, sj, {});
    cost.price(cs);
    IlpModel model = build_ilp(cs);
    if (!lp_path.empty()) write_file(lp_path, export_lp(model));

    PlanOrders plan;
    if (mode == "shared") {
        IlpSolution sol = solve(model, cs, limits_from_ms(time_limit));
        plan = plan_orders_from_selection(cs, extract_plan(model, sol, cs));
        plan.objective = sol.objective;
        plan.status = status_name(sol.status);
    } else {
        double total = 0.0;
        SolveStatus worst = SolveStatus::Optimal;
        std::set<std::pair<int, RelId>> have_producer;
        for (size_t qi = 0; qi < w.queries.size(); ++qi) {
            CandidateSet qcs = build_candidates_for(w, sj, {}, {static_cast<int>(qi)});
            cost.price(qcs);
            IlpModel qmodel = build_ilp(qcs);
            IlpSolution sol = solve(qmodel, qcs, limits_from_ms(time_limit));
            if (sol.status == SolveStatus::Timeout) worst = SolveStatus::Timeout;
            total += sol.objective;
            PlanOrders qplan =
                plan_orders_from_selection(qcs, extract_plan(qmodel, sol, qcs));
            for (auto& o : qplan.query_orders) plan.query_orders.push_back(std::move(o));
            for (auto& o : qplan.fragment_orders)
                if (have_producer.insert({o.target, o.start}).second)
                    plan.fragment_orders.push_back(std::move(o));
        }
        plan.objective = total;
        plan.status = status_name(worst);
    }
    write_file(out_path, plan_to_json(w, sj, plan));
    return 0;
}

int cmd_simulate(const std::string& workload_path, const std::string& trace_path,
                 const std::string& plan_path, bool optimize, const std::string& mode,
                 int64_t epoch_len, const std::string& out_path,
                 const std::string& metrics_path) {
    if (plan_path.empty() == !optimize)
        throw ValidationError("simulate needs exactly one of --plan and --optimize");
    Workload w = load_workload(workload_path);
    std::vector<TraceEvent> trace = load_trace(trace_path, w);
    SimOptions opts;
    if (mode == "static")
        opts.mode = SimOptions::Mode::Static;
    else if (mode == "adaptive")
        opts.mode = SimOptions::Mode::Adaptive;
    else
        throw ValidationError("simulate --mode must be static or adaptive");
    opts.epoch_len = epoch_len;
    Simulator sim(w, opts);
    if (!plan_path.empty()) sim.set_initial_plan(read_file(plan_path));
    SimOutput out = sim.run(trace);
    write_file(out_path, results_to_jsonl(out.results));
    if (!metrics_path.empty()) write_file(metrics_path, metrics_to_jsonl(out.metrics));
    return 0;
}

int cmd_oracle(const std::string& workload_path, const std::string& trace_path,
               const std::string& out_path) {
    Workload w = load_workload(workload_path);
    std::vector<TraceEvent> trace = load_trace(trace_path, w);
    SimOutput out = oracle_join(w, trace);
    write_file(out_path, results_to_jsonl(out.results));
    return 0;
}

std::vector<int> parse_sweep(const std::string& text) {
    std::vector<int> sweep;
    std::string cur;
    for (char c : text + ",") {
        if (c == ',') {
            if (!cur.empty()) sweep.push_back(std::stoi(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (sweep.empty()) throw ValidationError("empty benchmark sweep");
    return sweep;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-query stream join planner and simulator"};
    app.require_subcommand(1);

    std::string workload_path, trace_path, plan_path, out_path, metrics_path, lp_path;
    std::string mode = "shared";
    int64_t time_limit = 10000;
    bool optimize_flag = false;
    int64_t epoch_len = 10;
    uint64_t seed = 1;
    int64_t duration = 100;
    WorkloadGenConfig shape;
    std::string sweep_text = "10,20,40,60,80,100";
    int repetitions = 5;

    auto* opt = app.add_subcommand("optimize", "select probe orders for a workload");
    opt->add_option("--workload", workload_path)->required();
    opt->add_option("--out", out_path)->required();
    opt->add_option("--export-lp", lp_path);
    opt->add_option("--mode", mode)->check(CLI::IsMember({"shared", "individual"}));
    opt->add_option("--time-limit", time_limit);

    std::string sim_mode = "static";
    auto* sim = app.add_subcommand("simulate", "execute a trace against a plan");
    sim->add_option("--workload", workload_path)->required();
    sim->add_option("--trace", trace_path)->required();
    sim->add_option("--plan", plan_path);
    sim->add_flag("--optimize", optimize_flag);
    sim->add_option("--mode", sim_mode)->check(CLI::IsMember({"static", "adaptive"}));
    sim->add_option("--epoch-len", epoch_len);
    sim->add_option("--seed", seed);
    sim->add_option("--out", out_path)->required();
    sim->add_option("--metrics", metrics_path);

    auto* orc = app.add_subcommand("oracle", "reference join over a trace");
    orc->add_option("--workload", workload_path)->required();
    orc->add_option("--trace", trace_path)->required();
    orc->add_option("--out", out_path)->required();

    auto* gw = app.add_subcommand("gen-workload", "generate a random workload");
    gw->add_option("--relations", shape.n_relations);
    gw->add_option("--attrs", shape.attrs_per_relation);
    gw->add_option("--queries", shape.n_queries);
    gw->add_option("--query-size", shape.query_size);
    gw->add_option("--rate", shape.rate);
    gw->add_option("--window", shape.window);
    gw->add_option("--parallelism", shape.parallelism);
    gw->add_option("--seed", shape.seed);
    gw->add_option("--out", out_path)->required();

    auto* gt = app.add_subcommand("gen-trace", "generate a trace for a workload");
    gt->add_option("--workload", workload_path)->required();
    gt->add_option("--duration", duration);
    gt->add_option("--seed", seed);
    gt->add_option("--out", out_path)->required();

    auto* bn = app.add_subcommand("bench", "sweep query counts, emit CSV");
    bn->add_option("--relations", shape.n_relations);
    bn->add_option("--attrs", shape.attrs_per_relation);
    bn->add_option("--query-size", shape.query_size);
    bn->add_option("--rate", shape.rate);
    bn->add_option("--seed", shape.seed);
    bn->add_option("--sweep", sweep_text);
    bn->add_option("--reps", repetitions);
    bn->add_option("--time-limit", time_limit);
    bn->add_option("--out", out_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (opt->parsed())
            return cmd_optimize(workload_path, out_path, lp_path, mode, time_limit);
        if (sim->parsed())
            return cmd_simulate(workload_path, trace_path, plan_path, optimize_flag,
                                sim_mode, epoch_len, out_path, metrics_path);
        if (orc->parsed()) return cmd_oracle(workload_path, trace_path, out_path);
        if (gw->parsed()) {
            write_file(out_path, workload_to_json(gen_workload(shape)));
            return 0;
        }
        if (gt->parsed()) {
            Workload w = load_workload(workload_path);
            TraceGenConfig cfg;
            cfg.duration = duration;
            cfg.seed = seed;
            write_file(out_path, trace_to_jsonl(gen_trace(w, cfg)));
            return 0;
        }
        if (bn->parsed()) {
            BenchConfig cfg;
            cfg.sweep = parse_sweep(sweep_text);
            cfg.shape = shape;
            cfg.repetitions = repetitions;
            cfg.limits = limits_from_ms(time_limit);
            write_file(out_path, bench_to_csv(bench_rows(run_bench(cfg))));
            return 0;
        }
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 2;
    }
    return 0;
}
