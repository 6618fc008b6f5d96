#include "mqjoin/bench.hpp"

#include <algorithm>
#include <chrono>
#include <tuple>

#include "mqjoin/cost.hpp"

namespace mqjoin {

namespace {

using OrderKey = std::tuple<int, int, RelId, std::vector<Hop>>;

OrderKey key_of(const PartitionedOrder& o) {
    return {o.query, o.target, o.start, o.hops};
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

}  // namespace

std::vector<BenchPoint> run_bench(const BenchConfig& cfg) {
    std::vector<BenchPoint> points;
    for (int n_q : cfg.sweep) {
        WorkloadGenConfig shape = cfg.shape;
        shape.n_queries = n_q;
        Workload w = gen_workload(shape);
        SubJoinSet sj = SubJoinSet::enumerate(w);
        Statistics stats(&w);
        CostModel cost(w, sj, stats);

        CandidateSet cs = build_candidates(w, sj, cfg.cand_opts);
        cost.price(cs);
        IlpModel model = build_ilp(cs);

        // Per-query optima, translated into a warm start for the shared solve.
        std::map<OrderKey, std::pair<size_t, int>> global;
        for (size_t si = 0; si < cs.slots.size(); ++si)
            for (int oi : cs.slots[si].orders)
                global[key_of(cs.orders[oi])] = {si, oi};
        std::vector<int> hint(cs.slots.size(), -1);
        double individual = 0.0;
        for (size_t qi = 0; qi < w.queries.size(); ++qi) {
            CandidateSet qcs =
                build_candidates_for(w, sj, cfg.cand_opts, {static_cast<int>(qi)});
            cost.price(qcs);
            IlpModel qmodel = build_ilp(qcs);
            IlpSolution qsol = solve(qmodel, qcs, cfg.limits);
            individual += qsol.objective;
            for (size_t si = 0; si < qcs.slots.size(); ++si) {
                int oi = qsol.slot_choice.at(si);
                if (oi < 0) continue;
                auto hit = global.find(key_of(qcs.orders[oi]));
                if (hit == global.end())
                    throw InternalError("per-query order missing from the shared space");
                hint[hit->second.first] = hit->second.second;
            }
        }

        BenchPoint pt;
        std::vector<double> times;
        for (int rep = 0; rep < std::max(1, cfg.repetitions); ++rep) {
            auto t0 = std::chrono::steady_clock::now();
            pt.shared = solve(model, cs, cfg.limits, &hint);
            auto t1 = std::chrono::steady_clock::now();
            times.push_back(
                std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
        pt.row.n_q = n_q;
        pt.row.individual_cost = individual;
        pt.row.mqo_cost = pt.shared.objective;
        pt.row.variables = model.vars.size();
        pt.row.probe_orders = cs.orders.size();
        pt.row.solve_ms = median(times);
        points.push_back(std::move(pt));
    }
    return points;
}

std::vector<BenchRow> bench_rows(const std::vector<BenchPoint>& points) {
    std::vector<BenchRow> rows;
    for (const auto& p : points) rows.push_back(p.row);
    return rows;
}

}  // namespace mqjoin
