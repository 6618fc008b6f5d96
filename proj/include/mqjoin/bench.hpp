#pragma once

#include "mqjoin/generator.hpp"
#include "mqjoin/ilp.hpp"

namespace mqjoin {

struct BenchConfig {
    /** Query counts to sweep, one CSV row each. */
    std::vector<int> sweep{10, 20, 40, 60, 80, 100};
    /** Workload shape; n_queries is overridden per sweep point. */
    WorkloadGenConfig shape{};
    /** Solve repetitions per point; solve_ms is their median. */
    int repetitions = 5;
    SolveLimits limits{std::chrono::milliseconds{10000}, 0};
    CandidateOptions cand_opts{};
};

struct BenchPoint {
    BenchRow row;
    IlpSolution shared;   // the multi-query solve behind the row
};

/** Sweeps query counts over one generated workload family. Per point: the sum
 *  of per-query optima, the shared optimum seeded with that union (so shared
 *  never exceeds individual even on timeout), model sizes, and solve time. */
std::vector<BenchPoint> run_bench(const BenchConfig& cfg);

std::vector<BenchRow> bench_rows(const std::vector<BenchPoint>& points);

}  // namespace mqjoin
