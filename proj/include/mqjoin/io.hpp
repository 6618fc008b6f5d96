#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mqjoin/topology.hpp"

namespace mqjoin {

/** One stream arrival. `seq` is the position in the trace file and breaks
 *  timestamp ties together with the relation name. */
struct TraceEvent {
    std::string rel;
    int64_t ts = 0;
    std::map<std::string, std::string> attrs;
    uint64_t seq = 0;
};

/** One emitted join result: the constituent arrivals in ascending relation
 *  name order, stamped with the tick that completed them. */
struct ResultRecord {
    std::string query;
    int64_t ts = 0;
    std::vector<TraceEvent> tuples;

    bool operator<(const ResultRecord& o) const;
    bool operator==(const ResultRecord& o) const;
};

/** Cumulative counter snapshot taken at the end of an epoch. */
struct MetricsRow {
    int64_t epoch = 0;
    std::string digest;
    uint64_t probe_messages = 0;
    uint64_t tuples_stored = 0;
    uint64_t results_total = 0;
    std::map<std::string, uint64_t> results;        // per query id
    std::map<std::string, uint64_t> arrivals;       // per relation, this epoch
    /** Per predicate "R.a=S.b": pairs observed, matches observed, estimate. */
    std::map<std::string, std::array<double, 3>> predicates;
};

// Workload files.
Workload parse_workload(const std::string& json_text);
Workload load_workload(const std::string& path);
std::string workload_to_json(const Workload& w);

// Plan files.
std::string plan_to_json(const Workload& w, const SubJoinSet& sj, const PlanOrders& plan);
PlanOrders parse_plan(const std::string& json_text, const Workload& w,
                      const SubJoinSet& sj, StepRegistry& steps);
PlanOrders load_plan(const std::string& path, const Workload& w, const SubJoinSet& sj,
                     StepRegistry& steps);

// Trace files, one JSON object per line.
std::vector<TraceEvent> parse_trace(const std::string& text, const Workload& w);
std::vector<TraceEvent> load_trace(const std::string& path, const Workload& w);
std::string trace_to_jsonl(const std::vector<TraceEvent>& events);

// Result and metrics files, one JSON object per line.
std::string results_to_jsonl(const std::vector<ResultRecord>& results);
std::vector<ResultRecord> parse_results(const std::string& text);
std::string metrics_to_jsonl(const std::vector<MetricsRow>& rows);

// Benchmark CSV.
struct BenchRow {
    int n_q = 0;
    double individual_cost = 0.0;
    double mqo_cost = 0.0;
    uint64_t variables = 0;
    uint64_t probe_orders = 0;
    double solve_ms = 0.0;
};
std::string bench_to_csv(const std::vector<BenchRow>& rows);
std::vector<BenchRow> parse_bench_csv(const std::string& text);

// Small file helpers; failures throw ValidationError naming the path.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace mqjoin
