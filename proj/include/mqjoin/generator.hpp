#pragma once

#include <cstdint>

#include "mqjoin/io.hpp"

namespace mqjoin {

/** Synthetic workload shape: a relation pool with a common rate and random
 *  tree-shaped equi-join queries over it. Pure function of its fields. */
struct WorkloadGenConfig {
    int n_relations = 10;
    int attrs_per_relation = 3;
    int n_queries = 10;
    int query_size = 3;
    double rate = 100.0;
    double window = 1.0;
    double parallelism = 1.0;
    uint64_t seed = 1;
    /** Attempts per query before giving up on finding a distinct shape. */
    int retry_bound = 200;
};

/** Random workload: every predicate gets selectivity 1/rate; queries whose
 *  shape duplicates an earlier one are redrawn. Throws ValidationError
 *  ("GenerationExhausted...") when the retry bound is hit. */
Workload gen_workload(const WorkloadGenConfig& cfg);

struct TraceGenConfig {
    int64_t duration = 100;  // ticks, events at 0..duration-1
    uint64_t seed = 1;
};

/** Deterministic trace: each relation arrives at its configured rate; joined
 *  attributes draw uniformly from a domain sized so the expected match rate
 *  equals the configured selectivity. */
std::vector<TraceEvent> gen_trace(const Workload& w, const TraceGenConfig& cfg);

}  // namespace mqjoin
