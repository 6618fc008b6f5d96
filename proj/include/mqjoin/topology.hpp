#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mqjoin/ilp.hpp"

namespace mqjoin {

/** Stable identity of a tuple container. Plan stores are keyed by fragment
 *  and partition attribute; capture stores, which retain every arrival of a
 *  relation for statistics-free bootstrap, are keyed by relation. */
struct StoreKey {
    int subjoin = -1;     // -1 for capture stores
    RelId capture_rel = 0;
    AttrRef partition{};

    bool is_capture() const { return subjoin < 0; }
    bool operator<(const StoreKey& o) const {
        if (subjoin != o.subjoin) return subjoin < o.subjoin;
        if (capture_rel != o.capture_rel) return capture_rel < o.capture_rel;
        return partition < o.partition;
    }
    bool operator==(const StoreKey& o) const {
        return subjoin == o.subjoin && capture_rel == o.capture_rel &&
               partition == o.partition;
    }
};

struct TopoStore {
    StoreKey key;
    std::string label;  // e.g. "ST[S.b]" or "capture:R"
    int parallelism = 1;
    RelSet relations;
    /** Stored-attribute combinations probe rules look up; one index each. */
    std::vector<std::vector<AttrRef>> index_specs;
};

struct TopoRule {
    enum class Kind { Store, Probe };
    Kind kind = Kind::Probe;
    std::string in_edge;
    StoreKey store;  // executor store
    /** Attribute of the incoming tuple whose value selects the worker;
     *  nullopt broadcasts to every worker of the store. */
    std::optional<AttrRef> route_attr;
    std::vector<Predicate> predicates;      // probe: incoming vs stored
    std::vector<AttrRef> lookup_incoming;   // probe: incoming-side index key
    std::vector<AttrRef> lookup_stored;     // probe: stored-side index key
    std::vector<std::string> out_edges;     // edges and "output:<query-id>"
    int step = -1;                          // producing step id, -1 for store rules
};

/** Immutable compiled routing: every edge label resolves to exactly one rule. */
struct Topology {
    std::vector<TopoStore> stores;
    std::map<StoreKey, size_t> store_index;
    std::map<std::string, TopoRule> rules;
    /** Arrival fan-out per relation, in dispatch order. */
    std::map<RelId, std::vector<std::string>> source_edges;
    std::string digest;

    const TopoStore& store(const StoreKey& k) const {
        return stores.at(store_index.at(k));
    }
};

/** The orders a topology executes: one per (query, start) plus the producing
 *  orders of every materialized fragment. */
struct PlanOrders {
    std::vector<PartitionedOrder> query_orders;
    std::vector<PartitionedOrder> fragment_orders;
    double objective = 0.0;
    std::string status = "optimal";
};

/** Copies the chosen orders out of a candidate set. */
PlanOrders plan_orders_from_selection(const CandidateSet& cs, const SelectedPlan& plan);

/** Compiles the selected orders into stores, edges, and rules. Every probe
 *  route reaches exactly the workers the cost model's broadcast factor
 *  predicts for the same hop. */
Topology compile_topology(const Workload& w, const SubJoinSet& sj, const CostModel& cost,
                          const StepRegistry& steps, const PlanOrders& plan);

/** Mini-topology answering one query from the capture stores: one base-only
 *  probe path per start relation, built from the query's own predicates so it
 *  works against topologies compiled before the query existed. Used when a
 *  query registers against data that arrived before its plan existed. */
Topology compile_bootstrap_overlay(const Workload& w, const Query& q,
                                   size_t query_ordinal);

/** Worker indices a value-routed or broadcast message reaches. */
std::vector<int> partition_route(const std::optional<std::string>& routed_value,
                                 int parallelism);

}  // namespace mqjoin
