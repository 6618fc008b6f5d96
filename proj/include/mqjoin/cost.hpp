#pragma once

#include <optional>

#include "mqjoin/planner.hpp"

namespace mqjoin {

/** Probe-cost model over a candidate set: expected tuples sent per time unit.
 *
 *  The cost of step j of an order is the expected cardinality of the join of
 *  the first j relation sets, divided by j (only chains whose start tuple
 *  arrives last trigger that probe), times the broadcast factor of the j-th
 *  target store. */
class CostModel {
  public:
    CostModel(const Workload& w, const SubJoinSet& sj, const Statistics& stats)
        : workload_(&w), subjoins_(&sj), stats_(&stats) {}

    /** Product of rate*window over relations times selectivities of predicates. */
    double estimate_cardinality(const RelSet& rels,
                                const std::vector<Predicate>& preds) const;

    /** Head attribute whose value determines the target partition, if any:
     *  an attribute of the head equal to the hop's partition attribute under
     *  the equalities known to hold (head internals, link predicates, and the
     *  hop fragment's internal predicates). */
    std::optional<AttrRef> routing_attribute(const RelSet& head,
                                             const std::vector<Predicate>& head_internals,
                                             const Hop& hop) const;

    /** Number of workers a probe into the hop's store must reach: 1 when the
     *  partition value is determined, otherwise the store's parallelism. */
    double broadcast_factor(const RelSet& head,
                            const std::vector<Predicate>& head_internals,
                            const Hop& hop) const;

    /** Worker count of the store for this fragment (max over its relations). */
    double store_parallelism(int subjoin) const;

    double step_cost(const Step& s) const;
    double order_cost(const PartitionedOrder& o, const StepRegistry& steps) const;

    /** Fills every step's cost and every order's pcost in place. */
    void price(CandidateSet& cs) const;

    const Workload& workload() const { return *workload_; }
    const SubJoinSet& subjoins() const { return *subjoins_; }

  private:
    const Workload* workload_;
    const SubJoinSet* subjoins_;
    const Statistics* stats_;
};

/** Sum of the given orders' pcosts (unshared cost of one query's selection). */
double query_pcost(const std::vector<const PartitionedOrder*>& chosen);

/** Canonical sum of the distinct selected steps' costs: values sorted
 *  ascending before summation so equal step sets sum bit-identically. */
double canonical_step_sum(const std::vector<double>& costs);

}  // namespace mqjoin
