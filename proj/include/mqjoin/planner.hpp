#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "mqjoin/catalog.hpp"

namespace mqjoin {

/** Connected join fragment: a base relation, or a proper connected subset of
 *  some query's relations together with the predicates internal to it.
 *  Fragments with equal relation sets and equal predicates are merged. */
struct SubJoin {
    int id = -1;
    RelSet relations;
    std::vector<Predicate> predicates;  // internal to `relations`, sorted
    std::set<int> defining_queries;     // indices into Workload::queries
    std::string name;                   // relation names joined in ascending name order

    bool is_base() const { return relations.count() == 1; }
    RelId base_rel() const { return relations.members().front(); }
};

/** All join fragments of a workload plus their partition-attribute candidates. */
class SubJoinSet {
  public:
    static SubJoinSet enumerate(const Workload& w);

    const SubJoin& at(int id) const { return subjoins_.at(id); }
    size_t size() const { return subjoins_.size(); }
    const std::vector<SubJoin>& all() const { return subjoins_; }

    /** id of the base fragment for relation r, or -1 if r is unqueried. */
    int base_id(RelId r) const;

    /** id of the fragment with exactly this shape, or -1. */
    int find(const RelSet& rels, const std::vector<Predicate>& preds) const;

    /** Attributes usable to partition this fragment's store: attributes inside
     *  the fragment joined by some query to a relation outside it.
     *  Ascending by (relation name, attribute name). */
    const std::vector<AttrRef>& partition_candidates(int id) const;

  private:
    std::vector<SubJoin> subjoins_;
    std::map<std::pair<RelSet, std::vector<Predicate>>, int> index_;
    std::vector<std::vector<AttrRef>> candidates_;
};

/** One hop of a probe order: the fragment store probed, the partition
 *  attribute of that store, and the predicates linking it to the prefix. */
struct Hop {
    int subjoin = -1;
    AttrRef partition{};
    std::vector<Predicate> links;  // sorted

    bool operator==(const Hop& o) const {
        return subjoin == o.subjoin && partition == o.partition && links == o.links;
    }
    bool operator<(const Hop& o) const {
        if (subjoin != o.subjoin) return subjoin < o.subjoin;
        if (!(partition == o.partition)) return partition < o.partition;
        return links < o.links;
    }
};

/** Probe order before partition attributes are chosen. */
struct ProbeOrder {
    RelId start = 0;
    std::vector<int> hops;  // SubJoin ids; disjoint, covering target minus start
};

/** Interned probe-order prefix: the unit of cost and of cross-query sharing. */
struct Step {
    int id = -1;
    RelId start = 0;
    std::vector<Hop> hops;
    RelSet head_before;                        // relations covered before the last hop
    std::vector<Predicate> internal_before;    // predicates internal to head_before
    double cost = 0.0;                         // filled by CostModel
    std::string var_name;                      // ILP y-variable name
};

class StepRegistry {
  public:
    /** Interns the prefix ending in `hops`; returns the shared step id. */
    int intern(const Workload& w, RelId start, const std::vector<Hop>& hops,
               const RelSet& head_before, const std::vector<Predicate>& internal_before);
    const Step& at(int id) const { return steps_.at(id); }
    Step& at(int id) { return steps_.at(id); }
    size_t size() const { return steps_.size(); }
    const std::vector<Step>& all() const { return steps_; }

  private:
    std::map<std::pair<RelId, std::vector<Hop>>, int> index_;
    std::vector<Step> steps_;
};

/** Probe order with partition attributes on every hop; the ILP's unit of choice. */
struct PartitionedOrder {
    int query = -1;    // index into Workload::queries; -1 for fragment-producing orders
    int target = -1;   // SubJoin id this order materializes; -1 for query orders
    RelId start = 0;
    std::vector<Hop> hops;
    std::vector<int> steps;  // steps[j] = prefix of length j+1
    double pcost = 0.0;      // filled by CostModel
    std::string var_name;    // ILP x-variable name
};

/** One-of group of candidates: all orders for a (query, start) pair, or all
 *  orders producing a fragment from one of its input relations. */
struct Slot {
    int query = -1;   // -1 for fragment slots
    int target = -1;  // SubJoin id for fragment slots, else -1
    RelId start = 0;
    std::vector<int> orders;  // indices into CandidateSet::orders
};

struct CandidateOptions {
    /** Allow multi-relation fragments as hops (otherwise base relations only). */
    bool allow_mir_hops = true;
    /** Keep only the first partition choice per hop instead of the full
     *  cartesian expansion. */
    bool single_partition_variant = false;
};

/** Complete optimizer input: every candidate order, interned steps, slots. */
struct CandidateSet {
    std::vector<PartitionedOrder> orders;
    StepRegistry steps;
    std::vector<Slot> slots;
    /** Fragment id -> slot indices of its input slots (one per base relation). */
    std::map<int, std::vector<size_t>> fragment_slots;
    /** Fragment id -> number of relations it spans. */
    std::map<int, size_t> fragment_size;
};

/** All covering hop sequences for `q` from `start`, lexicographic by hop name. */
std::vector<ProbeOrder> construct_probe_orders(const Workload& w, const Query& q,
                                               const SubJoinSet& sj, RelId start,
                                               bool allow_mir_hops);

/** Fragments extending `head` within `q`: disjoint, linked by >=1 predicate. */
std::vector<int> joinable(const Workload& w, const Query& q, const SubJoinSet& sj,
                          const RelSet& head, bool allow_mir_hops);

/** Orders producing fragment `target` from each of its base relations,
 *  grouped per start relation (ascending by name). */
std::map<RelId, std::vector<ProbeOrder>> subquery_probe_orders(const Workload& w,
                                                               const SubJoinSet& sj,
                                                               int target,
                                                               bool allow_mir_hops);

/** Cartesian expansion of partition choices; first hop varies fastest. */
std::vector<std::vector<AttrRef>> partition_assignments(const SubJoinSet& sj,
                                                        const ProbeOrder& order,
                                                        bool single_variant);

/** Builds the full candidate set for a workload. */
CandidateSet build_candidates(const Workload& w, const SubJoinSet& sj,
                              const CandidateOptions& opts);

/** Candidate set restricted to the given query indices (for per-query optima). */
CandidateSet build_candidates_for(const Workload& w, const SubJoinSet& sj,
                                  const CandidateOptions& opts,
                                  const std::vector<int>& query_indices);

/** Recomputes hop links and interns step ids for an order whose hops carry
 *  only fragment and partition (e.g. parsed from a plan file). `context` is
 *  the query being answered, or a synthesized query carrying the fragment's
 *  predicates for fragment-producing orders. */
void finalize_order(const Workload& w, const SubJoinSet& sj, const Query& context,
                    StepRegistry& steps, PartitionedOrder& order);

/** Human-readable step signature, e.g. "S>T[T.b]{S.b=T.b}". */
std::string step_signature(const Workload& w, const SubJoinSet& sj, const Step& s);

/** Human-readable order signature; stable across candidate rebuilds. */
std::string order_signature(const Workload& w, const SubJoinSet& sj,
                            const PartitionedOrder& o);

}  // namespace mqjoin
