#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mqjoin/common.hpp"

namespace mqjoin {

/** Stream relation: schema plus arrival-rate, window, and parallelism hints. */
struct Relation {
    std::string name;
    std::vector<std::string> attributes;
    double rate = 0.0;      // tuples per time unit
    double window = 0.0;    // window length in time units
    double parallelism = 1; // number of hash partitions available

    std::optional<uint32_t> attr_index(const std::string& attr) const {
        for (uint32_t i = 0; i < attributes.size(); ++i)
            if (attributes[i] == attr) return i;
        return std::nullopt;
    }
};

/** Equi-join predicate between two attribute references, with selectivity.
 *  Stored normalized so that left < right. */
struct Predicate {
    AttrRef left;
    AttrRef right;
    double selectivity = 1.0;

    bool touches(RelId r) const { return left.rel == r || right.rel == r; }
    bool operator==(const Predicate& o) const { return left == o.left && right == o.right; }
    bool operator<(const Predicate& o) const {
        return left != o.left ? left < o.left : right < o.right;
    }
};

/** Multi-way equi-join query over a set of relations. */
struct Query {
    std::string id;
    RelSet relations;
    std::vector<Predicate> predicates;  // sorted, normalized
};

/** Parsed and validated workload: relation catalog plus query set. */
struct Workload {
    std::vector<Relation> relations;            // index == RelId
    std::map<std::string, RelId> relation_ids;  // name -> id
    std::vector<Query> queries;                 // in input order, duplicates removed

    const Relation& rel(RelId id) const { return relations.at(id); }
    RelId rel_id(const std::string& name) const;
    const Query* find_query(const std::string& id) const;

    /** Predicates of `q` whose endpoints both lie inside `set`. */
    static std::vector<Predicate> internal_predicates(const Query& q, const RelSet& set);

    /** Adjacent relations of `r` in the join graph of `q`, ascending. */
    static std::vector<RelId> neighbors(const Query& q, RelId r);

    /** True when the join graph of `q` restricted to `set` is connected. */
    static bool is_connected(const Query& q, const RelSet& set);
};

/** Checks structural validity; throws ValidationError naming the offense.
 *  Exact duplicate queries (same relations, predicates, and selectivities)
 *  are removed keeping the first; pass dedup_exact = false to keep them,
 *  e.g. when the same query text is registered under several live ids. */
void validate_workload(Workload& w);
void validate_workload(Workload& w, bool dedup_exact);

/** Per-predicate selectivity and per-relation rate estimates used by the cost
 *  model. Falls back to the workload's configured values where no observed
 *  override is present. */
class Statistics {
  public:
    explicit Statistics(const Workload* w) : workload_(w) {}

    double selectivity(const Predicate& p) const;
    void set_selectivity(const AttrRef& left, const AttrRef& right, double sel);
    bool has_override(const AttrRef& left, const AttrRef& right) const;

    double rate(RelId r) const;
    void set_rate(RelId r, double rate);

    /** Default selectivity for a predicate with no estimate at all. */
    static double default_selectivity(const Relation& left_rel) {
        return 1.0 / std::max(1.0, left_rel.rate * left_rel.window);
    }

    bool operator==(const Statistics& o) const {
        return sel_overrides_ == o.sel_overrides_ && rate_overrides_ == o.rate_overrides_;
    }

  private:
    const Workload* workload_;
    std::map<std::pair<AttrRef, AttrRef>, double> sel_overrides_;
    std::map<RelId, double> rate_overrides_;
};

}  // namespace mqjoin
