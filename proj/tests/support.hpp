#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mqjoin/catalog.hpp"
#include "mqjoin/io.hpp"
#include "mqjoin/planner.hpp"

namespace mqjoin::test {

inline AttrRef attr(const Workload& w, const std::string& rel, const std::string& name) {
    RelId r = w.rel_id(rel);
    auto idx = w.rel(r).attr_index(name);
    if (!idx) throw std::runtime_error("test attribute " + rel + "." + name);
    return AttrRef{r, *idx};
}

inline Predicate pred(const Workload& w, const std::string& lr, const std::string& la,
                      const std::string& rr, const std::string& ra, double sel) {
    Predicate p{attr(w, lr, la), attr(w, rr, ra), sel};
    if (p.right < p.left) std::swap(p.left, p.right);
    return p;
}

/** Chain R(b) - S(b,c) - T(c,d) - U(d) with two overlapping three-way
 *  queries; the running example across the suite. Windows 1. */
inline Workload two_chain_workload(double rate = 100.0) {
    Workload w;
    w.relations = {
        {"R", {"b"}, rate, 1.0, 1},
        {"S", {"b", "c"}, rate, 1.0, 1},
        {"T", {"c", "d"}, rate, 1.0, 1},
        {"U", {"d"}, rate, 1.0, 1},
    };
    for (RelId i = 0; i < w.relations.size(); ++i) w.relation_ids[w.relations[i].name] = i;

    Query q1;
    q1.id = "q1";
    q1.relations = RelSet::of({w.rel_id("R"), w.rel_id("S"), w.rel_id("T")});
    q1.predicates = {pred(w, "R", "b", "S", "b", 0.01), pred(w, "S", "c", "T", "c", 0.015)};
    Query q2;
    q2.id = "q2";
    q2.relations = RelSet::of({w.rel_id("S"), w.rel_id("T"), w.rel_id("U")});
    q2.predicates = {pred(w, "S", "c", "T", "c", 0.015), pred(w, "T", "d", "U", "d", 0.01)};
    w.queries = {q1, q2};
    validate_workload(w);
    return w;
}

/** Chain R(a) - S(a,b) - T(b) with S spread over five workers; probes into S
 *  keyed on S.b cannot be routed and must reach all five. */
inline Workload broadcast_chain_workload(double rate = 100.0, double sel = 0.01) {
    Workload w;
    w.relations = {
        {"R", {"a"}, rate, 1.0, 1},
        {"S", {"a", "b"}, rate, 1.0, 5},
        {"T", {"b"}, rate, 1.0, 1},
    };
    for (RelId i = 0; i < w.relations.size(); ++i) w.relation_ids[w.relations[i].name] = i;

    Query q;
    q.id = "q1";
    q.relations = RelSet::of({0, 1, 2});
    q.predicates = {pred(w, "R", "a", "S", "a", sel), pred(w, "S", "b", "T", "b", sel)};
    w.queries = {q};
    validate_workload(w);
    return w;
}

inline int fragment_named(const SubJoinSet& sj, const std::string& name) {
    for (const auto& s : sj.all())
        if (s.name == name) return s.id;
    return -1;
}

inline int slot_index(const CandidateSet& cs, int query, RelId start) {
    for (size_t i = 0; i < cs.slots.size(); ++i)
        if (cs.slots[i].query == query && cs.slots[i].start == start)
            return static_cast<int>(i);
    return -1;
}

inline int fragment_slot_index(const CandidateSet& cs, int target, RelId start) {
    for (size_t i = 0; i < cs.slots.size(); ++i)
        if (cs.slots[i].target == target && cs.slots[i].start == start)
            return static_cast<int>(i);
    return -1;
}

/** Order index whose signature matches, or -1. */
inline int order_with_signature(const Workload& w, const SubJoinSet& sj,
                                const CandidateSet& cs, const std::string& sig) {
    for (size_t i = 0; i < cs.orders.size(); ++i)
        if (order_signature(w, sj, cs.orders[i]) == sig) return static_cast<int>(i);
    return -1;
}

/** Random trace over the chain workload with `per_tick` arrivals per relation
 *  and tick. Value domains match the configured selectivities; during
 *  [skew_from, skew_to) every S.c and T.c collapses onto one value. */
inline std::vector<TraceEvent> chain_trace(int64_t duration, int per_tick, uint64_t seed,
                                           int64_t skew_from = -1, int64_t skew_to = -1) {
    std::mt19937_64 rng(seed);
    auto draw = [&](uint64_t n) { return rng() % n; };
    std::vector<TraceEvent> evs;
    auto push = [&](const char* rel, int64_t ts,
                    std::map<std::string, std::string> attrs) {
        TraceEvent e;
        e.rel = rel;
        e.ts = ts;
        e.attrs = std::move(attrs);
        e.seq = evs.size();
        evs.push_back(std::move(e));
    };
    for (int64_t t = 0; t < duration; ++t) {
        bool skew = t >= skew_from && t < skew_to;
        auto join_val = [&]() {
            std::string v = "b" + std::to_string(draw(67));
            return skew ? std::string("b0") : v;
        };
        for (int k = 0; k < per_tick; ++k) {
            push("R", t, {{"b", "a" + std::to_string(draw(100))}});
            push("S", t, {{"b", "a" + std::to_string(draw(100))}, {"c", join_val()}});
            push("T", t, {{"c", join_val()}, {"d", "c" + std::to_string(draw(100))}});
            push("U", t, {{"d", "c" + std::to_string(draw(100))}});
        }
    }
    return evs;
}

/** Builds a trace in insertion order, assigning sequence numbers. */
struct TraceBuilder {
    std::vector<TraceEvent> events;

    TraceBuilder& add(const std::string& rel, int64_t ts,
                      std::map<std::string, std::string> attrs) {
        TraceEvent ev;
        ev.rel = rel;
        ev.ts = ts;
        ev.attrs = std::move(attrs);
        ev.seq = events.size();
        events.push_back(std::move(ev));
        return *this;
    }
};

inline std::vector<ResultRecord> sorted_results(std::vector<ResultRecord> rs) {
    std::sort(rs.begin(), rs.end());
    return rs;
}

inline bool same_results(std::vector<ResultRecord> a, std::vector<ResultRecord> b) {
    if (a.size() != b.size()) return false;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    for (size_t i = 0; i < a.size(); ++i)
        if (!(a[i] == b[i])) return false;
    return true;
}

}  // namespace mqjoin::test
