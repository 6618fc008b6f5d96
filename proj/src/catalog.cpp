#include "mqjoin/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <tuple>

namespace mqjoin {

RelId Workload::rel_id(const std::string& name) const {
    auto it = relation_ids.find(name);
    if (it == relation_ids.end()) throw ValidationError("UnknownRelation: " + name);
    return it->second;
}

const Query* Workload::find_query(const std::string& id) const {
    for (const auto& q : queries)
        if (q.id == id) return &q;
    return nullptr;
}

std::vector<Predicate> Workload::internal_predicates(const Query& q, const RelSet& set) {
    std::vector<Predicate> out;
    for (const auto& p : q.predicates)
        if (set.contains(p.left.rel) && set.contains(p.right.rel)) out.push_back(p);
    return out;
}

std::vector<RelId> Workload::neighbors(const Query& q, RelId r) {
    std::set<RelId> out;
    for (const auto& p : q.predicates) {
        if (p.left.rel == r) out.insert(p.right.rel);
        if (p.right.rel == r) out.insert(p.left.rel);
    }
    return {out.begin(), out.end()};
}

bool Workload::is_connected(const Query& q, const RelSet& set) {
    auto members = set.members();
    if (members.empty()) return false;
    if (members.size() == 1) return true;
    RelSet seen = RelSet::of({members[0]});
    std::deque<RelId> frontier{members[0]};
    while (!frontier.empty()) {
        RelId r = frontier.front();
        frontier.pop_front();
        for (RelId n : neighbors(q, r)) {
            if (set.contains(n) && !seen.contains(n)) {
                seen.add(n);
                frontier.push_back(n);
            }
        }
    }
    return seen == set;
}

void validate_workload(Workload& w) { validate_workload(w, true); }

void validate_workload(Workload& w, bool dedup_exact) {
    if (w.relations.empty()) throw ValidationError("workload has no relations");

    std::set<std::string> rel_names;
    for (RelId i = 0; i < w.relations.size(); ++i) {
        const auto& r = w.relations[i];
        if (r.name.empty()) throw ValidationError("relation with empty name");
        if (!rel_names.insert(r.name).second)
            throw ValidationError("duplicate relation name: " + r.name);
        if (r.attributes.empty())
            throw ValidationError("relation " + r.name + " has no attributes");
        std::set<std::string> attrs;
        for (const auto& a : r.attributes)
            if (!attrs.insert(a).second)
                throw ValidationError("relation " + r.name + " duplicates attribute " + a);
        if (r.rate <= 0) throw ValidationError("relation " + r.name + " needs rate > 0");
        if (r.window <= 0) throw ValidationError("relation " + r.name + " needs window > 0");
        if (r.parallelism < 1 || r.parallelism != std::floor(r.parallelism))
            throw ValidationError("relation " + r.name +
                                  " needs integer parallelism >= 1");
        w.relation_ids[r.name] = i;
    }

    using QueryShape = std::pair<RelSet, std::vector<std::tuple<AttrRef, AttrRef, double>>>;
    std::set<std::string> query_ids;
    std::set<QueryShape> seen_shapes;
    std::vector<Query> kept;
    for (auto& q : w.queries) {
        if (q.id.empty()) throw ValidationError("query with empty id");
        if (!query_ids.insert(q.id).second)
            throw ValidationError("duplicate query id: " + q.id);
        if (q.relations.count() < 2)
            throw ValidationError("query " + q.id + " needs at least two relations");
        for (auto& p : q.predicates) {
            if (p.right < p.left) std::swap(p.left, p.right);
            if (p.left.rel == p.right.rel)
                throw ValidationError("SelfJoin: query " + q.id + " joins relation " +
                                      w.rel(p.left.rel).name + " with itself");
            if (!q.relations.contains(p.left.rel) || !q.relations.contains(p.right.rel))
                throw ValidationError("query " + q.id +
                                      " has a predicate over a relation outside its list");
            if (!(p.selectivity > 0.0) || p.selectivity > 1.0)
                throw ValidationError("query " + q.id + " needs selectivity in (0, 1]");
        }
        std::sort(q.predicates.begin(), q.predicates.end());
        q.predicates.erase(std::unique(q.predicates.begin(), q.predicates.end()),
                           q.predicates.end());
        if (!Workload::is_connected(q, q.relations))
            throw ValidationError("DisconnectedQuery: query " + q.id +
                                  " has relations unreachable through its predicates");
        QueryShape shape{q.relations, {}};
        for (const auto& p : q.predicates)
            shape.second.emplace_back(p.left, p.right, p.selectivity);
        if (!dedup_exact || seen_shapes.insert(shape).second) kept.push_back(q);
    }
    w.queries = std::move(kept);
}

double Statistics::selectivity(const Predicate& p) const {
    auto it = sel_overrides_.find({p.left, p.right});
    if (it != sel_overrides_.end()) return it->second;
    return p.selectivity;
}

void Statistics::set_selectivity(const AttrRef& left, const AttrRef& right, double sel) {
    AttrRef a = left, b = right;
    if (b < a) std::swap(a, b);
    sel_overrides_[{a, b}] = sel;
}

bool Statistics::has_override(const AttrRef& left, const AttrRef& right) const {
    AttrRef a = left, b = right;
    if (b < a) std::swap(a, b);
    return sel_overrides_.count({a, b}) > 0;
}

double Statistics::rate(RelId r) const {
    auto it = rate_overrides_.find(r);
    if (it != rate_overrides_.end()) return it->second;
    return workload_->rel(r).rate;
}

void Statistics::set_rate(RelId r, double rate) { rate_overrides_[r] = rate; }

}  // namespace mqjoin
