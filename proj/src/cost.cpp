#include "mqjoin/cost.hpp"

#include <algorithm>
#include <map>

namespace mqjoin {

double CostModel::estimate_cardinality(const RelSet& rels,
                                       const std::vector<Predicate>& preds) const {
    if (rels.empty()) throw InternalError("cardinality of empty relation set");
    double card = 1.0;
    for (RelId r : rels.members()) card *= stats_->rate(r) * workload_->rel(r).window;
    for (const auto& p : preds) card *= stats_->selectivity(p);
    return card;
}

namespace {

/** Union-find over attribute references. */
class AttrClasses {
  public:
    AttrRef find(const AttrRef& a) {
        auto it = parent_.find(a);
        if (it == parent_.end()) {
            parent_[a] = a;
            return a;
        }
        if (it->second == a) return a;
        AttrRef root = find(it->second);
        parent_[a] = root;
        return root;
    }
    void unite(const AttrRef& a, const AttrRef& b) {
        AttrRef ra = find(a), rb = find(b);
        if (!(ra == rb)) parent_[rb] = ra;
    }

  private:
    std::map<AttrRef, AttrRef> parent_;
};

}  // namespace

std::optional<AttrRef> CostModel::routing_attribute(
    const RelSet& head, const std::vector<Predicate>& head_internals,
    const Hop& hop) const {
    AttrClasses classes;
    for (const auto& p : head_internals) classes.unite(p.left, p.right);
    for (const auto& p : hop.links) classes.unite(p.left, p.right);
    for (const auto& p : subjoins_->at(hop.subjoin).predicates) classes.unite(p.left, p.right);
    AttrRef target = classes.find(hop.partition);
    std::optional<AttrRef> best;
    for (const auto& preds : {head_internals, hop.links}) {
        for (const auto& p : preds) {
            for (const AttrRef& a : {p.left, p.right}) {
                if (!head.contains(a.rel)) continue;
                if (!(classes.find(a) == target)) continue;
                if (!best || a < *best) best = a;
            }
        }
    }
    return best;
}

double CostModel::store_parallelism(int subjoin) const {
    double p = 1.0;
    for (RelId r : subjoins_->at(subjoin).relations.members())
        p = std::max(p, workload_->rel(r).parallelism);
    return p;
}

double CostModel::broadcast_factor(const RelSet& head,
                                   const std::vector<Predicate>& head_internals,
                                   const Hop& hop) const {
    if (routing_attribute(head, head_internals, hop)) return 1.0;
    return store_parallelism(hop.subjoin);
}

double CostModel::step_cost(const Step& s) const {
    size_t j = s.hops.size();
    if (j == 0) throw InternalError("step with no hops");
    double card = estimate_cardinality(s.head_before, s.internal_before);
    double factor = broadcast_factor(s.head_before, s.internal_before, s.hops.back());
    return card * (1.0 / static_cast<double>(j)) * factor;
}

double CostModel::order_cost(const PartitionedOrder& o, const StepRegistry& steps) const {
    double total = 0.0;
    for (int sid : o.steps) total += step_cost(steps.at(sid));
    return total;
}

void CostModel::price(CandidateSet& cs) const {
    for (auto& s : cs.steps.all()) cs.steps.at(s.id).cost = step_cost(s);
    for (auto& o : cs.orders) {
        double total = 0.0;
        for (int sid : o.steps) total += cs.steps.at(sid).cost;
        o.pcost = total;
    }
}

double query_pcost(const std::vector<const PartitionedOrder*>& chosen) {
    double total = 0.0;
    for (const auto* o : chosen) total += o->pcost;
    return total;
}

double canonical_step_sum(const std::vector<double>& costs) {
    std::vector<double> sorted = costs;
    std::sort(sorted.begin(), sorted.end());
    double total = 0.0;
    for (double c : sorted) total += c;
    return total;
}

}  // namespace mqjoin
