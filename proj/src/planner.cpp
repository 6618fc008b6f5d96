#include "mqjoin/planner.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <deque>

namespace mqjoin {

namespace {

std::string fragment_name(const Workload& w, const RelSet& rels) {
    std::vector<std::string> names;
    for (RelId r : rels.members()) names.push_back(w.rel(r).name);
    std::sort(names.begin(), names.end());
    std::string out;
    for (const auto& n : names) out += n;
    return out;
}

std::string render_attr(const Workload& w, const AttrRef& a) {
    return w.rel(a.rel).name + "." + w.rel(a.rel).attributes.at(a.attr);
}

std::string render_predicates(const Workload& w, const std::vector<Predicate>& preds) {
    std::string out;
    for (size_t i = 0; i < preds.size(); ++i) {
        if (i) out += ",";
        out += render_attr(w, preds[i].left) + "=" + render_attr(w, preds[i].right);
    }
    return out;
}

std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '_') ? c : '_';
    if (out.empty() || std::isdigit(static_cast<unsigned char>(out[0]))) out = "v" + out;
    return out;
}

}  // namespace

SubJoinSet SubJoinSet::enumerate(const Workload& w) {
    SubJoinSet out;
    std::map<std::pair<RelSet, std::vector<Predicate>>, std::set<int>> found;
    for (size_t qi = 0; qi < w.queries.size(); ++qi) {
        const Query& q = w.queries[qi];
        std::set<RelSet> seen;
        std::deque<RelSet> frontier;
        for (RelId r : q.relations.members()) {
            RelSet s = RelSet::of({r});
            seen.insert(s);
            frontier.push_back(s);
        }
        while (!frontier.empty()) {
            RelSet s = frontier.front();
            frontier.pop_front();
            found[{s, Workload::internal_predicates(q, s)}].insert(static_cast<int>(qi));
            for (RelId r : s.members()) {
                for (RelId n : Workload::neighbors(q, r)) {
                    if (s.contains(n)) continue;
                    RelSet grown = s;
                    grown.add(n);
                    if (grown == q.relations) continue;  // the full query is not a fragment
                    if (seen.insert(grown).second) frontier.push_back(grown);
                }
            }
        }
    }
    for (const auto& [key, queries] : found) {
        SubJoin sj;
        sj.relations = key.first;
        sj.predicates = key.second;
        sj.defining_queries = queries;
        sj.name = fragment_name(w, sj.relations);
        out.subjoins_.push_back(std::move(sj));
    }
    std::sort(out.subjoins_.begin(), out.subjoins_.end(),
              [](const SubJoin& a, const SubJoin& b) {
                  if (a.name != b.name) return a.name < b.name;
                  return a.predicates < b.predicates;
              });
    for (size_t i = 0; i < out.subjoins_.size(); ++i) {
        out.subjoins_[i].id = static_cast<int>(i);
        out.index_[{out.subjoins_[i].relations, out.subjoins_[i].predicates}] =
            static_cast<int>(i);
    }

    out.candidates_.resize(out.subjoins_.size());
    for (size_t i = 0; i < out.subjoins_.size(); ++i) {
        const SubJoin& m = out.subjoins_[i];
        std::set<AttrRef> attrs;
        for (const auto& q : w.queries) {
            for (const auto& p : q.predicates) {
                if (m.relations.contains(p.left.rel) && !m.relations.contains(p.right.rel))
                    attrs.insert(p.left);
                if (m.relations.contains(p.right.rel) && !m.relations.contains(p.left.rel))
                    attrs.insert(p.right);
            }
        }
        std::vector<AttrRef> ordered(attrs.begin(), attrs.end());
        std::sort(ordered.begin(), ordered.end(), [&](const AttrRef& a, const AttrRef& b) {
            const std::string& ra = w.rel(a.rel).name;
            const std::string& rb = w.rel(b.rel).name;
            if (ra != rb) return ra < rb;
            return w.rel(a.rel).attributes[a.attr] < w.rel(b.rel).attributes[b.attr];
        });
        out.candidates_[i] = std::move(ordered);
    }
    return out;
}

int SubJoinSet::base_id(RelId r) const {
    auto it = index_.find({RelSet::of({r}), {}});
    return it == index_.end() ? -1 : it->second;
}

int SubJoinSet::find(const RelSet& rels, const std::vector<Predicate>& preds) const {
    auto it = index_.find({rels, preds});
    return it == index_.end() ? -1 : it->second;
}

const std::vector<AttrRef>& SubJoinSet::partition_candidates(int id) const {
    return candidates_.at(id);
}

int StepRegistry::intern(const Workload& w, RelId start, const std::vector<Hop>& hops,
                         const RelSet& head_before,
                         const std::vector<Predicate>& internal_before) {
    (void)w;
    auto it = index_.find({start, hops});
    if (it != index_.end()) return it->second;
    Step s;
    s.id = static_cast<int>(steps_.size());
    s.start = start;
    s.hops = hops;
    s.head_before = head_before;
    s.internal_before = internal_before;
    index_[{start, hops}] = s.id;
    steps_.push_back(std::move(s));
    return steps_.back().id;
}

std::vector<int> joinable(const Workload& w, const Query& q, const SubJoinSet& sj,
                          const RelSet& head, bool allow_mir_hops) {
    (void)w;
    std::vector<int> out;
    for (const auto& m : sj.all()) {
        if (!allow_mir_hops && !m.is_base()) continue;
        if (!q.relations.contains_all(m.relations)) continue;
        if (m.relations.intersects(head)) continue;
        if (m.predicates != Workload::internal_predicates(q, m.relations)) continue;
        bool linked = false;
        for (const auto& p : q.predicates) {
            bool lm = m.relations.contains(p.left.rel), lh = head.contains(p.left.rel);
            bool rm = m.relations.contains(p.right.rel), rh = head.contains(p.right.rel);
            if ((lm && rh) || (rm && lh)) {
                linked = true;
                break;
            }
        }
        if (linked) out.push_back(m.id);
    }
    std::sort(out.begin(), out.end(), [&](int a, int b) {
        const SubJoin& sa = sj.at(a);
        const SubJoin& sb = sj.at(b);
        if (sa.name != sb.name) return sa.name < sb.name;
        return sa.predicates < sb.predicates;
    });
    return out;
}

namespace {

void extend_order(const Workload& w, const Query& q, const SubJoinSet& sj,
                  bool allow_mir_hops, RelSet head, std::vector<int>& hops, RelId start,
                  std::vector<ProbeOrder>& out) {
    if (head == q.relations) {
        out.push_back({start, hops});
        return;
    }
    for (int m : joinable(w, q, sj, head, allow_mir_hops)) {
        hops.push_back(m);
        extend_order(w, q, sj, allow_mir_hops, head.unite(sj.at(m).relations), hops, start,
                     out);
        hops.pop_back();
    }
}

}  // namespace

std::vector<ProbeOrder> construct_probe_orders(const Workload& w, const Query& q,
                                               const SubJoinSet& sj, RelId start,
                                               bool allow_mir_hops) {
    if (!q.relations.contains(start))
        throw InternalError("probe order start is not a relation of the query");
    std::vector<ProbeOrder> out;
    std::vector<int> hops;
    extend_order(w, q, sj, allow_mir_hops, RelSet::of({start}), hops, start, out);
    return out;
}

std::map<RelId, std::vector<ProbeOrder>> subquery_probe_orders(const Workload& w,
                                                               const SubJoinSet& sj,
                                                               int target,
                                                               bool allow_mir_hops) {
    const SubJoin& m = sj.at(target);
    std::map<RelId, std::vector<ProbeOrder>> out;
    if (m.is_base()) return out;
    Query synthetic;
    synthetic.id = "fragment:" + m.name;
    synthetic.relations = m.relations;
    synthetic.predicates = m.predicates;
    std::vector<RelId> inputs = m.relations.members();
    std::sort(inputs.begin(), inputs.end(),
              [&](RelId a, RelId b) { return w.rel(a).name < w.rel(b).name; });
    for (RelId r : inputs)
        out[r] = construct_probe_orders(w, synthetic, sj, r, allow_mir_hops);
    return out;
}

std::vector<std::vector<AttrRef>> partition_assignments(const SubJoinSet& sj,
                                                        const ProbeOrder& order,
                                                        bool single_variant) {
    std::vector<const std::vector<AttrRef>*> choices;
    size_t total = 1;
    for (int hop : order.hops) {
        const auto& c = sj.partition_candidates(hop);
        if (c.empty())
            throw InternalError("hop " + sj.at(hop).name + " has no partition candidate");
        choices.push_back(&c);
        if (!single_variant) total *= c.size();
    }
    std::vector<std::vector<AttrRef>> out;
    for (size_t idx = 0; idx < total; ++idx) {
        std::vector<AttrRef> pick;
        size_t rest = idx;
        for (const auto* c : choices) {
            pick.push_back((*c)[rest % c->size()]);
            rest /= c->size();
        }
        out.push_back(std::move(pick));
    }
    return out;
}

namespace {

std::vector<Predicate> link_predicates(const Query& q, const RelSet& head,
                                       const RelSet& hop_rels) {
    std::vector<Predicate> out;
    for (const auto& p : q.predicates) {
        bool lh = head.contains(p.left.rel), rh = head.contains(p.right.rel);
        bool lm = hop_rels.contains(p.left.rel), rm = hop_rels.contains(p.right.rel);
        if ((lh && rm) || (lm && rh)) out.push_back(p);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Predicate> merge_predicates(std::vector<Predicate> a,
                                        const std::vector<Predicate>& b) {
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
}

/** Expands one unpartitioned order into PartitionedOrders appended to cs. */
void expand_order(const Workload& w, const SubJoinSet& sj, const CandidateOptions& opts,
                  const Query& q, int query_idx, int target, const ProbeOrder& po,
                  const std::string& var_prefix, CandidateSet& cs, Slot& slot,
                  std::set<int>& used_fragments) {
    for (const auto& assignment : partition_assignments(sj, po, opts.single_partition_variant)) {
        PartitionedOrder ord;
        ord.query = query_idx;
        ord.target = target;
        ord.start = po.start;
        RelSet head = RelSet::of({po.start});
        std::vector<Predicate> internal;
        for (size_t j = 0; j < po.hops.size(); ++j) {
            const SubJoin& m = sj.at(po.hops[j]);
            Hop hop;
            hop.subjoin = po.hops[j];
            hop.partition = assignment[j];
            hop.links = link_predicates(q, head, m.relations);
            ord.hops.push_back(hop);
            ord.steps.push_back(cs.steps.intern(w, po.start, ord.hops, head, internal));
            head = head.unite(m.relations);
            internal = merge_predicates(merge_predicates(internal, hop.links), m.predicates);
            if (!m.is_base()) used_fragments.insert(m.id);
        }
        ord.var_name = var_prefix + "_" + std::to_string(slot.orders.size());
        slot.orders.push_back(static_cast<int>(cs.orders.size()));
        cs.orders.push_back(std::move(ord));
    }
}

}  // namespace

CandidateSet build_candidates_for(const Workload& w, const SubJoinSet& sj,
                                  const CandidateOptions& opts,
                                  const std::vector<int>& query_indices) {
    CandidateSet cs;
    std::set<int> used_fragments;

    std::map<std::string, int> id_uses;
    for (int qi : query_indices) id_uses[sanitize(w.queries[qi].id)]++;

    for (int qi : query_indices) {
        const Query& q = w.queries.at(qi);
        std::string qname = sanitize(q.id);
        if (id_uses[qname] > 1) qname += "_" + std::to_string(qi);
        std::vector<RelId> starts = q.relations.members();
        std::sort(starts.begin(), starts.end(),
                  [&](RelId a, RelId b) { return w.rel(a).name < w.rel(b).name; });
        for (RelId start : starts) {
            Slot slot;
            slot.query = qi;
            slot.start = start;
            std::string prefix = "x_" + qname + "_" + sanitize(w.rel(start).name);
            for (const auto& po : construct_probe_orders(w, q, sj, start, opts.allow_mir_hops))
                expand_order(w, sj, opts, q, qi, -1, po, prefix, cs, slot, used_fragments);
            if (slot.orders.empty())
                throw InternalError("no probe order candidates for query " + q.id +
                                    " starting at " + w.rel(start).name);
            cs.slots.push_back(std::move(slot));
        }
    }

    std::set<int> done;
    while (true) {
        int next = -1;
        for (int f : used_fragments)
            if (!done.count(f)) {
                next = f;
                break;
            }
        if (next < 0) break;
        done.insert(next);
        const SubJoin& m = sj.at(next);
        Query synthetic;
        synthetic.id = "fragment:" + m.name;
        synthetic.relations = m.relations;
        synthetic.predicates = m.predicates;
        std::vector<size_t> slot_indices;
        for (const auto& [start, orders] : subquery_probe_orders(w, sj, next, opts.allow_mir_hops)) {
            Slot slot;
            slot.target = next;
            slot.start = start;
            std::string prefix = "xm_" + m.name + "_" + std::to_string(m.id) + "_" +
                                 sanitize(w.rel(start).name);
            for (const auto& po : orders)
                expand_order(w, sj, opts, synthetic, -1, next, po, prefix, cs, slot,
                             used_fragments);
            if (slot.orders.empty())
                throw InternalError("no producing order for fragment " + m.name +
                                    " from input " + w.rel(start).name);
            slot_indices.push_back(cs.slots.size());
            cs.slots.push_back(std::move(slot));
        }
        cs.fragment_slots[next] = std::move(slot_indices);
        cs.fragment_size[next] = m.relations.count();
    }

    std::map<std::string, int> name_claims;
    for (auto& step : cs.steps.all()) {
        std::string sig = step_signature(w, sj, step);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "y_%016llx",
                      static_cast<unsigned long long>(fnv1a64(sig)));
        std::string name(buf);
        auto [it, fresh] = name_claims.insert({name, step.id});
        if (!fresh) name += "_" + std::to_string(step.id);
        cs.steps.at(step.id).var_name = name;
    }
    return cs;
}

CandidateSet build_candidates(const Workload& w, const SubJoinSet& sj,
                              const CandidateOptions& opts) {
    std::vector<int> all;
    for (size_t i = 0; i < w.queries.size(); ++i) all.push_back(static_cast<int>(i));
    return build_candidates_for(w, sj, opts, all);
}

void finalize_order(const Workload& w, const SubJoinSet& sj, const Query& context,
                    StepRegistry& steps, PartitionedOrder& order) {
    RelSet head = RelSet::of({order.start});
    std::vector<Predicate> internal;
    order.steps.clear();
    std::vector<Hop> prefix;
    for (auto& hop : order.hops) {
        const SubJoin& m = sj.at(hop.subjoin);
        if (head.intersects(m.relations))
            throw ValidationError("plan order for " + context.id +
                                  " revisits relations already covered");
        hop.links = link_predicates(context, head, m.relations);
        if (hop.links.empty())
            throw ValidationError("plan order for " + context.id +
                                  " hops to " + m.name + " without a linking predicate");
        prefix.push_back(hop);
        order.steps.push_back(steps.intern(w, order.start, prefix, head, internal));
        head = head.unite(m.relations);
        internal = merge_predicates(merge_predicates(internal, hop.links), m.predicates);
    }
    if (!(head == context.relations))
        throw ValidationError("plan order for " + context.id +
                              " does not cover the query's relations");
}

std::string step_signature(const Workload& w, const SubJoinSet& sj, const Step& s) {
    std::string out = w.rel(s.start).name;
    for (const auto& hop : s.hops) {
        const SubJoin& m = sj.at(hop.subjoin);
        out += ">" + m.name;
        if (!m.predicates.empty()) out += "(" + render_predicates(w, m.predicates) + ")";
        out += "[" + render_attr(w, hop.partition) + "]";
        out += "{" + render_predicates(w, hop.links) + "}";
    }
    return out;
}

std::string order_signature(const Workload& w, const SubJoinSet& sj,
                            const PartitionedOrder& o) {
    std::string out;
    if (o.query >= 0) {
        out = w.queries.at(o.query).id;
    } else {
        const SubJoin& t = sj.at(o.target);
        out = "fragment:" + t.name + "(" + render_predicates(w, t.predicates) + ")";
    }
    out += ":" + w.rel(o.start).name;
    for (const auto& hop : o.hops) {
        const SubJoin& m = sj.at(hop.subjoin);
        out += ">" + m.name + "[" + render_attr(w, hop.partition) + "]";
    }
    return out;
}

}  // namespace mqjoin
