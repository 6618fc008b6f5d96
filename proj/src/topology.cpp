#include "mqjoin/topology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace mqjoin {

namespace {

std::string attr_name(const Workload& w, const AttrRef& a) {
    return w.rel(a.rel).name + "." + w.rel(a.rel).attributes.at(a.attr);
}

std::string render_links(const Workload& w, const std::vector<Predicate>& preds) {
    std::string out = "{";
    for (size_t i = 0; i < preds.size(); ++i) {
        if (i) out += ",";
        out += attr_name(w, preds[i].left) + "=" + attr_name(w, preds[i].right);
    }
    return out + "}";
}

std::string hex64(uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

PlanOrders plan_orders_from_selection(const CandidateSet& cs, const SelectedPlan& plan) {
    PlanOrders po;
    po.objective = plan.total_cost;
    for (int oi : plan.query_orders) po.query_orders.push_back(cs.orders.at(oi));
    for (int oi : plan.fragment_orders) po.fragment_orders.push_back(cs.orders.at(oi));
    return po;
}

std::vector<int> partition_route(const std::optional<std::string>& routed_value,
                                 int parallelism) {
    std::vector<int> out;
    if (routed_value) {
        out.push_back(static_cast<int>(fnv1a64(*routed_value) %
                                       static_cast<uint64_t>(parallelism)));
    } else {
        out.resize(static_cast<size_t>(parallelism));
        for (int i = 0; i < parallelism; ++i) out[static_cast<size_t>(i)] = i;
    }
    return out;
}

namespace {

struct Builder {
    const Workload& w;
    const SubJoinSet& sj;
    const CostModel& cost;
    const StepRegistry& steps;
    Topology topo;

    size_t ensure_store(const StoreKey& key) {
        auto it = topo.store_index.find(key);
        if (it != topo.store_index.end()) return it->second;
        TopoStore st;
        st.key = key;
        if (key.is_capture()) {
            st.label = "capture:" + w.rel(key.capture_rel).name;
            st.parallelism = 1;
            st.relations = RelSet::of({key.capture_rel});
        } else {
            const SubJoin& m = sj.at(key.subjoin);
            st.label = m.name + "[" + attr_name(w, key.partition) + "]";
            st.parallelism = static_cast<int>(
                std::llround(cost.store_parallelism(key.subjoin)));
            st.relations = m.relations;
        }
        size_t idx = topo.stores.size();
        topo.stores.push_back(std::move(st));
        topo.store_index[key] = idx;
        return idx;
    }

    void add_rule(TopoRule r) {
        if (topo.rules.count(r.in_edge))
            throw InternalError("duplicate routing edge " + r.in_edge);
        topo.rules[r.in_edge] = std::move(r);
    }
};

}  // namespace

Topology compile_topology(const Workload& w, const SubJoinSet& sj, const CostModel& cost,
                          const StepRegistry& steps, const PlanOrders& plan) {
    Builder b{w, sj, cost, steps, {}};

    for (RelId r = 0; r < w.relations.size(); ++r)
        b.ensure_store(StoreKey{-1, r, {}});

    std::vector<const PartitionedOrder*> all;
    for (const auto& o : plan.query_orders) all.push_back(&o);
    for (const auto& o : plan.fragment_orders) all.push_back(&o);

    std::set<int> used_steps;
    for (const auto* o : all) {
        if (o->hops.size() != o->steps.size() || o->hops.empty())
            throw InternalError("order without interned steps passed to the compiler");
        for (size_t j = 0; j < o->hops.size(); ++j) {
            b.ensure_store(StoreKey{o->hops[j].subjoin, 0, o->hops[j].partition});
            used_steps.insert(o->steps[j]);
        }
    }

    // Probe rule per used step, executed at the store of its last hop.
    for (int sid : used_steps) {
        const Step& s = steps.at(sid);
        const Hop& hop = s.hops.back();
        TopoRule r;
        r.kind = TopoRule::Kind::Probe;
        r.in_edge = "e" + std::to_string(sid);
        r.store = StoreKey{hop.subjoin, 0, hop.partition};
        r.route_attr = cost.routing_attribute(s.head_before, s.internal_before, hop);
        r.predicates = hop.links;
        std::vector<std::pair<AttrRef, AttrRef>> lk;  // (stored, incoming)
        const RelSet& hop_rels = sj.at(hop.subjoin).relations;
        for (const auto& p : hop.links) {
            if (hop_rels.contains(p.left.rel))
                lk.emplace_back(p.left, p.right);
            else
                lk.emplace_back(p.right, p.left);
        }
        std::sort(lk.begin(), lk.end());
        for (const auto& [stored, incoming] : lk) {
            r.lookup_stored.push_back(stored);
            r.lookup_incoming.push_back(incoming);
        }
        r.step = sid;
        b.add_rule(std::move(r));
    }

    // Store rules: captures, base-relation stores, and fragment materialization.
    for (RelId r = 0; r < w.relations.size(); ++r) {
        TopoRule cap;
        cap.kind = TopoRule::Kind::Store;
        cap.in_edge = "cap:" + w.rel(r).name;
        cap.store = StoreKey{-1, r, {}};
        b.add_rule(std::move(cap));
        b.topo.source_edges[r].push_back("cap:" + w.rel(r).name);
    }
    for (size_t i = 0; i < b.topo.stores.size(); ++i) {
        const TopoStore& st = b.topo.stores[i];
        if (st.key.is_capture() || !sj.at(st.key.subjoin).is_base()) continue;
        TopoRule put;
        put.kind = TopoRule::Kind::Store;
        std::string edge = "put:s" + std::to_string(i);
        put.in_edge = edge;
        put.store = st.key;
        put.route_attr = st.key.partition;
        b.add_rule(std::move(put));
        b.topo.source_edges[sj.at(st.key.subjoin).base_rel()].push_back(std::move(edge));
    }

    // Continuation edges: each used step fans out to the used steps extending
    // it by one hop; query orders end in an output, fragment orders in the
    // materialization edges of their target's stores.
    std::map<int, std::set<std::string>> outs;
    for (const auto* o : all) {
        for (size_t j = 0; j + 1 < o->steps.size(); ++j)
            outs[o->steps[j]].insert("e" + std::to_string(o->steps[j + 1]));
        int last = o->steps.back();
        if (o->query >= 0) {
            outs[last].insert("output:" + w.queries.at(static_cast<size_t>(o->query)).id);
        } else {
            for (size_t i = 0; i < b.topo.stores.size(); ++i) {
                const TopoStore& st = b.topo.stores[i];
                if (st.key.is_capture() || st.key.subjoin != o->target) continue;
                std::string edge = "mat:s" + std::to_string(i) + ":e" + std::to_string(last);
                if (!b.topo.rules.count(edge)) {
                    TopoRule put;
                    put.kind = TopoRule::Kind::Store;
                    put.in_edge = edge;
                    put.store = st.key;
                    put.route_attr = st.key.partition;
                    b.add_rule(std::move(put));
                }
                outs[last].insert(edge);
            }
        }
    }
    for (auto& [sid, es] : outs) {
        auto& rule = b.topo.rules.at("e" + std::to_string(sid));
        rule.out_edges.assign(es.begin(), es.end());
    }

    // First-hop probe edges enter from the source of their start relation.
    std::vector<int> first_steps(used_steps.begin(), used_steps.end());
    for (int sid : first_steps) {
        const Step& s = steps.at(sid);
        if (s.hops.size() == 1)
            b.topo.source_edges[s.start].push_back("e" + std::to_string(sid));
    }

    // One hash index per distinct stored-side lookup key.
    for (const auto& [edge, rule] : b.topo.rules) {
        if (rule.kind != TopoRule::Kind::Probe || rule.lookup_stored.empty()) continue;
        TopoStore& st = b.topo.stores[b.topo.store_index.at(rule.store)];
        if (std::find(st.index_specs.begin(), st.index_specs.end(), rule.lookup_stored) ==
            st.index_specs.end())
            st.index_specs.push_back(rule.lookup_stored);
    }
    for (auto& st : b.topo.stores) std::sort(st.index_specs.begin(), st.index_specs.end());

    // Structural digest: stable under step renumbering across rebuilds.
    std::map<std::string, std::string> edge_sig;
    for (const auto& [edge, rule] : b.topo.rules) {
        if (rule.kind == TopoRule::Kind::Probe)
            edge_sig[edge] = step_signature(w, sj, steps.at(rule.step));
        else if (rule.store.is_capture())
            edge_sig[edge] = "cap>" + w.rel(rule.store.capture_rel).name;
        else
            edge_sig[edge] = "put>" + b.topo.store(rule.store).label;
    }
    auto structural = [&](const std::string& edge) -> std::string {
        if (edge.rfind("output:", 0) == 0) return edge;
        if (edge.rfind("mat:", 0) == 0) {
            const TopoRule& r = b.topo.rules.at(edge);
            size_t colon = edge.rfind(":e");
            return "mat>" + b.topo.store(r.store).label + "<-" +
                   edge_sig.at(edge.substr(colon + 1));
        }
        return edge_sig.at(edge);
    };
    std::vector<std::string> lines;
    for (const auto& st : b.topo.stores) {
        std::string line = "store " + st.label + " p=" + std::to_string(st.parallelism);
        for (const auto& spec : st.index_specs) {
            line += " idx(";
            for (size_t i = 0; i < spec.size(); ++i)
                line += (i ? "," : "") + attr_name(w, spec[i]);
            line += ")";
        }
        lines.push_back(std::move(line));
    }
    for (const auto& [edge, rule] : b.topo.rules) {
        std::string line = "rule " + structural(edge) + " at " +
                           (rule.store.is_capture()
                                ? "capture:" + w.rel(rule.store.capture_rel).name
                                : b.topo.store(rule.store).label);
        line += rule.route_attr ? " route=" + attr_name(w, *rule.route_attr)
                                : " route=*";
        if (rule.kind == TopoRule::Kind::Probe) line += " " + render_links(w, rule.predicates);
        std::vector<std::string> sigs;
        for (const auto& oe : rule.out_edges) sigs.push_back(structural(oe));
        std::sort(sigs.begin(), sigs.end());
        for (const auto& sig : sigs) line += " -> " + sig;
        lines.push_back(std::move(line));
    }
    std::sort(lines.begin(), lines.end());
    uint64_t h = fnv1a64(std::string("topology"));
    for (const auto& line : lines) h = fnv1a64(line, fnv1a64(std::string("\n"), h));
    b.topo.digest = hex64(h);
    return b.topo;
}

Topology compile_bootstrap_overlay(const Workload& w, const Query& q,
                                   size_t query_ordinal) {
    Topology topo;
    std::string tag = "b" + std::to_string(query_ordinal);
    std::vector<std::string> lines;
    for (RelId start : q.relations.members()) {
        RelSet head = RelSet::of({start});
        std::string prev;
        size_t n_hops = q.relations.count() - 1;
        for (size_t j = 0; j < n_hops; ++j) {
            RelId hop_rel = 0;
            bool found = false;
            for (RelId r : q.relations.members()) {
                if (head.contains(r)) continue;
                bool linked = false;
                for (const auto& p : q.predicates)
                    if ((head.contains(p.left.rel) && p.right.rel == r) ||
                        (head.contains(p.right.rel) && p.left.rel == r))
                        linked = true;
                if (!linked) continue;
                if (!found || w.rel(r).name < w.rel(hop_rel).name) {
                    hop_rel = r;
                    found = true;
                }
            }
            if (!found)
                throw InternalError("no bootstrap path for " + q.id + " from " +
                                    w.rel(start).name);
            TopoRule r;
            r.kind = TopoRule::Kind::Probe;
            r.in_edge = tag + ":" + w.rel(start).name + ":" + std::to_string(j);
            r.store = StoreKey{-1, hop_rel, {}};
            for (const auto& p : q.predicates) {
                bool lh = head.contains(p.left.rel), rh = head.contains(p.right.rel);
                if ((lh && p.right.rel == hop_rel) || (rh && p.left.rel == hop_rel))
                    r.predicates.push_back(p);
            }
            std::sort(r.predicates.begin(), r.predicates.end());
            head.add(hop_rel);
            std::string line = "boot " + q.id + " " + w.rel(start).name + ">" +
                               w.rel(hop_rel).name + render_links(w, r.predicates);
            lines.push_back(std::move(line));
            if (j + 1 == n_hops)
                r.out_edges.push_back("output:" + q.id);
            std::string edge = r.in_edge;
            if (!prev.empty())
                topo.rules.at(prev).out_edges.push_back(edge);
            else
                topo.source_edges[start].push_back(edge);
            topo.rules[edge] = std::move(r);
            prev = edge;
        }
    }
    std::sort(lines.begin(), lines.end());
    uint64_t h = fnv1a64(std::string("overlay:" + q.id));
    for (const auto& line : lines) h = fnv1a64(line, fnv1a64(std::string("\n"), h));
    topo.digest = hex64(h);
    return topo;
}

}  // namespace mqjoin
