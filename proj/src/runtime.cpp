#include "mqjoin/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <unordered_map>

#include "arrivals.hpp"

namespace mqjoin {

namespace {

constexpr int64_t kNever = std::numeric_limits<int64_t>::max();

using Chain = std::vector<const Arrival*>;  // ascending relation id, unique

const std::string& chain_value(const Chain& c, const AttrRef& a) {
    for (const Arrival* p : c)
        if (p->rel == a.rel) return p->vals.at(a.attr);
    throw InternalError("routing attribute outside the probing chain");
}

std::string chain_key(const Chain& c, const std::vector<AttrRef>& attrs) {
    std::string key;
    for (const auto& a : attrs) {
        const std::string& v = chain_value(c, a);
        key += std::to_string(v.size()) + ":" + v;
    }
    return key;
}

Chain merge_chains(const Chain& a, const Chain& b) {
    Chain out;
    out.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out),
               [](const Arrival* x, const Arrival* y) { return x->rel < y->rel; });
    return out;
}

struct Container {
    std::vector<Chain> chains;
    std::map<std::vector<AttrRef>, std::unordered_map<std::string, std::vector<uint32_t>>>
        indexes;

    void insert(const Chain& c, const std::vector<std::vector<AttrRef>>& specs) {
        auto i = static_cast<uint32_t>(chains.size());
        chains.push_back(c);
        for (const auto& spec : specs) indexes[spec][chain_key(c, spec)].push_back(i);
    }
};

struct PlanContext {
    Workload active;
    SubJoinSet sj;
    StepRegistry steps;
    Topology topo;
    std::set<std::string> signature;
};

struct Universe {
    int64_t epoch = 0;
    std::shared_ptr<const PlanContext> ctx;
    std::vector<std::shared_ptr<const Topology>> overlays;
    std::map<std::pair<StoreKey, int>, Container> stores;
};

struct OverlayRecord {
    int64_t act = 0;
    std::shared_ptr<const Topology> topo;
};

struct PendingQuery {
    int64_t act = 0;
    Query query;
};

std::string hexdigest(uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

struct Engine {
    const Workload& base;
    const SimOptions& opts;
    std::vector<Arrival> arrivals;

    std::vector<Query> active;
    std::map<std::string, int64_t> act, deact;
    std::map<int64_t, std::shared_ptr<const PlanContext>> configs;
    std::map<int64_t, Universe> universes;
    std::vector<OverlayRecord> overlays;
    std::vector<PendingQuery> pending;
    size_t overlay_ordinal = 0;
    Statistics stats;
    int64_t wmax_ticks = 0;
    int64_t cur_epoch = 0;

    std::vector<LifecycleEvent> lifecycle;
    size_t lc_idx = 0;
    const std::map<int64_t, std::string>* forced_plans = nullptr;

    uint64_t probe_messages = 0, tuples_stored = 0, results_total = 0;
    std::map<std::string, uint64_t> results_by_query;
    std::map<RelId, uint64_t> arrivals_cur;
    std::map<RelId, std::vector<const Arrival*>> epoch_arrivals;
    SimOutput out;

    Engine(const Workload& w, const SimOptions& o) : base(w), opts(o), stats(&base) {
        double wm = 0.0;
        for (const auto& r : base.relations) wm = std::max(wm, r.window);
        wmax_ticks = static_cast<int64_t>(std::ceil(wm));
    }

    int64_t epoch_of(int64_t ts) const { return ts / opts.epoch_len; }
    bool adaptive() const { return opts.mode == SimOptions::Mode::Adaptive; }

    std::pair<std::shared_ptr<PlanContext>, bool> make_context(
        const std::string* forced_json) {
        auto ctx = std::make_shared<PlanContext>();
        ctx->active.relations = base.relations;
        ctx->active.queries = active;
        validate_workload(ctx->active, false);
        ctx->sj = SubJoinSet::enumerate(ctx->active);
        CostModel cost(ctx->active, ctx->sj, stats);
        PlanOrders po;
        bool timed_out = false;
        if (!ctx->active.queries.empty()) {
            if (forced_json) {
                po = parse_plan(*forced_json, ctx->active, ctx->sj, ctx->steps);
            } else {
                CandidateSet cs = build_candidates(ctx->active, ctx->sj, opts.cand_opts);
                cost.price(cs);
                IlpModel model = build_ilp(cs);
                IlpSolution sol = solve(model, cs, opts.solve_limits);
                timed_out = sol.status == SolveStatus::Timeout;
                SelectedPlan plan = extract_plan(model, sol, cs);
                po = plan_orders_from_selection(cs, plan);
                ctx->steps = std::move(cs.steps);
            }
        }
        ctx->topo = compile_topology(ctx->active, ctx->sj, cost, ctx->steps, po);
        for (const auto& o : po.query_orders)
            ctx->signature.insert(order_signature(ctx->active, ctx->sj, o));
        for (const auto& o : po.fragment_orders)
            ctx->signature.insert(order_signature(ctx->active, ctx->sj, o));
        return {ctx, timed_out};
    }

    void build_config(int64_t e) {
        auto prev = configs.at(e - 1);
        auto forced = forced_plans->find(e);
        if (forced != forced_plans->end()) {
            configs[e] = make_context(&forced->second).first;
            return;
        }
        if (!adaptive() || !opts.reoptimize) {
            configs[e] = prev;
            return;
        }
        auto [ctx, timed_out] = make_context(nullptr);
        bool same = ctx->signature == prev->signature &&
                    ctx->active.queries.size() == prev->active.queries.size();
        if (same || (timed_out && active_ids() == ids_of(*prev)))
            configs[e] = prev;
        else
            configs[e] = ctx;
    }

    std::set<std::string> active_ids() const {
        std::set<std::string> ids;
        for (const auto& q : active) ids.insert(q.id);
        return ids;
    }
    static std::set<std::string> ids_of(const PlanContext& ctx) {
        std::set<std::string> ids;
        for (const auto& q : ctx.active.queries) ids.insert(q.id);
        return ids;
    }

    void apply_lifecycle(int64_t b) {
        while (lc_idx < lifecycle.size() &&
               lifecycle[lc_idx].tick < b * opts.epoch_len) {
            const LifecycleEvent& ev = lifecycle[lc_idx++];
            if (ev.add) {
                register_query(ev.query, b + 1);
            } else {
                auto it = std::find_if(active.begin(), active.end(),
                                       [&](const Query& q) { return q.id == ev.remove_id; });
                if (it == active.end())
                    throw ValidationError("removal of unknown query " + ev.remove_id);
                active.erase(it);
                deact[ev.remove_id] = b + 1;
            }
        }
    }

    void register_query(const Query& q, int64_t act_epoch) {
        for (const auto& cur : active)
            if (cur.id == q.id)
                throw ValidationError("query id " + q.id + " is already active");
        Workload probe;
        probe.relations = base.relations;
        probe.queries = {q};
        validate_workload(probe);
        active.push_back(probe.queries.front());
        act[q.id] = act_epoch;
        deact[q.id] = kNever;
        results_by_query[q.id] += 0;
        pending.push_back({act_epoch, active.back()});
    }

    void attach_overlays(int64_t b) {
        for (auto it = pending.begin(); it != pending.end();) {
            if (it->act != b) {
                ++it;
                continue;
            }
            auto ctx = configs.at(b);
            auto ov = std::make_shared<Topology>(compile_bootstrap_overlay(
                ctx->active, it->query, overlay_ordinal++));
            overlays.push_back({b, ov});
            for (auto& [ue, uni] : universes)
                if (ue < b) uni.overlays.push_back(ov);
            it = pending.erase(it);
        }
    }

    void gc(int64_t b) {
        if (!adaptive()) return;
        for (auto it = universes.begin(); it != universes.end();) {
            if ((it->first + 1) * opts.epoch_len + wmax_ticks <= b * opts.epoch_len)
                it = universes.erase(it);
            else
                ++it;
        }
    }

    std::string epoch_digest(int64_t e) const {
        uint64_t h = fnv1a64(configs.at(e)->topo.digest);
        for (const auto& ov : overlays)
            if (ov.act <= e) h = fnv1a64(ov.topo->digest, h);
        return hexdigest(h);
    }

    void finalize_epoch(int64_t e) {
        MetricsRow row;
        row.epoch = e;
        row.digest = epoch_digest(e);
        row.probe_messages = probe_messages;
        row.tuples_stored = tuples_stored;
        row.results_total = results_total;
        row.results = results_by_query;
        for (const auto& [r, n] : arrivals_cur) row.arrivals[base.rel(r).name] = n;

        std::set<std::pair<AttrRef, AttrRef>> counted;
        for (const auto& q : active)
            for (const auto& p : q.predicates) counted.insert({p.left, p.right});
        for (const auto& [left, right] : counted) {
            double pairs = static_cast<double>(arrivals_cur[left.rel]) *
                           static_cast<double>(arrivals_cur[right.rel]);
            double matches = count_matching_pairs(left, right);
            const Relation& lrel = base.rel(left.rel);
            if (pairs > 0) {
                double guard = std::max(1.0, lrel.rate * lrel.window * lrel.window);
                stats.set_selectivity(left, right, (matches + 1.0) / (pairs + guard));
            }
            Predicate probe{left, right, 1.0};
            std::string name = base.rel(left.rel).name + "." +
                               lrel.attributes.at(left.attr) + "=" +
                               base.rel(right.rel).name + "." +
                               base.rel(right.rel).attributes.at(right.attr);
            row.predicates[name] = {pairs, matches, stats.selectivity(probe)};
        }
        for (const auto& [r, n] : arrivals_cur)
            if (n > 0)
                stats.set_rate(r, static_cast<double>(n) /
                                      static_cast<double>(opts.epoch_len));
        out.metrics.push_back(std::move(row));
    }

    /** Value-equal pairs among this epoch's arrivals, both directions counted
     *  once; the estimator's sample is unconstrained by windows or routing. */
    double count_matching_pairs(const AttrRef& left, const AttrRef& right) const {
        auto lit = epoch_arrivals.find(left.rel);
        auto rit = epoch_arrivals.find(right.rel);
        if (lit == epoch_arrivals.end() || rit == epoch_arrivals.end()) return 0.0;
        std::unordered_map<std::string, uint64_t> hist;
        for (const Arrival* a : lit->second) hist[a->vals.at(left.attr)]++;
        uint64_t matches = 0;
        for (const Arrival* a : rit->second) {
            auto h = hist.find(a->vals.at(right.attr));
            if (h != hist.end()) matches += h->second;
        }
        return static_cast<double>(matches);
    }

    void boundary(int64_t b) {
        finalize_epoch(b - 1);
        apply_lifecycle(b);
        gc(b);
        build_config(b + 1);
        attach_overlays(b);
        arrivals_cur.clear();
        epoch_arrivals.clear();
    }

    void advance_to(int64_t target) {
        while (cur_epoch < target) boundary(++cur_epoch);
    }

    Universe& universe(int64_t u) {
        auto it = universes.find(u);
        if (it != universes.end()) return it->second;
        Universe uni;
        uni.epoch = u;
        uni.ctx = configs.at(u);
        for (const auto& ov : overlays)
            if (u < ov.act) uni.overlays.push_back(ov.topo);
        return universes.emplace(u, std::move(uni)).first->second;
    }

    void handle(const Arrival& a) {
        arrivals_cur[a.rel]++;
        epoch_arrivals[a.rel].push_back(&a);
        Chain c{&a};
        if (!adaptive()) {
            deliver(universe(0), c, a);
            return;
        }
        int64_t lo = std::max<int64_t>(0, epoch_of(std::max<int64_t>(0, a.ev->ts - wmax_ticks)));
        for (int64_t u = lo; u <= epoch_of(a.ev->ts); ++u) deliver(universe(u), c, a);
    }

    void deliver(Universe& uni, const Chain& c, const Arrival& origin) {
        auto main = uni.ctx;
        auto se = main->topo.source_edges.find(origin.rel);
        if (se != main->topo.source_edges.end())
            for (const auto& edge : se->second) dispatch(uni, main->topo, edge, c, origin);
        for (const auto& ov : uni.overlays) {
            auto oe = ov->source_edges.find(origin.rel);
            if (oe == ov->source_edges.end()) continue;
            for (const auto& edge : oe->second) dispatch(uni, *ov, edge, c, origin);
        }
    }

    void dispatch(Universe& uni, const Topology& topo, const std::string& edge,
                  const Chain& chain, const Arrival& origin) {
        const TopoRule& rule = topo.rules.at(edge);
        int par = rule.store.is_capture() ? 1 : topo.store(rule.store).parallelism;
        std::optional<std::string> routed;
        if (rule.route_attr) routed = chain_value(chain, *rule.route_attr);
        std::vector<int> workers = partition_route(routed, par);

        if (rule.kind == TopoRule::Kind::Store) {
            static const std::vector<std::vector<AttrRef>> kNoSpecs;
            const auto& specs =
                rule.store.is_capture() ? kNoSpecs : topo.store(rule.store).index_specs;
            for (int wk : workers) {
                uni.stores[{rule.store, wk}].insert(chain, specs);
                ++tuples_stored;
            }
            return;
        }

        probe_messages += workers.size();
        out.probe_fanouts[static_cast<int>(workers.size())]++;
        for (int wk : workers) {
            auto cit = uni.stores.find({rule.store, wk});
            if (cit == uni.stores.end()) continue;
            const Container& cont = cit->second;
            const std::vector<uint32_t>* bucket = nullptr;
            std::vector<uint32_t> all;
            if (rule.lookup_stored.empty()) {
                all.resize(cont.chains.size());
                for (uint32_t i = 0; i < all.size(); ++i) all[i] = i;
                bucket = &all;
            } else {
                auto idx = cont.indexes.find(rule.lookup_stored);
                if (idx == cont.indexes.end()) continue;
                auto hit = idx->second.find(chain_key(chain, rule.lookup_incoming));
                if (hit == idx->second.end()) continue;
                bucket = &hit->second;
            }
            for (uint32_t ci : *bucket) {
                const Chain& stored = cont.chains[ci];
                if (!passes(rule, chain, stored)) continue;
                Chain merged = merge_chains(chain, stored);
                for (const auto& oe : rule.out_edges) {
                    if (oe.rfind("output:", 0) == 0)
                        emit(uni, oe.substr(7), merged, origin);
                    else
                        dispatch(uni, topo, oe, merged, origin);
                }
            }
        }
    }

    bool passes(const TopoRule& rule, const Chain& chain, const Chain& stored) const {
        for (const auto& p : rule.predicates) {
            const Chain& lc = chain_has(chain, p.left.rel) ? chain : stored;
            const Chain& rc = chain_has(chain, p.right.rel) ? chain : stored;
            if (chain_value(lc, p.left) != chain_value(rc, p.right)) return false;
        }
        for (const Arrival* a : chain)
            for (const Arrival* b : stored) {
                const Arrival* older = a->proc < b->proc ? a : b;
                const Arrival* newer = a->proc < b->proc ? b : a;
                double span = static_cast<double>(newer->ev->ts - older->ev->ts);
                if (span > base.rel(older->rel).window) return false;
            }
        return true;
    }

    static bool chain_has(const Chain& c, RelId r) {
        for (const Arrival* p : c)
            if (p->rel == r) return true;
        return false;
    }

    void emit(const Universe& uni, const std::string& qid, const Chain& chain,
              const Arrival& origin) {
        int64_t tmin = kNever;
        for (const Arrival* p : chain) tmin = std::min(tmin, p->ev->ts);
        if (adaptive() && epoch_of(tmin) != uni.epoch) return;
        if (epoch_of(origin.ev->ts) < act.at(qid)) return;
        if (epoch_of(tmin) >= deact.at(qid)) return;
        ResultRecord r;
        r.query = qid;
        r.ts = origin.ev->ts;
        std::vector<const Arrival*> parts(chain.begin(), chain.end());
        std::sort(parts.begin(), parts.end(), [&](const Arrival* a, const Arrival* b) {
            return base.rel(a->rel).name < base.rel(b->rel).name;
        });
        for (const Arrival* p : parts) r.tuples.push_back(*p->ev);
        out.results.push_back(std::move(r));
        ++results_total;
        results_by_query[qid]++;
    }
};

}  // namespace

Simulator::Simulator(Workload w, SimOptions opts)
    : workload_(std::move(w)), opts_(std::move(opts)) {
    if (opts_.epoch_len <= 0)
        throw ValidationError("epoch length must be a positive tick count");
    if (opts_.mode == SimOptions::Mode::Static) opts_.reoptimize = false;
}

void Simulator::set_initial_plan(std::string plan_json) {
    initial_plan_ = std::move(plan_json);
}

void Simulator::schedule_plan(int64_t epoch, std::string plan_json) {
    if (epoch < 2)
        throw ValidationError("forced plans can only take effect from epoch 2 on");
    forced_plans_[epoch] = std::move(plan_json);
}

void Simulator::schedule_register(int64_t tick, Query q) {
    lifecycle_.push_back({tick, true, std::move(q), {}});
}

void Simulator::schedule_remove(int64_t tick, std::string query_id) {
    lifecycle_.push_back({tick, false, {}, std::move(query_id)});
}

SimOutput Simulator::run(const std::vector<TraceEvent>& trace) const {
    Engine eng(workload_, opts_);
    eng.arrivals = sorted_arrivals(workload_, trace);
    eng.lifecycle = lifecycle_;
    std::stable_sort(eng.lifecycle.begin(), eng.lifecycle.end(),
                     [](const LifecycleEvent& a, const LifecycleEvent& b) {
                         return a.tick < b.tick;
                     });
    eng.forced_plans = &forced_plans_;

    eng.active = workload_.queries;
    for (const auto& q : eng.active) {
        eng.act[q.id] = 0;
        eng.deact[q.id] = kNever;
        eng.results_by_query[q.id] += 0;
    }
    eng.configs[0] =
        eng.make_context(initial_plan_.empty() ? nullptr : &initial_plan_).first;
    eng.configs[1] = eng.configs[0];

    for (const auto& a : eng.arrivals) {
        eng.advance_to(eng.epoch_of(a.ev->ts));
        eng.handle(a);
    }
    eng.finalize_epoch(eng.cur_epoch);
    return std::move(eng.out);
}

}  // namespace mqjoin
