#include "mqjoin/generator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>

namespace mqjoin {

namespace {

/* Draws via modulo keep the stream identical across platforms; the slight
 * bias is irrelevant for workload shapes. */
uint64_t draw(std::mt19937_64& rng, uint64_t n) { return rng() % n; }

using QueryShape = std::pair<RelSet, std::vector<Predicate>>;

}  // namespace

Workload gen_workload(const WorkloadGenConfig& cfg) {
    if (cfg.n_relations < 2 || cfg.query_size < 2 || cfg.query_size > cfg.n_relations)
        throw ValidationError("workload generator needs 2 <= query_size <= n_relations");
    if (cfg.attrs_per_relation < 1)
        throw ValidationError("workload generator needs at least one attribute");
    if (cfg.rate <= 0 || cfg.window <= 0)
        throw ValidationError("workload generator needs positive rate and window");

    Workload w;
    for (int i = 0; i < cfg.n_relations; ++i) {
        Relation r;
        r.name = "R" + std::to_string(i);
        for (int a = 0; a < cfg.attrs_per_relation; ++a)
            r.attributes.push_back("a" + std::to_string(a));
        r.rate = cfg.rate;
        r.window = cfg.window;
        r.parallelism = cfg.parallelism;
        w.relations.push_back(std::move(r));
    }

    double sel = 1.0 / cfg.rate;
    std::mt19937_64 rng(cfg.seed);
    std::set<QueryShape> shapes;
    for (int qi = 0; qi < cfg.n_queries; ++qi) {
        bool placed = false;
        for (int attempt = 0; attempt < cfg.retry_bound && !placed; ++attempt) {
            Query q;
            q.id = "q" + std::to_string(qi + 1);
            std::vector<RelId> chosen;
            chosen.push_back(static_cast<RelId>(draw(rng, cfg.n_relations)));
            q.relations.add(chosen[0]);
            while (static_cast<int>(chosen.size()) < cfg.query_size) {
                RelId anchor = chosen[draw(rng, chosen.size())];
                uint32_t anchor_attr =
                    static_cast<uint32_t>(draw(rng, cfg.attrs_per_relation));
                std::vector<RelId> remaining;
                for (int r = 0; r < cfg.n_relations; ++r)
                    if (!q.relations.contains(static_cast<RelId>(r)))
                        remaining.push_back(static_cast<RelId>(r));
                RelId fresh = remaining[draw(rng, remaining.size())];
                uint32_t fresh_attr =
                    static_cast<uint32_t>(draw(rng, cfg.attrs_per_relation));
                Predicate p{{anchor, anchor_attr}, {fresh, fresh_attr}, sel};
                if (p.right < p.left) std::swap(p.left, p.right);
                q.relations.add(fresh);
                chosen.push_back(fresh);
                q.predicates.push_back(p);
            }
            std::sort(q.predicates.begin(), q.predicates.end());
            QueryShape shape{q.relations, q.predicates};
            if (!shapes.insert(shape).second) continue;
            w.queries.push_back(std::move(q));
            placed = true;
        }
        if (!placed)
            throw ValidationError(
                "GenerationExhausted: no distinct shape left for query " +
                std::to_string(qi + 1) + " after " + std::to_string(cfg.retry_bound) +
                " attempts");
    }
    validate_workload(w);
    return w;
}

std::vector<TraceEvent> gen_trace(const Workload& w, const TraceGenConfig& cfg) {
    if (cfg.duration <= 0)
        throw ValidationError("trace generator needs a positive duration");

    // Attributes joined by any predicate share a value domain; its size makes
    // a uniform pair match with the smallest selectivity in the class.
    size_t n_attrs = 0;
    std::map<AttrRef, size_t> attr_pos;
    for (RelId r = 0; r < w.relations.size(); ++r)
        for (uint32_t a = 0; a < w.rel(r).attributes.size(); ++a)
            attr_pos[AttrRef{r, a}] = n_attrs++;
    std::vector<size_t> parent(n_attrs);
    for (size_t i = 0; i < n_attrs; ++i) parent[i] = i;
    std::function<size_t(size_t)> find = [&](size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::vector<double> min_sel(n_attrs, 1.0);
    for (const auto& q : w.queries)
        for (const auto& p : q.predicates) {
            size_t a = find(attr_pos.at(p.left)), b = find(attr_pos.at(p.right));
            double s = std::min({p.selectivity, min_sel[a], min_sel[b]});
            if (a != b) parent[a] = b;
            min_sel[find(b)] = s;
        }
    std::vector<uint64_t> domain(n_attrs, 1000);
    for (size_t i = 0; i < n_attrs; ++i) {
        size_t root = find(i);
        if (min_sel[root] < 1.0)
            domain[i] = static_cast<uint64_t>(
                std::max(1.0, std::ceil(1.0 / min_sel[root])));
    }

    std::mt19937_64 rng(cfg.seed);
    std::vector<TraceEvent> events;
    for (int64_t t = 0; t < cfg.duration; ++t) {
        for (RelId r = 0; r < w.relations.size(); ++r) {
            const Relation& rel = w.rel(r);
            int64_t upto = static_cast<int64_t>(std::floor(rel.rate * (t + 1)));
            int64_t before = static_cast<int64_t>(std::floor(rel.rate * t));
            for (int64_t k = before; k < upto; ++k) {
                TraceEvent ev;
                ev.rel = rel.name;
                ev.ts = t;
                for (uint32_t a = 0; a < rel.attributes.size(); ++a) {
                    uint64_t d = domain[attr_pos.at(AttrRef{r, a})];
                    ev.attrs[rel.attributes[a]] = "v" + std::to_string(draw(rng, d));
                }
                ev.seq = events.size();
                events.push_back(std::move(ev));
            }
        }
    }
    return events;
}

}  // namespace mqjoin
