#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <unordered_map>

#include "arrivals.hpp"
#include "mqjoin/runtime.hpp"

namespace mqjoin {

namespace {
constexpr int64_t kNever = std::numeric_limits<int64_t>::max();
}

SimOutput oracle_join(const Workload& w, const std::vector<TraceEvent>& trace,
                      int64_t epoch_len,
                      const std::vector<LifecycleEvent>* lifecycle) {
    if (epoch_len <= 0)
        throw ValidationError("epoch length must be a positive tick count");
    std::vector<Arrival> arrivals = sorted_arrivals(w, trace);
    auto epoch_of = [&](int64_t ts) { return ts / epoch_len; };

    struct Known {
        Query query;
        int64_t act = 0;
        int64_t deact = kNever;
    };
    std::vector<Known> known;
    for (const auto& q : w.queries) known.push_back({q, 0, kNever});
    if (lifecycle) {
        std::vector<LifecycleEvent> lc = *lifecycle;
        std::stable_sort(lc.begin(), lc.end(),
                         [](const LifecycleEvent& a, const LifecycleEvent& b) {
                             return a.tick < b.tick;
                         });
        for (const auto& ev : lc) {
            if (ev.add) {
                Workload probe;
                probe.relations = w.relations;
                probe.queries = {ev.query};
                validate_workload(probe);
                known.push_back({probe.queries.front(), epoch_of(ev.tick) + 2, kNever});
            } else {
                bool found = false;
                for (auto it = known.rbegin(); it != known.rend(); ++it)
                    if (it->query.id == ev.remove_id && it->deact == kNever) {
                        it->deact = epoch_of(ev.tick) + 2;
                        found = true;
                        break;
                    }
                if (!found)
                    throw ValidationError("removal of unknown query " + ev.remove_id);
            }
        }
    }

    // Value index per attribute, filled as arrivals are consumed so lookups
    // only ever see strictly earlier tuples.
    std::map<AttrRef, std::unordered_map<std::string, std::vector<const Arrival*>>> index;

    SimOutput out;
    for (const Arrival& e : arrivals) {
        for (const Known& k : known) {
            const Query& q = k.query;
            if (!q.relations.contains(e.rel)) continue;
            if (epoch_of(e.ev->ts) < k.act) continue;

            std::vector<const Arrival*> parts{&e};
            RelSet covered = RelSet::of({e.rel});

            std::function<void(const RelSet&)> expand = [&](const RelSet& remaining) {
                if (remaining.empty()) {
                    int64_t tmin = kNever;
                    for (const Arrival* p : parts) tmin = std::min(tmin, p->ev->ts);
                    if (epoch_of(tmin) >= k.deact) return;
                    ResultRecord r;
                    r.query = q.id;
                    r.ts = e.ev->ts;
                    std::vector<const Arrival*> sorted(parts);
                    std::sort(sorted.begin(), sorted.end(),
                              [&](const Arrival* a, const Arrival* b) {
                                  return w.rel(a->rel).name < w.rel(b->rel).name;
                              });
                    for (const Arrival* p : sorted) r.tuples.push_back(*p->ev);
                    out.results.push_back(std::move(r));
                    return;
                }
                // Next relation: smallest remaining id joined to the covered set.
                RelId next = 0;
                const Predicate* via = nullptr;
                for (RelId cand : remaining.members()) {
                    for (const auto& p : q.predicates) {
                        bool lc = covered.contains(p.left.rel) && p.right.rel == cand;
                        bool rc = covered.contains(p.right.rel) && p.left.rel == cand;
                        if (lc || rc) {
                            next = cand;
                            via = &p;
                            break;
                        }
                    }
                    if (via) break;
                }
                if (!via) throw InternalError("query graph lost connectivity");
                AttrRef own = via->left.rel == next ? via->left : via->right;
                AttrRef other = via->left.rel == next ? via->right : via->left;
                auto vit = index.find(own);
                if (vit == index.end()) return;
                const Arrival* src = nullptr;
                for (const Arrival* p : parts)
                    if (p->rel == other.rel) src = p;
                if (!src) throw InternalError("linking predicate side not yet covered");
                auto bit = vit->second.find(src->vals.at(other.attr));
                if (bit == vit->second.end()) return;
                for (const Arrival* cand : bit->second) {
                    if (static_cast<double>(e.ev->ts - cand->ev->ts) >
                        w.rel(cand->rel).window)
                        continue;
                    bool ok = true;
                    for (const auto& p : q.predicates) {
                        bool ln = p.left.rel == next, rn = p.right.rel == next;
                        if (!ln && !rn) continue;
                        const AttrRef& mine = ln ? p.left : p.right;
                        const AttrRef& theirs = ln ? p.right : p.left;
                        if (!covered.contains(theirs.rel)) continue;
                        const Arrival* peer = nullptr;
                        for (const Arrival* pp : parts)
                            if (pp->rel == theirs.rel) peer = pp;
                        if (!peer) throw InternalError("covered relation lost its tuple");
                        if (cand->vals.at(mine.attr) != peer->vals.at(theirs.attr)) {
                            ok = false;
                            break;
                        }
                    }
                    if (!ok) continue;
                    parts.push_back(cand);
                    covered.add(next);
                    RelSet rest = remaining;
                    rest.remove(next);
                    expand(rest);
                    covered.remove(next);
                    parts.pop_back();
                }
            };
            RelSet remaining = q.relations;
            remaining.remove(e.rel);
            expand(remaining);
        }
        for (uint32_t ai = 0; ai < e.vals.size(); ++ai)
            index[AttrRef{e.rel, ai}][e.vals[ai]].push_back(&e);
    }
    return out;
}

}  // namespace mqjoin
