#pragma once

#include <algorithm>
#include <vector>

#include "mqjoin/io.hpp"

namespace mqjoin {

/** Trace event resolved against the catalog, with a dense value vector and
 *  its global processing rank under the (ts, relation name, seq) order. */
struct Arrival {
    const TraceEvent* ev = nullptr;
    RelId rel = 0;
    size_t proc = 0;
    std::vector<std::string> vals;  // by attribute index
};

inline std::vector<Arrival> sorted_arrivals(const Workload& w,
                                            const std::vector<TraceEvent>& trace) {
    std::vector<const TraceEvent*> order;
    order.reserve(trace.size());
    for (const auto& ev : trace) order.push_back(&ev);
    std::sort(order.begin(), order.end(), [](const TraceEvent* a, const TraceEvent* b) {
        if (a->ts != b->ts) return a->ts < b->ts;
        if (a->rel != b->rel) return a->rel < b->rel;
        return a->seq < b->seq;
    });
    std::vector<Arrival> out;
    out.reserve(order.size());
    for (size_t i = 0; i < order.size(); ++i) {
        Arrival a;
        a.ev = order[i];
        a.rel = w.rel_id(order[i]->rel);
        a.proc = i;
        const Relation& rel = w.rel(a.rel);
        a.vals.reserve(rel.attributes.size());
        for (const auto& attr : rel.attributes) {
            auto it = order[i]->attrs.find(attr);
            if (it == order[i]->attrs.end())
                throw ValidationError("trace event for " + rel.name +
                                      " misses attribute " + attr);
            a.vals.push_back(it->second);
        }
        out.push_back(std::move(a));
    }
    return out;
}

}  // namespace mqjoin
