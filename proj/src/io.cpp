#include "mqjoin/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>

#include "json.hpp"

namespace mqjoin {

using nlohmann::json;

namespace {

json must_parse(const std::string& text, const std::string& what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ValidationError("malformed JSON in " + what);
    return j;
}

AttrRef parse_attr_ref(const Workload& w, const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_string() || !j[1].is_string())
        throw ValidationError(where + " needs an attribute reference [relation, attribute]");
    RelId rel = w.rel_id(j[0].get<std::string>());
    auto idx = w.rel(rel).attr_index(j[1].get<std::string>());
    if (!idx)
        throw ValidationError("UnknownAttribute: " + j[0].get<std::string>() + "." +
                              j[1].get<std::string>() + " in " + where);
    return AttrRef{rel, *idx};
}

json attr_ref_json(const Workload& w, const AttrRef& a) {
    return json::array({w.rel(a.rel).name, w.rel(a.rel).attributes.at(a.attr)});
}

std::vector<Predicate> parse_predicates(const Workload& w, const json& arr,
                                        const std::string& where) {
    std::vector<Predicate> out;
    if (!arr.is_array()) throw ValidationError(where + " needs a predicate array");
    for (const auto& pj : arr) {
        Predicate p;
        if (!pj.contains("left") || !pj.contains("right"))
            throw ValidationError(where + " has a predicate without left/right");
        p.left = parse_attr_ref(w, pj.at("left"), where);
        p.right = parse_attr_ref(w, pj.at("right"), where);
        if (pj.contains("selectivity")) {
            p.selectivity = pj.at("selectivity").get<double>();
        } else {
            const Relation& lr = w.rel(p.left.rel);
            p.selectivity = Statistics::default_selectivity(lr);
        }
        out.push_back(p);
    }
    return out;
}

json predicates_json(const Workload& w, const std::vector<Predicate>& preds) {
    json arr = json::array();
    for (const auto& p : preds)
        arr.push_back({{"left", attr_ref_json(w, p.left)},
                       {"right", attr_ref_json(w, p.right)},
                       {"selectivity", p.selectivity}});
    return arr;
}

}  // namespace

Workload parse_workload(const std::string& json_text) {
    json j = must_parse(json_text, "workload");
    Workload w;
    if (!j.contains("relations") || !j.at("relations").is_array())
        throw ValidationError("workload needs a relations array");
    for (const auto& rj : j.at("relations")) {
        Relation r;
        r.name = rj.value("name", std::string{});
        if (rj.contains("attributes"))
            for (const auto& a : rj.at("attributes"))
                r.attributes.push_back(a.get<std::string>());
        r.rate = rj.value("rate", 0.0);
        r.window = rj.value("window", 0.0);
        r.parallelism = rj.value("parallelism", 1.0);
        w.relations.push_back(std::move(r));
        w.relation_ids[w.relations.back().name] =
            static_cast<RelId>(w.relations.size() - 1);
    }
    for (const auto& qj : j.value("queries", json::array())) {
        Query q;
        q.id = qj.value("id", std::string{});
        if (!qj.contains("relations") || !qj.at("relations").is_array())
            throw ValidationError("query " + q.id + " needs a relations array");
        for (const auto& rn : qj.at("relations"))
            q.relations.add(w.rel_id(rn.get<std::string>()));
        q.predicates =
            parse_predicates(w, qj.value("predicates", json::array()), "query " + q.id);
        for (const auto& p : q.predicates)
            if (!q.relations.contains(p.left.rel) || !q.relations.contains(p.right.rel))
                throw ValidationError("UnknownRelation: predicate of query " + q.id +
                                      " references a relation outside the query");
        w.queries.push_back(std::move(q));
    }
    w.relation_ids.clear();
    validate_workload(w);
    return w;
}

Workload load_workload(const std::string& path) {
    return parse_workload(read_file(path));
}

std::string workload_to_json(const Workload& w) {
    json j;
    j["relations"] = json::array();
    for (const auto& r : w.relations)
        j["relations"].push_back({{"name", r.name},
                                  {"attributes", r.attributes},
                                  {"rate", r.rate},
                                  {"window", r.window},
                                  {"parallelism", r.parallelism}});
    j["queries"] = json::array();
    for (const auto& q : w.queries) {
        json qj;
        qj["id"] = q.id;
        qj["relations"] = json::array();
        for (RelId r : q.relations.members()) qj["relations"].push_back(w.rel(r).name);
        qj["predicates"] = predicates_json(w, q.predicates);
        j["queries"].push_back(std::move(qj));
    }
    return j.dump(2) + "\n";
}

namespace {

json order_hops_json(const Workload& w, const SubJoinSet& sj, const PartitionedOrder& o) {
    json hops = json::array();
    for (const auto& h : o.hops) {
        json hj;
        hj["relations"] = json::array();
        for (RelId r : sj.at(h.subjoin).relations.members())
            hj["relations"].push_back(w.rel(r).name);
        hj["partition"] = attr_ref_json(w, h.partition);
        hops.push_back(std::move(hj));
    }
    return hops;
}

struct ParsedHops {
    RelId start;
    std::vector<int> subjoins;
    std::vector<AttrRef> partitions;
};

ParsedHops parse_hops(const Workload& w, const SubJoinSet& sj, const json& oj,
                      const Query& context, const std::string& where) {
    ParsedHops ph;
    ph.start = w.rel_id(oj.value("start", std::string{}));
    if (!oj.contains("hops") || !oj.at("hops").is_array() || oj.at("hops").empty())
        throw ValidationError(where + " needs a non-empty hops array");
    for (const auto& hj : oj.at("hops")) {
        RelSet rels;
        for (const auto& rn : hj.value("relations", json::array()))
            rels.add(w.rel_id(rn.get<std::string>()));
        if (rels.empty()) throw ValidationError(where + " has a hop with no relations");
        int id = sj.find(rels, Workload::internal_predicates(context, rels));
        if (id < 0)
            throw ValidationError(where + " hops over a fragment the workload "
                                          "does not generate");
        AttrRef part = parse_attr_ref(w, hj.at("partition"), where);
        if (!rels.contains(part.rel))
            throw ValidationError(where + " partitions a hop by an attribute "
                                          "outside the hop");
        ph.subjoins.push_back(id);
        ph.partitions.push_back(part);
    }
    return ph;
}

PartitionedOrder make_order(const Workload& w, const SubJoinSet& sj, const Query& context,
                            int query_idx, int target, const ParsedHops& ph,
                            StepRegistry& steps) {
    PartitionedOrder o;
    o.query = query_idx;
    o.target = target;
    o.start = ph.start;
    for (size_t j = 0; j < ph.subjoins.size(); ++j) {
        Hop h;
        h.subjoin = ph.subjoins[j];
        h.partition = ph.partitions[j];
        o.hops.push_back(std::move(h));
    }
    finalize_order(w, sj, context, steps, o);
    return o;
}

}  // namespace

std::string plan_to_json(const Workload& w, const SubJoinSet& sj, const PlanOrders& plan) {
    json j;
    j["objective"] = plan.objective;
    j["status"] = plan.status;
    j["orders"] = json::array();
    for (const auto& o : plan.query_orders) {
        json oj;
        oj["query"] = w.queries.at(static_cast<size_t>(o.query)).id;
        oj["start"] = w.rel(o.start).name;
        oj["hops"] = order_hops_json(w, sj, o);
        j["orders"].push_back(std::move(oj));
    }
    std::map<int, std::set<AttrRef>> partitions;
    for (const auto& o : plan.query_orders)
        for (const auto& h : o.hops)
            if (!sj.at(h.subjoin).is_base()) partitions[h.subjoin].insert(h.partition);
    for (const auto& o : plan.fragment_orders)
        for (const auto& h : o.hops)
            if (!sj.at(h.subjoin).is_base()) partitions[h.subjoin].insert(h.partition);
    j["mirs"] = json::array();
    for (const auto& [fid, parts] : partitions) {
        const SubJoin& m = sj.at(fid);
        json mj;
        mj["relations"] = json::array();
        for (RelId r : m.relations.members()) mj["relations"].push_back(w.rel(r).name);
        mj["predicates"] = predicates_json(w, m.predicates);
        mj["partitions"] = json::array();
        for (const auto& a : parts) mj["partitions"].push_back(attr_ref_json(w, a));
        mj["orders"] = json::array();
        for (const auto& o : plan.fragment_orders) {
            if (o.target != fid) continue;
            json oj;
            oj["start"] = w.rel(o.start).name;
            oj["hops"] = order_hops_json(w, sj, o);
            mj["orders"].push_back(std::move(oj));
        }
        j["mirs"].push_back(std::move(mj));
    }
    return j.dump(2) + "\n";
}

PlanOrders parse_plan(const std::string& json_text, const Workload& w,
                      const SubJoinSet& sj, StepRegistry& steps) {
    json j = must_parse(json_text, "plan");
    PlanOrders plan;
    plan.objective = j.value("objective", 0.0);
    plan.status = j.value("status", std::string{"optimal"});

    std::set<std::pair<int, RelId>> seen;
    for (const auto& oj : j.value("orders", json::array())) {
        std::string qid = oj.value("query", std::string{});
        const Query* q = w.find_query(qid);
        if (!q) throw ValidationError("plan order references unknown query " + qid);
        int qi = static_cast<int>(q - w.queries.data());
        std::string where = "plan order for " + qid;
        ParsedHops ph = parse_hops(w, sj, oj, *q, where);
        if (!seen.insert({qi, ph.start}).second)
            throw ValidationError("plan has two orders for query " + qid + " from " +
                                  w.rel(ph.start).name);
        plan.query_orders.push_back(make_order(w, sj, *q, qi, -1, ph, steps));
    }
    for (const auto& q : w.queries) {
        int qi = static_cast<int>(&q - w.queries.data());
        for (RelId r : q.relations.members())
            if (!seen.count({qi, r}))
                throw ValidationError("plan misses an order for query " + q.id +
                                      " from " + w.rel(r).name);
    }

    std::set<int> produced;
    for (const auto& mj : j.value("mirs", json::array())) {
        RelSet rels;
        for (const auto& rn : mj.value("relations", json::array()))
            rels.add(w.rel_id(rn.get<std::string>()));
        std::vector<Predicate> preds =
            parse_predicates(w, mj.value("predicates", json::array()), "plan fragment");
        for (auto& p : preds)
            if (p.right < p.left) std::swap(p.left, p.right);
        std::sort(preds.begin(), preds.end());
        int fid = sj.find(rels, preds);
        if (fid < 0)
            throw ValidationError("plan materializes a fragment the workload "
                                  "does not generate");
        produced.insert(fid);
        const SubJoin& m = sj.at(fid);
        Query context;
        context.id = "fragment:" + m.name;
        context.relations = m.relations;
        context.predicates = m.predicates;
        std::set<RelId> starts;
        for (const auto& oj : mj.value("orders", json::array())) {
            std::string where = "plan order for fragment " + m.name;
            ParsedHops ph = parse_hops(w, sj, oj, context, where);
            if (!starts.insert(ph.start).second)
                throw ValidationError("plan has two producing orders for fragment " +
                                      m.name + " from " + w.rel(ph.start).name);
            plan.fragment_orders.push_back(make_order(w, sj, context, -1, fid, ph, steps));
        }
        for (RelId r : m.relations.members())
            if (!starts.count(r))
                throw ValidationError("plan misses a producing order for fragment " +
                                      m.name + " from " + w.rel(r).name);
    }

    std::set<int> probed;
    for (const auto& o : plan.query_orders)
        for (const auto& h : o.hops)
            if (!sj.at(h.subjoin).is_base()) probed.insert(h.subjoin);
    for (const auto& o : plan.fragment_orders)
        for (const auto& h : o.hops)
            if (!sj.at(h.subjoin).is_base()) probed.insert(h.subjoin);
    for (int fid : probed)
        if (!produced.count(fid))
            throw ValidationError("plan probes fragment " + sj.at(fid).name +
                                  " but never materializes it");
    for (int fid : produced)
        if (!probed.count(fid))
            throw ValidationError("plan materializes fragment " + sj.at(fid).name +
                                  " but never probes it");
    return plan;
}

PlanOrders load_plan(const std::string& path, const Workload& w, const SubJoinSet& sj,
                     StepRegistry& steps) {
    return parse_plan(read_file(path), w, sj, steps);
}

std::vector<TraceEvent> parse_trace(const std::string& text, const Workload& w) {
    std::vector<TraceEvent> events;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    int64_t prev_ts = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = must_parse(line, "trace line " + std::to_string(lineno));
        TraceEvent ev;
        ev.rel = j.value("rel", std::string{});
        RelId rid = w.rel_id(ev.rel);
        if (!j.contains("ts") || !j.at("ts").is_number_integer())
            throw ValidationError("trace line " + std::to_string(lineno) +
                                  " needs an integer ts");
        ev.ts = j.at("ts").get<int64_t>();
        if (ev.ts < 0)
            throw ValidationError("trace line " + std::to_string(lineno) +
                                  " has a negative ts");
        if (!events.empty() && ev.ts < prev_ts)
            throw ValidationError("trace timestamps decrease at line " +
                                  std::to_string(lineno));
        prev_ts = ev.ts;
        json attrs = j.value("attrs", json::object());
        for (const auto& [k, v] : attrs.items()) {
            if (!w.rel(rid).attr_index(k))
                throw ValidationError("UnknownAttribute: " + ev.rel + "." + k +
                                      " in trace line " + std::to_string(lineno));
            ev.attrs[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
        for (const auto& a : w.rel(rid).attributes)
            if (!ev.attrs.count(a))
                throw ValidationError("trace line " + std::to_string(lineno) +
                                      " misses attribute " + ev.rel + "." + a);
        ev.seq = static_cast<uint64_t>(events.size());
        events.push_back(std::move(ev));
    }
    return events;
}

std::vector<TraceEvent> load_trace(const std::string& path, const Workload& w) {
    return parse_trace(read_file(path), w);
}

std::string trace_to_jsonl(const std::vector<TraceEvent>& events) {
    std::string out;
    for (const auto& ev : events) {
        json j;
        j["rel"] = ev.rel;
        j["ts"] = ev.ts;
        j["attrs"] = ev.attrs;
        out += j.dump() + "\n";
    }
    return out;
}

bool ResultRecord::operator<(const ResultRecord& o) const {
    auto key = [](const ResultRecord& r) {
        std::vector<std::tuple<std::string, int64_t, std::map<std::string, std::string>>> t;
        for (const auto& ev : r.tuples) t.emplace_back(ev.rel, ev.ts, ev.attrs);
        return std::make_tuple(r.query, r.ts, std::move(t));
    };
    return key(*this) < key(o);
}

bool ResultRecord::operator==(const ResultRecord& o) const {
    return !(*this < o) && !(o < *this);
}

std::string results_to_jsonl(const std::vector<ResultRecord>& results) {
    std::string out;
    for (const auto& r : results) {
        json j;
        j["query"] = r.query;
        j["ts"] = r.ts;
        j["tuples"] = json::array();
        for (const auto& ev : r.tuples)
            j["tuples"].push_back({{"rel", ev.rel}, {"ts", ev.ts}, {"attrs", ev.attrs}});
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<ResultRecord> parse_results(const std::string& text) {
    std::vector<ResultRecord> out;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = must_parse(line, "results line " + std::to_string(lineno));
        ResultRecord r;
        r.query = j.value("query", std::string{});
        r.ts = j.value("ts", int64_t{0});
        for (const auto& tj : j.value("tuples", json::array())) {
            TraceEvent ev;
            ev.rel = tj.value("rel", std::string{});
            ev.ts = tj.value("ts", int64_t{0});
            json attrs = tj.value("attrs", json::object());
            for (const auto& [k, v] : attrs.items())
                ev.attrs[k] = v.is_string() ? v.get<std::string>() : v.dump();
            r.tuples.push_back(std::move(ev));
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::string metrics_to_jsonl(const std::vector<MetricsRow>& rows) {
    std::string out;
    for (const auto& m : rows) {
        json j;
        j["epoch"] = m.epoch;
        j["digest"] = m.digest;
        j["probe_messages"] = m.probe_messages;
        j["tuples_stored"] = m.tuples_stored;
        j["results_total"] = m.results_total;
        j["results"] = m.results;
        j["arrivals"] = m.arrivals;
        json preds = json::object();
        for (const auto& [name, v] : m.predicates)
            preds[name] = {{"pairs", v[0]}, {"matches", v[1]}, {"estimate", v[2]}};
        j["predicates"] = std::move(preds);
        out += j.dump() + "\n";
    }
    return out;
}

std::string bench_to_csv(const std::vector<BenchRow>& rows) {
    std::string out = "n_q,individual_cost,mqo_cost,variables,probe_orders,solve_ms\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%llu,%llu,%.3f\n", r.n_q,
                      r.individual_cost, r.mqo_cost,
                      static_cast<unsigned long long>(r.variables),
                      static_cast<unsigned long long>(r.probe_orders), r.solve_ms);
        out += buf;
    }
    return out;
}

std::vector<BenchRow> parse_bench_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) ||
        line != "n_q,individual_cost,mqo_cost,variables,probe_orders,solve_ms")
        throw ValidationError("benchmark CSV misses the expected header");
    std::vector<BenchRow> rows;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != 6)
            throw ValidationError("benchmark CSV line " + std::to_string(lineno) +
                                  " needs 6 columns");
        try {
            BenchRow r;
            r.n_q = std::stoi(cells[0]);
            r.individual_cost = std::stod(cells[1]);
            r.mqo_cost = std::stod(cells[2]);
            r.variables = std::stoull(cells[3]);
            r.probe_orders = std::stoull(cells[4]);
            r.solve_ms = std::stod(cells[5]);
            rows.push_back(r);
        } catch (const std::exception&) {
            throw ValidationError("benchmark CSV line " + std::to_string(lineno) +
                                  " has a malformed number");
        }
    }
    return rows;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path);
    out << content;
    if (!out.good()) throw ValidationError("failed writing " + path);
}

}  // namespace mqjoin
