#include <cstdio>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "mqjoin/bench.hpp"
#include "mqjoin/generator.hpp"
#include "mqjoin/ilp.hpp"
#include "mqjoin/io.hpp"
#include "mqjoin/runtime.hpp"
#include "support.hpp"

using namespace mqjoin;
using namespace mqjoin::test;
using nlohmann::json;

namespace {

/** Serialized shared optimum for the two-chain workload, plus the pieces
 *  needed to re-parse and to mutate it. */
struct PlanFixture {
    Workload w = two_chain_workload();
    SubJoinSet sj = SubJoinSet::enumerate(w);
    PlanOrders plan;
    std::string text;

    PlanFixture() {
        Statistics stats(&w);
        CandidateSet cs = build_candidates(w, sj, CandidateOptions{});
        CostModel(w, sj, stats).price(cs);
        IlpModel m = build_ilp(cs);
        IlpSolution sol = solve(m, cs);
        plan = plan_orders_from_selection(cs, extract_plan(m, sol, cs));
        text = plan_to_json(w, sj, plan);
    }

    PlanOrders parse(const std::string& t) const {
        StepRegistry steps;
        return parse_plan(t, w, sj, steps);
    }
};

std::set<std::string> signatures(const Workload& w, const SubJoinSet& sj,
                                 const std::vector<PartitionedOrder>& orders) {
    std::set<std::string> out;
    for (const auto& o : orders) out.insert(order_signature(w, sj, o));
    return out;
}

/** Observed match fraction of `left` = `right` over a whole trace. */
double trace_selectivity(const Workload& w, const std::vector<TraceEvent>& evs,
                         const std::string& lrel, const std::string& lattr,
                         const std::string& rrel, const std::string& rattr) {
    std::unordered_map<std::string, uint64_t> hist;
    uint64_t nl = 0, nr = 0, matches = 0;
    for (const auto& e : evs)
        if (e.rel == lrel) {
            hist[e.attrs.at(lattr)]++;
            nl++;
        }
    for (const auto& e : evs)
        if (e.rel == rrel) {
            nr++;
            auto it = hist.find(e.attrs.at(rattr));
            if (it != hist.end()) matches += it->second;
        }
    REQUIRE(nl > 0);
    REQUIRE(nr > 0);
    (void)w;
    return static_cast<double>(matches) / (static_cast<double>(nl) * nr);
}

}  // namespace

TEST_CASE("a workload survives the JSON round trip") {
    Workload w = two_chain_workload();
    Workload back = parse_workload(workload_to_json(w));

    REQUIRE(back.relations.size() == w.relations.size());
    for (size_t i = 0; i < w.relations.size(); ++i) {
        CHECK(back.relations[i].name == w.relations[i].name);
        CHECK(back.relations[i].attributes == w.relations[i].attributes);
        CHECK(back.relations[i].rate == w.relations[i].rate);
        CHECK(back.relations[i].window == w.relations[i].window);
        CHECK(back.relations[i].parallelism == w.relations[i].parallelism);
    }
    REQUIRE(back.queries.size() == w.queries.size());
    for (size_t i = 0; i < w.queries.size(); ++i) {
        CHECK(back.queries[i].id == w.queries[i].id);
        CHECK(back.queries[i].relations == w.queries[i].relations);
        REQUIRE(back.queries[i].predicates.size() == w.queries[i].predicates.size());
        for (size_t p = 0; p < w.queries[i].predicates.size(); ++p) {
            CHECK(back.queries[i].predicates[p] == w.queries[i].predicates[p]);
            CHECK(back.queries[i].predicates[p].selectivity ==
                  w.queries[i].predicates[p].selectivity);
        }
    }
    CHECK(workload_to_json(back) == workload_to_json(w));
}

TEST_CASE("workload parsing rejects malformed input") {
    SUBCASE("not JSON") {
        CHECK_THROWS_WITH_AS(parse_workload("{nope"), "malformed JSON in workload",
                             ValidationError);
    }
    SUBCASE("no relations array") {
        CHECK_THROWS_WITH_AS(parse_workload("{}"), "workload needs a relations array",
                             ValidationError);
    }

    json base = json::parse(workload_to_json(two_chain_workload()));
    SUBCASE("query without relations") {
        base["queries"][0].erase("relations");
        CHECK_THROWS_WITH_AS(parse_workload(base.dump()),
                             "query q1 needs a relations array", ValidationError);
    }
    SUBCASE("unknown attribute in a predicate") {
        base["queries"][0]["predicates"][0]["left"] = {"R", "z"};
        CHECK_THROWS_WITH_AS(parse_workload(base.dump()),
                             "UnknownAttribute: R.z in query q1", ValidationError);
    }
    SUBCASE("predicate over a relation outside the query") {
        base["queries"][0]["predicates"][0]["left"] = {"U", "d"};
        CHECK_THROWS_AS(parse_workload(base.dump()), ValidationError);
    }
    SUBCASE("predicate missing a side") {
        base["queries"][0]["predicates"][0].erase("right");
        CHECK_THROWS_WITH_AS(parse_workload(base.dump()),
                             "query q1 has a predicate without left/right",
                             ValidationError);
    }
    SUBCASE("attribute reference that is not a pair") {
        base["queries"][0]["predicates"][0]["left"] = "R.b";
        CHECK_THROWS_AS(parse_workload(base.dump()), ValidationError);
    }
}

TEST_CASE("an omitted selectivity falls back to one match per window") {
    json j = json::parse(workload_to_json(two_chain_workload()));
    j["queries"][0]["predicates"][0].erase("selectivity");
    Workload w = parse_workload(j.dump());
    CHECK(w.queries[0].predicates[0].selectivity == 0.01);
}

TEST_CASE("a plan survives the JSON round trip") {
    PlanFixture fx;
    PlanOrders back = fx.parse(fx.text);

    CHECK(back.objective == fx.plan.objective);
    CHECK(back.status == fx.plan.status);
    REQUIRE(back.query_orders.size() == fx.plan.query_orders.size());
    REQUIRE(back.fragment_orders.size() == fx.plan.fragment_orders.size());
    CHECK(signatures(fx.w, fx.sj, back.query_orders) ==
          signatures(fx.w, fx.sj, fx.plan.query_orders));
    CHECK(signatures(fx.w, fx.sj, back.fragment_orders) ==
          signatures(fx.w, fx.sj, fx.plan.fragment_orders));
    for (const auto& o : back.query_orders) {
        CHECK(o.steps.size() == o.hops.size());
        for (const auto& h : o.hops)
            if (!fx.sj.at(h.subjoin).is_base()) CHECK_FALSE(h.links.empty());
    }
    CHECK(plan_to_json(fx.w, fx.sj, back) == fx.text);
}

TEST_CASE("plan parsing enforces exactly one order per slot") {
    PlanFixture fx;
    json base = json::parse(fx.text);

    SUBCASE("unknown query") {
        json j = base;
        j["orders"][0]["query"] = "q9";
        CHECK_THROWS_WITH_AS(fx.parse(j.dump()),
                             "plan order references unknown query q9", ValidationError);
    }
    SUBCASE("two orders for one start") {
        json j = base;
        j["orders"].push_back(j["orders"][0]);
        CHECK_THROWS_AS(fx.parse(j.dump()), ValidationError);
    }
    SUBCASE("missing query order") {
        json j = base;
        j["orders"].erase(0);
        CHECK_THROWS_AS(fx.parse(j.dump()), ValidationError);
    }
    SUBCASE("duplicate fragment producer") {
        json j = base;
        REQUIRE(j["mirs"].size() == 1);
        j["mirs"][0]["orders"].push_back(j["mirs"][0]["orders"][0]);
        CHECK_THROWS_AS(fx.parse(j.dump()), ValidationError);
    }
    SUBCASE("missing fragment producer") {
        json j = base;
        j["mirs"][0]["orders"].erase(0);
        CHECK_THROWS_AS(fx.parse(j.dump()), ValidationError);
    }
}

TEST_CASE("plan parsing ties probing to materialization") {
    PlanFixture fx;
    json base = json::parse(fx.text);

    SUBCASE("probed but never materialized") {
        json j = base;
        j.erase("mirs");
        CHECK_THROWS_WITH_AS(fx.parse(j.dump()),
                             "plan probes fragment ST but never materializes it",
                             ValidationError);
    }
    SUBCASE("materialized but never probed") {
        Statistics stats(&fx.w);
        CandidateOptions base_opts;
        base_opts.allow_mir_hops = false;
        CandidateSet cs = build_candidates(fx.w, fx.sj, base_opts);
        CostModel(fx.w, fx.sj, stats).price(cs);
        IlpModel m = build_ilp(cs);
        IlpSolution sol = solve(m, cs);
        json j = json::parse(plan_to_json(
            fx.w, fx.sj, plan_orders_from_selection(cs, extract_plan(m, sol, cs))));
        j["mirs"] = base["mirs"];
        CHECK_THROWS_WITH_AS(fx.parse(j.dump()),
                             "plan materializes fragment ST but never probes it",
                             ValidationError);
    }
    SUBCASE("fragment the workload does not generate") {
        json j = base;
        j["mirs"][0]["relations"] = {"R", "U"};
        j["mirs"][0]["predicates"] = json::array();
        CHECK_THROWS_AS(fx.parse(j.dump()), ValidationError);
    }
    SUBCASE("hop partitioned outside the hop") {
        json j = base;
        for (auto& oj : j["orders"])
            for (auto& hj : oj["hops"])
                if (hj["relations"].size() == 1 && hj["relations"][0] == "T")
                    hj["partition"] = {"U", "d"};
        CHECK_THROWS_AS(fx.parse(j.dump()), ValidationError);
    }
}

TEST_CASE("a trace survives the JSONL round trip") {
    Workload w = two_chain_workload();
    TraceBuilder tb;
    tb.add("R", 0, {{"b", "x"}})
        .add("S", 0, {{"b", "x"}, {"c", "y"}})
        .add("T", 2, {{"c", "y"}, {"d", "z"}});

    std::vector<TraceEvent> back = parse_trace(trace_to_jsonl(tb.events), w);
    REQUIRE(back.size() == 3);
    for (size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].rel == tb.events[i].rel);
        CHECK(back[i].ts == tb.events[i].ts);
        CHECK(back[i].attrs == tb.events[i].attrs);
        CHECK(back[i].seq == i);
    }

    SUBCASE("blank lines are skipped") {
        std::string text = "\n" + trace_to_jsonl(tb.events) + "\n";
        CHECK(parse_trace(text, w).size() == 3);
    }
}

TEST_CASE("trace parsing validates shape and order") {
    Workload w = two_chain_workload();
    auto line = [](const json& j) { return j.dump() + "\n"; };
    json ok = {{"rel", "R"}, {"ts", 1}, {"attrs", {{"b", "x"}}}};

    SUBCASE("decreasing timestamps") {
        json early = ok;
        early["ts"] = 0;
        CHECK_THROWS_WITH_AS(parse_trace(line(ok) + line(early), w),
                             "trace timestamps decrease at line 2", ValidationError);
    }
    SUBCASE("negative timestamp") {
        json j = ok;
        j["ts"] = -1;
        CHECK_THROWS_WITH_AS(parse_trace(line(j), w), "trace line 1 has a negative ts",
                             ValidationError);
    }
    SUBCASE("missing timestamp") {
        json j = ok;
        j.erase("ts");
        CHECK_THROWS_WITH_AS(parse_trace(line(j), w), "trace line 1 needs an integer ts",
                             ValidationError);
    }
    SUBCASE("unknown relation") {
        json j = ok;
        j["rel"] = "Z";
        CHECK_THROWS_WITH_AS(parse_trace(line(j), w), "UnknownRelation: Z",
                             ValidationError);
    }
    SUBCASE("unknown attribute") {
        json j = ok;
        j["attrs"]["z"] = "1";
        CHECK_THROWS_WITH_AS(parse_trace(line(j), w),
                             "UnknownAttribute: R.z in trace line 1", ValidationError);
    }
    SUBCASE("missing attribute") {
        json j = {{"rel", "S"}, {"ts", 1}, {"attrs", {{"b", "x"}}}};
        CHECK_THROWS_WITH_AS(parse_trace(line(j), w), "trace line 1 misses attribute S.c",
                             ValidationError);
    }
    SUBCASE("non-string values are kept as their JSON text") {
        json j = ok;
        j["attrs"]["b"] = 7;
        CHECK(parse_trace(line(j), w)[0].attrs.at("b") == "7");
    }
}

TEST_CASE("results and metrics serialize to JSONL") {
    Workload w = two_chain_workload();
    TraceBuilder tb;
    tb.add("S", 0, {{"b", "x"}, {"c", "y"}})
        .add("R", 0, {{"b", "x"}})
        .add("T", 1, {{"c", "y"}, {"d", "z"}})
        .add("U", 1, {{"d", "z"}});
    SimOptions opts;
    opts.mode = SimOptions::Mode::Static;
    SimOutput out = Simulator(w, opts).run(tb.events);
    REQUIRE(out.results.size() == 2);

    std::vector<ResultRecord> back = parse_results(results_to_jsonl(out.results));
    CHECK(same_results(back, out.results));

    std::string mx = metrics_to_jsonl(out.metrics);
    json first = json::parse(mx.substr(0, mx.find('\n')));
    CHECK(first.at("epoch") == 0);
    CHECK(first.at("digest") == out.metrics[0].digest);
    CHECK(first.at("results_total") == 2);
    CHECK(first.at("results").at("q1") == 1);
    CHECK(first.at("arrivals").at("S") == 1);
    CHECK(first.at("predicates").contains("S.c=T.c"));
    CHECK(first.at("predicates").at("S.c=T.c").contains("estimate"));
}

TEST_CASE("benchmark rows survive the CSV round trip") {
    std::vector<BenchRow> rows = {{10, 950.0, 800.0, 56, 36, 1.5},
                                  {20, 1900.25, 1400.5, 112, 72, 12.25}};
    std::string csv = bench_to_csv(rows);
    CHECK(csv.rfind("n_q,individual_cost,mqo_cost,variables,probe_orders,solve_ms\n",
                    0) == 0);

    std::vector<BenchRow> back = parse_bench_csv(csv);
    REQUIRE(back.size() == 2);
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].n_q == rows[i].n_q);
        CHECK(back[i].individual_cost == rows[i].individual_cost);
        CHECK(back[i].mqo_cost == rows[i].mqo_cost);
        CHECK(back[i].variables == rows[i].variables);
        CHECK(back[i].probe_orders == rows[i].probe_orders);
        CHECK(back[i].solve_ms == doctest::Approx(rows[i].solve_ms).epsilon(1e-6));
    }

    SUBCASE("wrong header") {
        CHECK_THROWS_WITH_AS(parse_bench_csv("a,b\n1,2\n"),
                             "benchmark CSV misses the expected header", ValidationError);
    }
    SUBCASE("wrong column count") {
        CHECK_THROWS_AS(parse_bench_csv(csv + "1,2,3\n"), ValidationError);
    }
    SUBCASE("malformed number") {
        CHECK_THROWS_AS(parse_bench_csv(csv + "x,1,1,1,1,1\n"), ValidationError);
    }
}

TEST_CASE("file helpers name the offending path") {
    std::string path = "/tmp/mqjoin_io_test.txt";
    write_file(path, "payload\n");
    CHECK(read_file(path) == "payload\n");
    std::remove(path.c_str());
    CHECK_THROWS_WITH_AS(read_file("/nonexistent/nope.txt"),
                         "cannot open /nonexistent/nope.txt", ValidationError);
    CHECK_THROWS_WITH_AS(write_file("/nonexistent/nope.txt", "x"),
                         "cannot write /nonexistent/nope.txt", ValidationError);
}

TEST_CASE("the workload generator is a pure function of its config") {
    WorkloadGenConfig cfg;
    cfg.n_relations = 8;
    cfg.attrs_per_relation = 2;
    cfg.n_queries = 5;
    cfg.query_size = 3;
    cfg.seed = 7;

    Workload a = gen_workload(cfg);
    Workload b = gen_workload(cfg);
    CHECK(workload_to_json(a) == workload_to_json(b));

    cfg.seed = 8;
    CHECK(workload_to_json(gen_workload(cfg)) != workload_to_json(a));

    CHECK(a.relations.size() == 8);
    CHECK(a.relations[0].name == "R0");
    CHECK(a.relations[0].attributes == std::vector<std::string>{"a0", "a1"});
    REQUIRE(a.queries.size() == 5);
    std::set<std::pair<RelSet, std::vector<Predicate>>> shapes;
    for (const auto& q : a.queries) {
        CHECK(q.relations.count() == 3);
        CHECK(q.predicates.size() == 2);
        for (const auto& p : q.predicates) CHECK(p.selectivity == 1.0 / cfg.rate);
        CHECK(shapes.insert({q.relations, q.predicates}).second);
    }
}

TEST_CASE("the workload generator reports exhaustion") {
    WorkloadGenConfig cfg;
    cfg.n_relations = 2;
    cfg.attrs_per_relation = 1;
    cfg.n_queries = 3;
    cfg.query_size = 2;
    CHECK_THROWS_WITH_AS(
        gen_workload(cfg),
        "GenerationExhausted: no distinct shape left for query 2 after 200 attempts",
        ValidationError);
}

TEST_CASE("generator configs are validated") {
    WorkloadGenConfig cfg;
    SUBCASE("query size") {
        cfg.query_size = 1;
        CHECK_THROWS_WITH_AS(gen_workload(cfg),
                             "workload generator needs 2 <= query_size <= n_relations",
                             ValidationError);
    }
    SUBCASE("query wider than the pool") {
        cfg.query_size = cfg.n_relations + 1;
        CHECK_THROWS_AS(gen_workload(cfg), ValidationError);
    }
    SUBCASE("attributes") {
        cfg.attrs_per_relation = 0;
        CHECK_THROWS_WITH_AS(gen_workload(cfg),
                             "workload generator needs at least one attribute",
                             ValidationError);
    }
    SUBCASE("rate") {
        cfg.rate = 0.0;
        CHECK_THROWS_WITH_AS(gen_workload(cfg),
                             "workload generator needs positive rate and window",
                             ValidationError);
    }
    SUBCASE("trace duration") {
        CHECK_THROWS_WITH_AS(gen_trace(two_chain_workload(), TraceGenConfig{0, 1}),
                             "trace generator needs a positive duration",
                             ValidationError);
    }
}

TEST_CASE("traces arrive at the configured rate") {
    Workload w = two_chain_workload(10.0);
    std::vector<TraceEvent> evs = gen_trace(w, TraceGenConfig{25, 5});

    std::map<std::string, int> counts;
    int64_t prev = 0;
    for (const auto& e : evs) {
        counts[e.rel]++;
        CHECK(e.ts >= prev);
        prev = e.ts;
        CHECK(e.ts < 25);
    }
    for (const auto& [rel, n] : counts) CHECK(n == 250);

    SUBCASE("fractional rates accumulate by the floor rule") {
        Workload slow = two_chain_workload();
        for (auto& r : slow.relations) r.rate = 0.4;
        std::vector<TraceEvent> sparse = gen_trace(slow, TraceGenConfig{10, 5});
        std::map<std::string, int> c2;
        std::set<int64_t> r_ticks;
        for (const auto& e : sparse) {
            c2[e.rel]++;
            if (e.rel == "R") r_ticks.insert(e.ts);
        }
        for (const auto& [rel, n] : c2) CHECK(n == 4);
        CHECK(r_ticks == std::set<int64_t>{2, 4, 7, 9});
    }

    SUBCASE("same seed, same trace") {
        std::vector<TraceEvent> again = gen_trace(w, TraceGenConfig{25, 5});
        REQUIRE(again.size() == evs.size());
        for (size_t i = 0; i < evs.size(); ++i) {
            CHECK(again[i].rel == evs[i].rel);
            CHECK(again[i].ts == evs[i].ts);
            CHECK(again[i].attrs == evs[i].attrs);
        }
    }
}

TEST_CASE("trace value domains realize the configured selectivities") {
    Workload w = two_chain_workload(10.0);
    std::vector<TraceEvent> evs = gen_trace(w, TraceGenConfig{100, 13});

    CHECK(trace_selectivity(w, evs, "S", "c", "T", "c") ==
          doctest::Approx(1.0 / 67).epsilon(0.15));
    CHECK(trace_selectivity(w, evs, "R", "b", "S", "b") ==
          doctest::Approx(0.01).epsilon(0.15));
    CHECK(trace_selectivity(w, evs, "T", "d", "U", "d") ==
          doctest::Approx(0.01).epsilon(0.15));

    SUBCASE("attributes an optimizer never joins draw from the wide default") {
        Workload lone;
        lone.relations = {{"Z", {"a"}, 10.0, 1.0, 1}};
        lone.relation_ids = {{"Z", 0}};
        validate_workload(lone);
        std::vector<TraceEvent> zs = gen_trace(lone, TraceGenConfig{40, 2});
        std::set<std::string> distinct;
        for (const auto& e : zs) {
            int v = std::stoi(e.attrs.at("a").substr(1));
            CHECK(v >= 0);
            CHECK(v < 1000);
            distinct.insert(e.attrs.at("a"));
        }
        CHECK(distinct.size() > 250);
    }
}

TEST_CASE("a benchmark sweep keeps shared plans at or below individual ones") {
    BenchConfig cfg;
    cfg.sweep = {2, 4};
    cfg.shape.n_relations = 6;
    cfg.shape.attrs_per_relation = 2;
    cfg.shape.query_size = 3;
    cfg.shape.rate = 50.0;
    cfg.shape.seed = 3;
    cfg.repetitions = 1;

    std::vector<BenchPoint> points = run_bench(cfg);
    REQUIRE(points.size() == 2);
    for (size_t i = 0; i < points.size(); ++i) {
        const BenchRow& row = points[i].row;
        CHECK(row.n_q == cfg.sweep[i]);
        CHECK(row.mqo_cost <= row.individual_cost + 1e-9);
        CHECK(row.mqo_cost > 0.0);
        CHECK(row.variables > 0);
        CHECK(row.probe_orders > 0);
        CHECK(row.solve_ms >= 0.0);
    }
    CHECK(points[1].row.variables > points[0].row.variables);

    std::vector<BenchRow> rows = bench_rows(points);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].n_q == 2);
    CHECK(rows[1].mqo_cost == points[1].row.mqo_cost);
    CHECK(parse_bench_csv(bench_to_csv(rows)).size() == 2);
}
