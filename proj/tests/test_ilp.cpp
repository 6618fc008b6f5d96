#include <algorithm>
#include <set>
#include <string>

#include "doctest.h"
#include "mqjoin/generator.hpp"
#include "mqjoin/ilp.hpp"
#include "support.hpp"

using namespace mqjoin;
using namespace mqjoin::test;

namespace {

struct Model {
    Workload w;
    SubJoinSet sj;
    CandidateSet cs;
    IlpModel m;

    explicit Model(Workload workload, CandidateOptions opts = {})
        : w(std::move(workload)), sj(SubJoinSet::enumerate(w)) {
        Statistics stats(&w);
        cs = build_candidates(w, sj, opts);
        CostModel(w, sj, stats).price(cs);
        m = build_ilp(cs);
    }
};

CandidateOptions base_only() {
    CandidateOptions opts;
    opts.allow_mir_hops = false;
    return opts;
}

const LinRow* row_labeled(const IlpModel& m, const std::string& label) {
    for (const auto& r : m.rows)
        if (r.label == label) return &r;
    return nullptr;
}

std::string chosen_signature(const Model& mx, const IlpSolution& sol, int query,
                             RelId start) {
    int si = slot_index(mx.cs, query, start);
    REQUIRE(si >= 0);
    int oi = sol.slot_choice.at(si);
    REQUIRE(oi >= 0);
    return order_signature(mx.w, mx.sj, mx.cs.orders[oi]);
}

}  // namespace

TEST_CASE("model layout: order variables, then step variables with costs") {
    Model mx(two_chain_workload());
    REQUIRE(mx.m.vars.size() == mx.cs.orders.size() + mx.cs.steps.size());
    for (size_t i = 0; i < mx.cs.orders.size(); ++i) {
        CHECK(mx.m.vars[i].is_order);
        CHECK(mx.m.vars[i].goal_coeff == 0.0);
    }
    for (size_t i = mx.cs.orders.size(); i < mx.m.vars.size(); ++i) {
        CHECK_FALSE(mx.m.vars[i].is_order);
        CHECK(mx.m.vars[i].goal_coeff == mx.cs.steps.at(mx.m.vars[i].ref).cost);
    }
    std::set<std::string> names;
    for (const auto& v : mx.m.vars) CHECK(names.insert(v.name).second);
}

TEST_CASE("every query slot gets a one-of row; fragment slots get none") {
    Model mx(two_chain_workload());
    size_t oneof = 0;
    for (const auto& r : mx.m.rows)
        if (r.label.rfind("oneof_", 0) == 0) {
            oneof++;
            CHECK(r.cmp == 'E');
            CHECK(r.rhs == 1.0);
            CHECK(r.kind == RowKind::Enforced);
        }
    size_t query_slots = 0;
    for (const auto& s : mx.cs.slots)
        if (s.query >= 0) query_slots++;
    CHECK(oneof == query_slots);
    CHECK(oneof == 6);
}

TEST_CASE("fragment demand rows: advisory closure plus enforced binding") {
    Model mx(two_chain_workload());
    int st = fragment_named(mx.sj, "ST");
    int via_st = order_with_signature(mx.w, mx.sj, mx.cs, "q1:R>ST[S.b]");
    REQUIRE(via_st >= 0);

    std::string suffix = std::to_string(via_st) + "_f" + std::to_string(st) + "_r" +
                         std::to_string(mx.w.rel_id("S"));
    const LinRow* advisory = row_labeled(mx.m, "sub_all_" + suffix);
    const LinRow* binding = row_labeled(mx.m, "sub_" + suffix);
    REQUIRE(advisory != nullptr);
    REQUIRE(binding != nullptr);

    CHECK(advisory->kind == RowKind::Advisory);
    CHECK(advisory->cmp == 'G');
    // Two orders produce ST from S, so demanding all of them costs -2 per use.
    CHECK(advisory->terms[0] == std::pair<int, double>{mx.m.order_var[via_st], -2.0});
    CHECK(advisory->terms.size() == 3);

    CHECK(binding->kind == RowKind::Enforced);
    CHECK(binding->terms[0] == std::pair<int, double>{mx.m.order_var[via_st], -1.0});
    CHECK(binding->terms.size() == 3);

    // One advisory and one binding row per (order, fragment, input).
    const LinRow* from_t = row_labeled(mx.m, "sub_" + std::to_string(via_st) + "_f" +
                                                 std::to_string(st) + "_r" +
                                                 std::to_string(mx.w.rel_id("T")));
    CHECK(from_t != nullptr);
}

TEST_CASE("cost rows tie each order to its step variables") {
    Model mx(two_chain_workload());
    int oi = order_with_signature(mx.w, mx.sj, mx.cs, "q1:S>T[T.c]>R[R.b]");
    REQUIRE(oi >= 0);
    const LinRow* row = row_labeled(mx.m, "cost_" + std::to_string(oi));
    REQUIRE(row != nullptr);
    REQUIRE(row->terms.size() == 3);
    CHECK(row->terms[0].second == -175.0);
    CHECK(row->terms[1].second == 100.0);
    CHECK(row->terms[2].second == 75.0);
    CHECK(row->kind == RowKind::Enforced);

    // The shared first step appears under the same variable in q2's cost row.
    int oj = order_with_signature(mx.w, mx.sj, mx.cs, "q2:S>T[T.c]>U[U.d]");
    REQUIRE(oj >= 0);
    const LinRow* other = row_labeled(mx.m, "cost_" + std::to_string(oj));
    REQUIRE(other != nullptr);
    CHECK(other->terms[1].first == row->terms[1].first);
}

TEST_CASE("shared solve on the two-chain workload") {
    SUBCASE("base relations only") {
        Model mx(two_chain_workload(), base_only());
        IlpSolution sol = solve(mx.m, mx.cs);
        CHECK(sol.status == SolveStatus::Optimal);
        CHECK(sol.objective == 800.0);
        CHECK(satisfies_enforced_rows(mx.m, sol.assignment));

        // Sharing flips both (q1,S) and (q2,T) away from their solo optima.
        CHECK(chosen_signature(mx, sol, 0, mx.w.rel_id("S")).rfind("q1:S>T[", 0) == 0);
        CHECK(chosen_signature(mx, sol, 1, mx.w.rel_id("T")).rfind("q2:T>S[", 0) == 0);

        BruteForceResult ref = brute_force_plan(mx.cs);
        CHECK(sol.objective == ref.cost);
    }
    SUBCASE("fragment hops lower the optimum further") {
        Model mx(two_chain_workload());
        IlpSolution sol = solve(mx.m, mx.cs);
        CHECK(sol.status == SolveStatus::Optimal);
        CHECK(sol.objective == 700.0);
        CHECK(satisfies_enforced_rows(mx.m, sol.assignment));
        CHECK(chosen_signature(mx, sol, 0, mx.w.rel_id("R")) == "q1:R>ST[S.b]");
        CHECK(chosen_signature(mx, sol, 1, mx.w.rel_id("U")) == "q2:U>ST[S.b]");

        BruteForceResult ref = brute_force_plan(mx.cs);
        CHECK(sol.objective == ref.cost);
    }
}

TEST_CASE("shared cost never exceeds the sum of per-query optima") {
    Model mx(two_chain_workload(), base_only());
    IlpSolution shared = solve(mx.m, mx.cs);

    double individual = 0.0;
    for (int qi = 0; qi < 2; ++qi) {
        CandidateSet qcs = build_candidates_for(mx.w, mx.sj, base_only(), {qi});
        Statistics stats(&mx.w);
        CostModel(mx.w, mx.sj, stats).price(qcs);
        IlpModel qm = build_ilp(qcs);
        individual += solve(qm, qcs).objective;
    }
    CHECK(individual == 950.0);
    CHECK(shared.objective <= individual);
}

TEST_CASE("extract_plan reproduces the objective and the materialized set") {
    Model mx(two_chain_workload());
    IlpSolution sol = solve(mx.m, mx.cs);
    SelectedPlan plan = extract_plan(mx.m, sol, mx.cs);

    CHECK(plan.total_cost == sol.objective);
    CHECK(plan.query_orders.size() == 6);
    CHECK(plan.fragment_orders.size() == 2);

    int st = fragment_named(mx.sj, "ST");
    REQUIRE(plan.materialized.count(st) == 1);
    CHECK(plan.materialized.at(st) == std::vector<AttrRef>{attr(mx.w, "S", "b")});
    CHECK(plan.materialized.size() == 1);
}

TEST_CASE("solver agrees with brute force across random workloads") {
    int compared = 0;
    for (uint64_t seed = 1; seed <= 60 && compared < 30; ++seed) {
        WorkloadGenConfig shape;
        shape.n_relations = 5;
        shape.attrs_per_relation = 2;
        shape.n_queries = 2;
        shape.query_size = 3;
        shape.rate = 50.0;
        shape.seed = seed;
        Workload w = gen_workload(shape);
        SubJoinSet sj = SubJoinSet::enumerate(w);
        Statistics stats(&w);
        CandidateSet cs = build_candidates(w, sj, CandidateOptions{});
        CostModel(w, sj, stats).price(cs);
        if (brute_force_combinations(cs) > 5e6) continue;
        IlpModel m = build_ilp(cs);

        IlpSolution sol = solve(m, cs);
        BruteForceResult ref = brute_force_plan(cs);
        REQUIRE(sol.status == SolveStatus::Optimal);
        CHECK(sol.objective == ref.cost);
        CHECK(satisfies_enforced_rows(m, sol.assignment));
        compared++;
    }
    CHECK(compared >= 20);
}

TEST_CASE("a feasible hint seeds the incumbent without changing the optimum") {
    Model mx(two_chain_workload());
    std::vector<int> hint(mx.cs.slots.size(), -1);
    for (size_t si = 0; si < mx.cs.slots.size(); ++si) {
        const Slot& slot = mx.cs.slots[si];
        if (slot.query < 0) continue;
        int best = slot.orders[0];
        for (int oi : slot.orders)
            if (mx.cs.orders[oi].pcost < mx.cs.orders[best].pcost) best = oi;
        hint[si] = best;
    }
    // Per-slot minima demand fragments, so their producer slots must be set too.
    for (size_t si = 0; si < mx.cs.slots.size(); ++si)
        if (mx.cs.slots[si].query < 0 && !mx.cs.slots[si].orders.empty())
            hint[si] = mx.cs.slots[si].orders[0];

    IlpSolution sol = solve(mx.m, mx.cs, {}, &hint);
    CHECK(sol.objective == 700.0);

    std::vector<int> bad(3, -1);
    CHECK_THROWS_AS(solve(mx.m, mx.cs, {}, &bad), InternalError);
}

TEST_CASE("node budget turns the solve into a best-effort timeout") {
    WorkloadGenConfig shape;
    shape.n_relations = 8;
    shape.attrs_per_relation = 2;
    shape.n_queries = 8;
    shape.query_size = 3;
    shape.seed = 7;
    Workload w = gen_workload(shape);
    SubJoinSet sj = SubJoinSet::enumerate(w);
    Statistics stats(&w);
    CandidateSet cs = build_candidates(w, sj, CandidateOptions{});
    CostModel(w, sj, stats).price(cs);
    IlpModel m = build_ilp(cs);

    SolveLimits limits;
    limits.time_limit = std::chrono::milliseconds{0};
    limits.node_limit = 1;
    IlpSolution sol = solve(m, cs, limits);
    CHECK(sol.status == SolveStatus::Timeout);
    CHECK(satisfies_enforced_rows(m, sol.assignment));
    CHECK(sol.objective > 0.0);

    IlpSolution full = solve(m, cs, SolveLimits{std::chrono::milliseconds{0}, 0});
    CHECK(full.status == SolveStatus::Optimal);
    CHECK(full.objective <= sol.objective);
}

TEST_CASE("brute force refuses oversized selection spaces") {
    Model mx(two_chain_workload());
    CHECK(brute_force_combinations(mx.cs) == 1679616.0);
    CHECK_THROWS_AS(brute_force_plan(mx.cs, 1000.0), TooLarge);
}

TEST_CASE("LP export carries the whole model in text form") {
    Model mx(two_chain_workload());
    std::string lp = export_lp(mx.m);

    CHECK(lp.rfind("\\ shared probe-order selection", 0) == 0);
    CHECK(lp.find("Minimize") != std::string::npos);
    CHECK(lp.find("Subject To") != std::string::npos);
    CHECK(lp.find("Binary") != std::string::npos);
    CHECK(lp.compare(lp.size() - 4, 4, "End\n") == 0);
    CHECK(lp.find("oneof_s0:") != std::string::npos);
    CHECK(lp.find("sub_all_") != std::string::npos);
    CHECK(lp.find("cost_0:") != std::string::npos);
    CHECK(lp.find("x_q1_R") != std::string::npos);

    for (const auto& v : mx.m.vars) CHECK(lp.find(v.name) != std::string::npos);

    size_t line_start = 0;
    while (line_start < lp.size()) {
        size_t eol = lp.find('\n', line_start);
        if (eol == std::string::npos) eol = lp.size();
        CHECK(eol - line_start <= 255);
        line_start = eol + 1;
    }
}
