#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mqjoin/cost.hpp"

namespace mqjoin {

/** Enforced rows bind the solver; advisory rows document the closed-form
 *  "select all variants" shape and are exported but not enforced (selecting
 *  one producing order per fragment input is sufficient and cheaper). */
enum class RowKind { Enforced, Advisory };

struct LinRow {
    std::vector<std::pair<int, double>> terms;  // (variable index, coefficient)
    char cmp = 'G';                             // 'G' for >=, 'E' for =
    double rhs = 0.0;
    RowKind kind = RowKind::Enforced;
    std::string label;
};

struct IlpVar {
    std::string name;
    bool is_order = false;  // x variable when true, y (step) variable otherwise
    int ref = -1;           // order index or step id
    double goal_coeff = 0.0;
};

struct IlpModel {
    std::vector<IlpVar> vars;
    std::vector<LinRow> rows;
    std::vector<int> order_var;  // order index -> variable index
    std::vector<int> step_var;   // step id -> variable index
};

enum class SolveStatus { Optimal, Timeout, Infeasible };

struct IlpSolution {
    std::vector<uint8_t> assignment;  // per variable, 0 or 1
    double objective = 0.0;
    SolveStatus status = SolveStatus::Optimal;
    std::vector<int> slot_choice;  // per slot: chosen order index, -1 if none
    uint64_t nodes = 0;
};

struct SelectedPlan {
    std::vector<int> query_orders;     // chosen order index per query slot
    std::vector<int> fragment_orders;  // chosen order index per active fragment slot
    /** Materialized fragments with every partition attribute they are kept under. */
    std::map<int, std::vector<AttrRef>> materialized;
    double total_cost = 0.0;
};

/** Builds the shared-plan selection model: one-of rows per query slot,
 *  producing-order closure rows per fragment use, per-order cost rows, and a
 *  goal summing step costs over shared step variables. */
IlpModel build_ilp(const CandidateSet& cs);

/** True when the 0/1 assignment satisfies every enforced row. */
bool satisfies_enforced_rows(const IlpModel& m, const std::vector<uint8_t>& assignment);

struct SolveLimits {
    /** Wall-clock limit; zero or negative means unlimited. */
    std::chrono::milliseconds time_limit{10000};
    /** Deterministic node budget; zero means unlimited. Preferred over the
     *  wall clock when reproducible outcomes are required. */
    uint64_t node_limit = 0;
};

/** Exact depth-first branch-and-bound over slot choices. Step variables are
 *  implied by the selected orders. `hint` optionally seeds the incumbent with
 *  a known-feasible choice per slot (-1 entries are ignored). */
IlpSolution solve(const IlpModel& model, const CandidateSet& cs,
                  const SolveLimits& limits = {},
                  const std::vector<int>* hint = nullptr);

/** Exhaustive enumeration oracle; throws TooLarge beyond `combination_bound`. */
class TooLarge : public std::runtime_error {
  public:
    explicit TooLarge(const std::string& msg) : std::runtime_error(msg) {}
};

struct BruteForceResult {
    double cost = 0.0;
    std::vector<int> slot_choice;  // per slot: chosen order index, -1 if none
};

BruteForceResult brute_force_plan(const CandidateSet& cs,
                                  double combination_bound = 1e7);

/** Number of slot-choice combinations brute force would enumerate. */
double brute_force_combinations(const CandidateSet& cs);

/** Reads the chosen orders out of a solution and validates plan invariants. */
SelectedPlan extract_plan(const IlpModel& model, const IlpSolution& sol,
                          const CandidateSet& cs);

/** LP-format text: Minimize, Subject To, Binary, End. Advisory rows included. */
std::string export_lp(const IlpModel& model);

}  // namespace mqjoin
