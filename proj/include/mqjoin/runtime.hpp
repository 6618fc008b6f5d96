#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mqjoin/io.hpp"

namespace mqjoin {

/** Query registration or removal observed at `tick`. */
struct LifecycleEvent {
    int64_t tick = 0;
    bool add = true;
    Query query;             // for registrations
    std::string remove_id;   // for removals
};

struct SimOptions {
    enum class Mode { Static, Adaptive };
    Mode mode = Mode::Adaptive;
    int64_t epoch_len = 10;
    /** Re-plan at epoch boundaries from observed statistics (adaptive mode). */
    bool reoptimize = true;
    /** Planner budget for in-run solves. The node limit, not the wall clock,
     *  bounds the search so runs stay reproducible. */
    SolveLimits solve_limits{std::chrono::milliseconds{0}, 200000};
    CandidateOptions cand_opts{};
};

struct SimOutput {
    std::vector<ResultRecord> results;
    std::vector<MetricsRow> metrics;
    /** Histogram: workers reached per probe dispatch -> dispatch count. */
    std::map<int, uint64_t> probe_fanouts;
};

/** Deterministic single-process executor of the compiled topologies.
 *
 *  Adaptive runs keep one storage universe per epoch: an arrival is stored in
 *  every universe it can still join into, each universe routes with the
 *  configuration frozen for its epoch, and a result is emitted only in the
 *  universe matching the epoch of its earliest constituent, so plans can
 *  change between epochs without losing or duplicating results. Static runs
 *  keep a single eternal universe and never re-plan. */
class Simulator {
  public:
    Simulator(Workload w, SimOptions opts);

    /** Uses this plan for the initial configuration instead of optimizing. */
    void set_initial_plan(std::string plan_json);

    /** Forces the configuration taking effect at `epoch` (test hook). */
    void schedule_plan(int64_t epoch, std::string plan_json);

    /** Registers a query whose registration is observed at `tick`. It is
     *  planned at the next epoch boundary and answers, including arrivals
     *  retained from before via the capture stores, one epoch later. */
    void schedule_register(int64_t tick, Query q);

    /** Removes a query; results whose earliest constituent falls two or more
     *  epochs after `tick` are no longer emitted. */
    void schedule_remove(int64_t tick, std::string query_id);

    SimOutput run(const std::vector<TraceEvent>& trace) const;

  private:
    Workload workload_;
    SimOptions opts_;
    std::string initial_plan_;
    std::map<int64_t, std::string> forced_plans_;
    std::vector<LifecycleEvent> lifecycle_;
};

/** Reference join: emits exactly the results a correct executor must emit,
 *  by direct enumeration over the trace. Lifecycle events, when given, gate
 *  results the same way the simulator does. */
SimOutput oracle_join(const Workload& w, const std::vector<TraceEvent>& trace,
                      int64_t epoch_len = 10,
                      const std::vector<LifecycleEvent>* lifecycle = nullptr);

}  // namespace mqjoin
