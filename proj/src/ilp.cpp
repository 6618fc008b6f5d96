#include "mqjoin/ilp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>

namespace mqjoin {

namespace {

/** Distinct multi-relation fragments probed by an order, in hop order. */
std::vector<int> order_fragments(const CandidateSet& cs, const PartitionedOrder& o) {
    std::vector<int> out;
    for (const auto& hop : o.hops) {
        // base fragments have no producing orders
        if (cs.fragment_slots.count(hop.subjoin)) {
            if (std::find(out.begin(), out.end(), hop.subjoin) == out.end())
                out.push_back(hop.subjoin);
        }
    }
    return out;
}

}  // namespace

IlpModel build_ilp(const CandidateSet& cs) {
    IlpModel m;
    m.order_var.resize(cs.orders.size());
    m.step_var.resize(cs.steps.size());
    for (size_t oi = 0; oi < cs.orders.size(); ++oi) {
        m.order_var[oi] = static_cast<int>(m.vars.size());
        m.vars.push_back({cs.orders[oi].var_name, true, static_cast<int>(oi), 0.0});
    }
    for (const auto& s : cs.steps.all()) {
        m.step_var[s.id] = static_cast<int>(m.vars.size());
        m.vars.push_back({s.var_name, false, s.id, s.cost});
    }

    for (size_t si = 0; si < cs.slots.size(); ++si) {
        const Slot& slot = cs.slots[si];
        if (slot.query < 0) continue;  // fragment selection is demand-driven
        LinRow row;
        row.cmp = 'E';
        row.rhs = 1.0;
        row.label = "oneof_s" + std::to_string(si);
        for (int oi : slot.orders) row.terms.push_back({m.order_var[oi], 1.0});
        m.rows.push_back(std::move(row));
    }

    for (size_t oi = 0; oi < cs.orders.size(); ++oi) {
        for (int f : order_fragments(cs, cs.orders[oi])) {
            for (size_t fsi : cs.fragment_slots.at(f)) {
                const Slot& fslot = cs.slots[fsi];
                LinRow paper;
                paper.cmp = 'G';
                paper.rhs = 0.0;
                paper.kind = RowKind::Advisory;
                paper.label = "sub_all_" + std::to_string(oi) + "_f" + std::to_string(f) +
                              "_r" + std::to_string(fslot.start);
                paper.terms.push_back(
                    {m.order_var[oi], -static_cast<double>(fslot.orders.size())});
                for (int poi : fslot.orders) paper.terms.push_back({m.order_var[poi], 1.0});
                m.rows.push_back(std::move(paper));

                LinRow bind;
                bind.cmp = 'G';
                bind.rhs = 0.0;
                bind.label = "sub_" + std::to_string(oi) + "_f" + std::to_string(f) + "_r" +
                             std::to_string(fslot.start);
                bind.terms.push_back({m.order_var[oi], -1.0});
                for (int poi : fslot.orders) bind.terms.push_back({m.order_var[poi], 1.0});
                m.rows.push_back(std::move(bind));
            }
        }
    }

    for (size_t oi = 0; oi < cs.orders.size(); ++oi) {
        const auto& o = cs.orders[oi];
        LinRow row;
        row.cmp = 'G';
        row.rhs = 0.0;
        row.label = "cost_" + std::to_string(oi);
        row.terms.push_back({m.order_var[oi], -o.pcost});
        for (int sid : o.steps)
            row.terms.push_back({m.step_var[sid], cs.steps.at(sid).cost});
        m.rows.push_back(std::move(row));
    }
    return m;
}

bool satisfies_enforced_rows(const IlpModel& m, const std::vector<uint8_t>& assignment) {
    for (const auto& row : m.rows) {
        if (row.kind != RowKind::Enforced) continue;
        double lhs = 0.0;
        for (const auto& [vi, c] : row.terms) lhs += c * assignment.at(vi);
        if (row.cmp == 'E' && std::fabs(lhs - row.rhs) > 1e-9) return false;
        if (row.cmp == 'G' && lhs < row.rhs - 1e-9) return false;
    }
    return true;
}

namespace {

using Clock = std::chrono::steady_clock;

struct ComponentResult {
    bool timed_out = false;
};

class SlotSolver {
  public:
    SlotSolver(const CandidateSet& cs, const std::vector<size_t>& slots,
               Clock::time_point deadline, bool use_deadline, uint64_t node_limit,
               uint64_t& nodes, std::vector<int>& sel)
        : cs_(cs),
          slots_(slots),
          deadline_(deadline),
          use_deadline_(use_deadline),
          node_limit_(node_limit),
          nodes_(nodes),
          sel_(sel),
          step_ref_(cs.steps.size(), 0) {}

    ComponentResult run(const std::vector<int>* hint) {
        if (hint) seed_incumbent(*hint);
        for (size_t si : slots_)
            if (cs_.slots[si].query >= 0) pending_.insert(si);
        dfs();
        if (has_best_)
            for (size_t si : slots_) sel_[si] = best_choice_.at(si);
        ComponentResult r;
        r.timed_out = aborted_;
        return r;
    }

  private:
    void seed_incumbent(const std::vector<int>& hint) {
        std::vector<int> forced;
        std::map<size_t, int> choice;
        bool ok = true;
        for (size_t si : slots_) {
            if (cs_.slots[si].query >= 0 && hint[si] < 0) {
                ok = false;
                break;
            }
            if (hint[si] >= 0) choice[si] = hint[si];
        }
        if (!ok) return;
        // demanded fragments must be produced on every input, and produced
        // fragments must actually be demanded
        std::set<int> demanded;
        for (const auto& [si, oi] : choice) {
            (void)si;
            for (int f : order_fragments(cs_, cs_.orders[oi])) {
                demanded.insert(f);
                for (size_t fsi : cs_.fragment_slots.at(f))
                    if (!choice.count(fsi)) return;
            }
        }
        for (const auto& [si, oi] : choice) {
            (void)oi;
            if (cs_.slots[si].query < 0 && !demanded.count(cs_.slots[si].target)) return;
        }
        std::set<int> steps;
        for (const auto& [si, oi] : choice) {
            (void)si;
            for (int sid : cs_.orders[oi].steps) steps.insert(sid);
        }
        std::vector<double> costs;
        for (int sid : steps) costs.push_back(cs_.steps.at(sid).cost);
        best_value_ = canonical_step_sum(costs);
        best_choice_.clear();
        for (size_t si : slots_)
            best_choice_[si] = choice.count(si) ? choice[si] : -1;
        has_best_ = true;
    }

    double marginal(int oi) const {
        double d = 0.0;
        for (int sid : cs_.orders[oi].steps)
            if (step_ref_[sid] == 0) d += cs_.steps.at(sid).cost;
        return d;
    }

    double group_bound() const {
        std::map<RelId, double> gmax;
        for (size_t si : pending_) {
            double mmin = std::numeric_limits<double>::infinity();
            for (int oi : cs_.slots[si].orders) mmin = std::min(mmin, marginal(oi));
            double& g = gmax[cs_.slots[si].start];
            g = std::max(g, mmin);
        }
        double total = 0.0;
        for (const auto& [r, v] : gmax) {
            (void)r;
            total += v;
        }
        return total;
    }

    void leaf() {
        std::vector<double> costs;
        for (int sid : forced_list_) costs.push_back(cs_.steps.at(sid).cost);
        double value = canonical_step_sum(costs);
        if (!has_best_ || value < best_value_) {
            best_value_ = value;
            has_best_ = true;
            best_choice_.clear();
            for (size_t si : slots_) best_choice_[si] = sel_[si];
        }
    }

    void dfs() {
        if (aborted_) return;
        ++nodes_;
        if (has_best_) {
            if (node_limit_ && nodes_ > node_limit_) {
                aborted_ = true;
                return;
            }
            if (use_deadline_ && (nodes_ & 0xFF) == 0 && Clock::now() > deadline_) {
                aborted_ = true;
                return;
            }
        }
        if (pending_.empty()) {
            leaf();
            return;
        }
        if (has_best_ && forced_sum_ + group_bound() >= best_value_) return;

        size_t si = *pending_.begin();
        const Slot& slot = cs_.slots[si];
        std::vector<std::pair<double, int>> ranked;
        for (int oi : slot.orders) ranked.push_back({marginal(oi), oi});
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [mg, oi] : ranked) {
            (void)mg;
            apply(si, oi);
            dfs();
            revert();
            if (aborted_) return;
        }
    }

    struct Undo {
        size_t slot;
        int prev_sel;
        size_t forced_count;
        std::vector<size_t> added_pending;
        double forced_delta;
    };

    void apply(size_t si, int oi) {
        Undo u;
        u.slot = si;
        u.prev_sel = sel_[si];
        u.forced_count = forced_list_.size();
        u.forced_delta = 0.0;
        sel_[si] = oi;
        pending_.erase(si);
        for (int sid : cs_.orders[oi].steps) {
            if (step_ref_[sid]++ == 0) {
                forced_list_.push_back(sid);
                u.forced_delta += cs_.steps.at(sid).cost;
            }
        }
        forced_sum_ += u.forced_delta;
        for (int f : order_fragments(cs_, cs_.orders[oi])) {
            for (size_t fsi : cs_.fragment_slots.at(f)) {
                if (sel_[fsi] < 0 && !pending_.count(fsi)) {
                    pending_.insert(fsi);
                    u.added_pending.push_back(fsi);
                }
            }
        }
        undo_.push_back(std::move(u));
    }

    void revert() {
        Undo& u = undo_.back();
        int oi = sel_[u.slot];
        for (size_t fsi : u.added_pending) pending_.erase(fsi);
        for (int sid : cs_.orders[oi].steps) --step_ref_[sid];
        forced_list_.resize(u.forced_count);
        forced_sum_ -= u.forced_delta;
        sel_[u.slot] = u.prev_sel;
        pending_.insert(u.slot);
        undo_.pop_back();
    }

    const CandidateSet& cs_;
    const std::vector<size_t>& slots_;
    Clock::time_point deadline_;
    bool use_deadline_;
    uint64_t node_limit_;
    uint64_t& nodes_;
    std::vector<int>& sel_;

    std::vector<int> step_ref_;
    std::vector<int> forced_list_;
    double forced_sum_ = 0.0;
    std::set<size_t> pending_;
    std::vector<Undo> undo_;
    bool has_best_ = false;
    double best_value_ = 0.0;
    std::map<size_t, int> best_choice_;
    bool aborted_ = false;
};

/** Union-find over slot indices for component decomposition. */
class SlotComponents {
  public:
    explicit SlotComponents(size_t n) : parent_(n) {
        for (size_t i = 0; i < n; ++i) parent_[i] = i;
    }
    size_t find(size_t a) {
        while (parent_[a] != a) {
            parent_[a] = parent_[parent_[a]];
            a = parent_[a];
        }
        return a;
    }
    void unite(size_t a, size_t b) { parent_[find(a)] = find(b); }

  private:
    std::vector<size_t> parent_;
};

}  // namespace

IlpSolution solve(const IlpModel& model, const CandidateSet& cs, const SolveLimits& limits,
                  const std::vector<int>* hint) {
    IlpSolution sol;
    sol.slot_choice.assign(cs.slots.size(), -1);
    if (hint && hint->size() != cs.slots.size())
        throw InternalError("solver hint has wrong slot count");

    SlotComponents comp(cs.slots.size());
    std::map<int, size_t> step_owner;
    for (size_t si = 0; si < cs.slots.size(); ++si) {
        for (int oi : cs.slots[si].orders) {
            for (int sid : cs.orders[oi].steps) {
                auto [it, fresh] = step_owner.insert({sid, si});
                if (!fresh) comp.unite(si, it->second);
            }
            for (int f : order_fragments(cs, cs.orders[oi]))
                for (size_t fsi : cs.fragment_slots.at(f)) comp.unite(si, fsi);
        }
    }
    std::map<size_t, std::vector<size_t>> components;
    for (size_t si = 0; si < cs.slots.size(); ++si) components[comp.find(si)].push_back(si);

    bool use_deadline = limits.time_limit.count() > 0;
    auto deadline = Clock::now() + limits.time_limit;
    bool timed_out = false;
    for (auto& [root, slot_list] : components) {
        (void)root;
        SlotSolver solver(cs, slot_list, deadline, use_deadline, limits.node_limit,
                          sol.nodes, sol.slot_choice);
        auto r = solver.run(hint);
        timed_out = timed_out || r.timed_out;
    }

    sol.status = timed_out ? SolveStatus::Timeout : SolveStatus::Optimal;
    sol.assignment.assign(model.vars.size(), 0);
    std::set<int> selected_steps;
    for (size_t si = 0; si < cs.slots.size(); ++si) {
        int oi = sol.slot_choice[si];
        if (oi < 0) continue;
        sol.assignment[model.order_var[oi]] = 1;
        for (int sid : cs.orders[oi].steps) selected_steps.insert(sid);
    }
    std::vector<double> costs;
    for (int sid : selected_steps) {
        sol.assignment[model.step_var[sid]] = 1;
        costs.push_back(cs.steps.at(sid).cost);
    }
    sol.objective = canonical_step_sum(costs);
    return sol;
}

double brute_force_combinations(const CandidateSet& cs) {
    double total = 1.0;
    for (const auto& slot : cs.slots) {
        total *= static_cast<double>(slot.orders.size() + (slot.query < 0 ? 1 : 0));
        if (total > 1e18) return total;
    }
    return total;
}

namespace {

class BruteForcer {
  public:
    explicit BruteForcer(const CandidateSet& cs) : cs_(cs), step_ref_(cs.steps.size(), 0) {
        int max_frag = -1;
        for (const auto& [f, slots] : cs.fragment_slots) {
            (void)slots;
            max_frag = std::max(max_frag, f);
        }
        frag_demand_.assign(max_frag + 1, 0);
        for (size_t si = 0; si < cs.slots.size(); ++si)
            if (cs.slots[si].query >= 0) ordered_.push_back(si);
        std::vector<size_t> frag_slots;
        for (size_t si = 0; si < cs.slots.size(); ++si)
            if (cs.slots[si].query < 0) frag_slots.push_back(si);
        // larger fragments first so that all potential demanders are decided
        // before a fragment's own slots are reached
        std::stable_sort(frag_slots.begin(), frag_slots.end(), [&](size_t a, size_t b) {
            size_t ca = cs.fragment_size.at(cs.slots[a].target);
            size_t cb = cs.fragment_size.at(cs.slots[b].target);
            if (ca != cb) return ca > cb;
            return a < b;
        });
        ordered_.insert(ordered_.end(), frag_slots.begin(), frag_slots.end());
        sel_.assign(cs.slots.size(), -1);
    }

    BruteForceResult run() {
        dfs(0);
        if (!has_best_) throw InternalError("brute force found no feasible selection");
        BruteForceResult r;
        r.cost = best_value_;
        r.slot_choice = best_choice_;
        return r;
    }

  private:
    void dfs(size_t pos) {
        if (pos == ordered_.size()) {
            std::vector<double> costs;
            for (int sid : forced_list_) costs.push_back(cs_.steps.at(sid).cost);
            double value = canonical_step_sum(costs);
            if (!has_best_ || value < best_value_) {
                has_best_ = true;
                best_value_ = value;
                best_choice_ = sel_;
            }
            return;
        }
        size_t si = ordered_[pos];
        const Slot& slot = cs_.slots[si];
        if (slot.query < 0 && frag_demand_[slot.target] == 0) {
            dfs(pos + 1);
            return;
        }
        for (int oi : slot.orders) {
            apply(si, oi);
            dfs(pos + 1);
            revert(si, oi);
        }
    }

    void apply(size_t si, int oi) {
        sel_[si] = oi;
        for (int sid : cs_.orders[oi].steps)
            if (step_ref_[sid]++ == 0) forced_list_.push_back(sid);
        for (int f : order_fragments(cs_, cs_.orders[oi])) ++frag_demand_[f];
    }

    void revert(size_t si, int oi) {
        for (int f : order_fragments(cs_, cs_.orders[oi])) --frag_demand_[f];
        for (int sid : cs_.orders[oi].steps)
            if (--step_ref_[sid] == 0) forced_list_.pop_back();
        sel_[si] = -1;
    }

    const CandidateSet& cs_;
    std::vector<int> step_ref_;
    std::vector<int> forced_list_;
    std::vector<int> frag_demand_;
    std::vector<size_t> ordered_;
    std::vector<int> sel_;
    bool has_best_ = false;
    double best_value_ = 0.0;
    std::vector<int> best_choice_;
};

}  // namespace

BruteForceResult brute_force_plan(const CandidateSet& cs, double combination_bound) {
    double combos = brute_force_combinations(cs);
    if (combos > combination_bound)
        throw TooLarge("selection space of " + std::to_string(combos) +
                       " combinations exceeds the enumeration bound");
    return BruteForcer(cs).run();
}

SelectedPlan extract_plan(const IlpModel& model, const IlpSolution& sol,
                          const CandidateSet& cs) {
    (void)model;
    SelectedPlan plan;
    plan.total_cost = sol.objective;
    std::set<int> demanded;
    for (size_t si = 0; si < cs.slots.size(); ++si) {
        int oi = sol.slot_choice.at(si);
        if (cs.slots[si].query >= 0) {
            if (oi < 0)
                throw InternalError("InconsistentSolution: query slot " +
                                    std::to_string(si) + " has no selected order");
            plan.query_orders.push_back(oi);
        } else if (oi >= 0) {
            plan.fragment_orders.push_back(oi);
        }
        if (oi >= 0)
            for (int f : order_fragments(cs, cs.orders[oi])) demanded.insert(f);
    }
    for (const auto& [f, slots] : cs.fragment_slots) {
        for (size_t fsi : slots) {
            bool selected = sol.slot_choice.at(fsi) >= 0;
            if (selected != (demanded.count(f) > 0))
                throw InternalError("InconsistentSolution: fragment " + std::to_string(f) +
                                    (selected ? " produced but never probed"
                                              : " probed but never produced"));
        }
    }
    std::map<int, std::set<AttrRef>> parts;
    for (size_t si = 0; si < cs.slots.size(); ++si) {
        int oi = sol.slot_choice.at(si);
        if (oi < 0) continue;
        for (const auto& hop : cs.orders[oi].hops)
            if (cs.fragment_slots.count(hop.subjoin)) parts[hop.subjoin].insert(hop.partition);
    }
    for (const auto& [f, attrs] : parts)
        plan.materialized[f] = std::vector<AttrRef>(attrs.begin(), attrs.end());
    return plan;
}

namespace {

std::string format_coeff(double c) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", c);
    return buf;
}

void append_terms(std::string& out, const std::vector<std::pair<int, double>>& terms,
                  const std::vector<IlpVar>& vars) {
    bool first = true;
    size_t line_len = out.size() - out.rfind('\n') - 1;
    for (const auto& [vi, c] : terms) {
        std::string term;
        if (first) {
            term = (c < 0 ? "- " : "") + format_coeff(std::fabs(c)) + " " + vars[vi].name;
            first = false;
        } else {
            term = (c < 0 ? "- " : "+ ") + format_coeff(std::fabs(c)) + " " + vars[vi].name;
        }
        if (line_len + term.size() + 1 > 200) {
            out += "\n   ";
            line_len = 3;
        } else {
            out += " ";
            ++line_len;
        }
        out += term;
        line_len += term.size();
    }
}

}  // namespace

std::string export_lp(const IlpModel& model) {
    std::string out;
    out += "\\ shared probe-order selection\n";
    out += "Minimize\n obj:";
    std::vector<std::pair<int, double>> goal;
    for (size_t vi = 0; vi < model.vars.size(); ++vi)
        if (!model.vars[vi].is_order && model.vars[vi].goal_coeff != 0.0)
            goal.push_back({static_cast<int>(vi), model.vars[vi].goal_coeff});
    append_terms(out, goal, model.vars);
    out += "\nSubject To\n";
    for (const auto& row : model.rows) {
        out += " " + row.label + ":";
        append_terms(out, row.terms, model.vars);
        out += (row.cmp == 'E') ? " = " : " >= ";
        out += format_coeff(row.rhs);
        out += "\n";
    }
    out += "Binary\n";
    for (const auto& v : model.vars) out += " " + v.name + "\n";
    out += "End\n";
    return out;
}

}  // namespace mqjoin
