#pragma once

#include <algorithm>
#include <barrier>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "sitebt/btree.hpp"
#include "sitebt/compile.hpp"
#include "sitebt/flags.hpp"
#include "sitebt/scenario.hpp"

namespace sitebt {

enum class ViolationKind { Collision, Deadlock, SyncViolation, Timeout };

inline const char* to_string(ViolationKind k) {
    switch (k) {
        case ViolationKind::Collision: return "collision";
        case ViolationKind::Deadlock: return "deadlock";
        case ViolationKind::SyncViolation: return "sync_violation";
        default: return "timeout";
    }
}

struct Violation {
    ViolationKind kind;
    long tick = 0;
    std::vector<std::string> machines;
    std::string detail;
};

struct SiteEvent {
    long tick = 0;
    std::string machine;
    std::string kind;  // action_start, action_complete, action_fault, skill_start,
                       // skill_complete, flag_set, yield, tree_failed
    nlohmann::json detail;
};

struct RunMetrics {
    int nn = 0;
    double nrf = 0.0;
    long tu = 0;
    double gt = 0.0;
};

struct RunReport {
    bool success = false;
    std::vector<Violation> violations;
    long ticks_used = 0;
    std::vector<SiteEvent> events;
    RunMetrics metrics;
    std::vector<std::string> audit_failures;  // populated in self-check mode

    bool has_violation(ViolationKind kind) const {
        for (const auto& v : violations)
            if (v.kind == kind) return true;
        return false;
    }
};

inline nlohmann::json run_report_to_json(const RunReport& r) {
    nlohmann::json violations = nlohmann::json::array();
    for (const auto& v : r.violations)
        violations.push_back({{"kind", to_string(v.kind)},
                              {"tick", v.tick},
                              {"machines", v.machines},
                              {"detail", v.detail}});
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : r.events)
        events.push_back(
            {{"tick", e.tick}, {"machine", e.machine}, {"kind", e.kind}, {"detail", e.detail}});
    return {{"success", r.success},
            {"violations", violations},
            {"ticks_used", r.ticks_used},
            {"events", events},
            {"metrics",
             {{"nn", r.metrics.nn},
              {"nrf", r.metrics.nrf},
              {"tu", r.metrics.tu},
              {"gt", r.metrics.gt}}},
            {"audit_failures", r.audit_failures}};
}

inline std::string events_to_json_lines(const std::vector<SiteEvent>& events) {
    std::string out;
    for (const auto& e : events) {
        nlohmann::json j = {
            {"tick", e.tick}, {"machine", e.machine}, {"kind", e.kind}, {"detail", e.detail}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// World state
// ---------------------------------------------------------------------------

struct InFlightAction {
    PrimitiveAction action;
    int remaining = 0;
    bool yielded = false;
};

struct MachineState {
    std::string id;
    MachineKind kind = MachineKind::Excavator;
    std::string at_place;  // empty while on an edge
    std::string edge_path;
    std::string edge_to;
    std::string pose = "unknown";
    int bed_load = 0;
    std::optional<InFlightAction> busy;
    std::string bucket_from;  // scooped-but-not-released source place
    ActionExecutor::Progress last_result = ActionExecutor::Progress::Done;
};

struct SiteState {
    std::map<std::string, PlaceSpec> places;
    std::map<std::string, std::set<std::string>> occupants;  // place -> machine ids
    std::map<std::string, MachineState> machines;
    std::map<std::string, int> soil;
    std::string loading_place;
    long tick = 0;

    static SiteState from_site(const SiteSpec& site) {
        SiteState s;
        for (const auto& p : site.places) {
            s.places[p.name] = p;
            s.soil[p.name] = p.soil;
            s.occupants[p.name] = {};
        }
        for (const auto& m : site.machines) {
            MachineState ms;
            ms.id = m.id;
            ms.kind = m.kind;
            ms.at_place = m.at;
            ms.bed_load = m.bed_load;
            if (!s.places.count(m.at))
                throw IoError("machine " + m.id + " starts at unknown place " + m.at);
            s.occupants[m.at].insert(m.id);
            s.machines[m.id] = std::move(ms);
        }
        s.loading_place = site.loading_place;
        return s;
    }

    int total_soil() const {
        int sum = 0;
        for (const auto& [place, units] : soil) sum += units;
        for (const auto& [id, m] : machines) sum += m.bed_load;
        return sum;
    }
};

/// Writes the sensing flags from world truth: arrival (a dump truck occupies
/// the loading place), loaded (some bed carries soil), and the per
/// machine/place location flags. All writes go through set_flag and are
/// no-ops when the value is unchanged.
inline void sensing_update(const SiteState& state, GlobalBlackboard& bb, long tick = 0) {
    auto set_if_known = [&bb, tick](const FlagName& name, bool value) {
        if (bb.has_flag(name)) bb.set_flag(name, value, FlagSource::Sensing, tick);
    };
    bool arrival = false;
    bool loaded = false;
    for (const auto& [id, m] : state.machines) {
        if (m.kind == MachineKind::DumpTruck) {
            if (!state.loading_place.empty() && m.at_place == state.loading_place) arrival = true;
            if (m.bed_load > 0) loaded = true;
        }
        for (const auto& [place, spec] : state.places) {
            set_if_known("SENSING_" + to_upper_flag_token(id) + "_AT_" +
                             to_upper_flag_token(place) + "_FLG",
                         m.at_place == place);
        }
    }
    set_if_known("SENSING_ARRIVAL_FLG", arrival);
    set_if_known("SENSING_LOADED_FLG", loaded);
}

namespace detail {

/// Executor backed by the site state. start/poll/cancel only touch the
/// calling machine's own record (plus the shared event sink), so per-machine
/// tree threads can drive it concurrently; arbitration over shared places
/// happens in advance(), which runs at tick barriers.
class SimWorld : public ActionExecutor {
public:
    SimWorld(SiteState& state, std::vector<SiteEvent>& events, std::vector<Violation>& violations)
        : state_(state), events_(events), violations_(violations) {}

    void start(const std::string& machine, const PrimitiveAction& action) override {
        MachineState& m = state_.machines.at(machine);
        m.busy = InFlightAction{action, action.duration_ticks, false};
        if (action.verb == PrimitiveAction::Verb::MoveAlongPath) {
            if (!m.at_place.empty()) {
                std::lock_guard<std::mutex> lock(mutex_);
                state_.occupants[m.at_place].erase(machine);
            }
            m.at_place.clear();
            m.edge_path = action.path_id;
            m.edge_to = action.to;
        }
        log(machine, "action_start",
            {{"verb", to_string(action.verb)},
             {"pose", action.pose},
             {"to", action.to},
             {"duration", action.duration_ticks}});
    }

    Progress poll(const std::string& machine) override {
        const MachineState& m = state_.machines.at(machine);
        if (m.busy) return Progress::InFlight;
        return m.last_result;
    }

    void cancel(const std::string& machine) override {
        MachineState& m = state_.machines.at(machine);
        if (!m.busy) return;
        log(machine, "action_cancel", {{"verb", to_string(m.busy->action.verb)}});
        m.busy.reset();
        m.last_result = Progress::Done;
    }

    /// Advances every in-flight action one tick and applies completion
    /// effects, in machine-id order. Same-tick races for a place slot are
    /// broken by id: the loser stays on its edge one extra tick and a second
    /// failed entry is a collision.
    void advance() {
        for (auto& [id, m] : state_.machines) {
            if (!m.busy) continue;
            if (--m.busy->remaining > 0) continue;
            complete(m);
        }
    }

    bool any_busy() const {
        for (const auto& [id, m] : state_.machines)
            if (m.busy) return true;
        return false;
    }

private:
    void complete(MachineState& m) {
        const PrimitiveAction action = m.busy->action;
        switch (action.verb) {
            case PrimitiveAction::Verb::MoveAlongPath: {
                const std::string& dest = action.to;
                auto place_it = state_.places.find(dest);
                if (place_it == state_.places.end()) {
                    fault(m, "unknown destination " + dest);
                    return;
                }
                auto& occ = state_.occupants[dest];
                if (static_cast<int>(occ.size()) >= place_it->second.slots) {
                    if (!m.busy->yielded) {
                        m.busy->yielded = true;
                        m.busy->remaining = 1;
                        log(m.id, "yield", {{"place", dest}});
                        return;
                    }
                    std::vector<std::string> involved{m.id};
                    for (const auto& other : occ) involved.push_back(other);
                    violations_.push_back({ViolationKind::Collision, state_.tick, involved,
                                           "slot conflict at " + dest});
                    m.busy.reset();
                    m.last_result = Progress::Fault;
                    return;
                }
                occ.insert(m.id);
                m.at_place = dest;
                m.edge_path.clear();
                m.edge_to.clear();
                if (m.kind == MachineKind::DumpTruck && !state_.loading_place.empty() &&
                    dest == state_.loading_place) {
                    check_swing_zone(m);
                }
                finish_ok(m, action);
                return;
            }
            case PrimitiveAction::Verb::SetJointTargets: {
                m.pose = action.pose;
                if (action.pose == "scoop") {
                    m.bucket_from = action.target;
                } else if (action.pose == "release") {
                    if (!transfer_unit(m, action.target)) return;
                }
                finish_ok(m, action);
                return;
            }
            case PrimitiveAction::Verb::DumpBed: {
                if (m.at_place.empty()) {
                    fault(m, "dump while moving");
                    return;
                }
                state_.soil[m.at_place] += m.bed_load;
                log(m.id, "dump",
                    {{"place", m.at_place}, {"units", m.bed_load}});
                m.bed_load = 0;
                finish_ok(m, action);
                return;
            }
            case PrimitiveAction::Verb::Wait:
                finish_ok(m, action);
                return;
        }
    }

    // A truck entering the loading place while the excavator is outside its
    // initial/transport pose is the hazard the initial-pose gate exists for.
    void check_swing_zone(const MachineState& truck) {
        for (const auto& [id, other] : state_.machines) {
            if (other.kind != MachineKind::Excavator) continue;
            if (other.pose != "initial" && other.pose != "transport") {
                violations_.push_back({ViolationKind::Collision, state_.tick,
                                       {truck.id, id},
                                       "truck entered swing zone " + truck.at_place +
                                           " while excavator pose is " + other.pose});
            }
        }
    }

    bool transfer_unit(MachineState& m, const std::string& target) {
        const std::string source = m.bucket_from;
        m.bucket_from.clear();
        if (source.empty()) {
            fault(m, "release without scoop");
            return false;
        }
        auto soil_it = state_.soil.find(source);
        if (soil_it == state_.soil.end() || soil_it->second <= 0) {
            fault(m, "no soil at " + source);
            return false;
        }
        auto target_machine = state_.machines.find(target);
        if (target_machine != state_.machines.end()) {
            --soil_it->second;
            ++target_machine->second.bed_load;
            log(m.id, "load", {{"from", source}, {"into", target}});
            return true;
        }
        if (state_.soil.count(target)) {
            --soil_it->second;
            ++state_.soil[target];
            log(m.id, "load", {{"from", source}, {"into", target}});
            return true;
        }
        fault(m, "unknown release target " + target);
        return false;
    }

    void finish_ok(MachineState& m, const PrimitiveAction& action) {
        m.busy.reset();
        m.last_result = Progress::Done;
        log(m.id, "action_complete", {{"verb", to_string(action.verb)},
                                      {"pose", action.pose},
                                      {"to", action.to}});
    }

    void fault(MachineState& m, const std::string& why) {
        m.busy.reset();
        m.last_result = Progress::Fault;
        log(m.id, "action_fault", {{"why", why}});
    }

    void log(const std::string& machine, const std::string& kind, nlohmann::json detail) {
        std::lock_guard<std::mutex> lock(mutex_);
        events_.push_back({state_.tick, machine, kind, std::move(detail)});
    }

    SiteState& state_;
    std::vector<SiteEvent>& events_;
    std::vector<Violation>& violations_;
    std::mutex mutex_;
};

}  // namespace detail

struct RunOptions {
    bool concurrent = false;
    bool self_check = false;   // per-tick conservation and sensing-truth audit
    bool timeline = false;
};

struct TimelineRow {
    long tick = 0;
    std::map<FlagName, bool> flags;
    std::map<std::string, std::string> machine_at;  // place name or "edge:<path>"
};

namespace detail {

/// Statement context per machine: the gate expression guarding each action
/// leaf and the action-part composites, both recovered from plan annotations.
struct PlanIndex {
    struct PerMachine {
        std::map<int, FlagExpr> gate_of_leaf;      // leaf node id -> statement gate
        std::map<int, int> stmt_of_leaf;           // leaf node id -> statement index
        std::map<int, std::pair<int, std::string>> action_parts;  // node id -> (stmt, skill)
    };
    std::map<std::string, PerMachine> machines;

    static void index_statement(const BTNode& node, const FlagExpr& gate, int stmt,
                                PerMachine& out) {
        if (node.kind == BTNode::Kind::ActionLeaf) {
            out.gate_of_leaf[node.id] = gate;
            out.stmt_of_leaf[node.id] = stmt;
        }
        if (node.stmt_index > 0 && !node.skill.empty())
            out.action_parts[node.id] = {node.stmt_index, node.skill};
        for (const auto& c : node.children) index_statement(c, gate, stmt, out);
    }

    static PlanIndex build(const CompiledPlan& plan,
                           const std::map<std::string, std::unique_ptr<TreeInstance>>& trees) {
        PlanIndex index;
        for (const auto& [machine, tree] : trees) {
            PerMachine pm;
            for (const auto& stmt_tree : tree->root().children) {
                int stmt = stmt_tree.stmt_index;
                FlagExpr gate = FlagExpr::always_true();
                auto it = plan.statement_preconditions.find(stmt);
                if (it != plan.statement_preconditions.end()) gate = it->second;
                index_statement(stmt_tree, gate, stmt, pm);
            }
            index.machines[machine] = std::move(pm);
        }
        return index;
    }
};

}  // namespace detail

/// Stateless occupancy check: two machines parked in one single-slot place.
/// Swing-zone entries are event-based and detected by the world as trucks
/// arrive; this covers the standing co-occupancy invariant.
inline std::optional<Violation> detect_collision(const SiteState& state) {
    for (const auto& [place, occ] : state.occupants) {
        auto spec = state.places.find(place);
        if (spec == state.places.end()) continue;
        if (static_cast<int>(occ.size()) > spec->second.slots) {
            Violation v;
            v.kind = ViolationKind::Collision;
            v.tick = state.tick;
            v.machines.assign(occ.begin(), occ.end());
            v.detail = "place " + place + " holds " + std::to_string(occ.size()) +
                       " machines with " + std::to_string(spec->second.slots) + " slot(s)";
            return v;
        }
    }
    return std::nullopt;
}

/// Deadlock: every unfinished tree sits behind a false gate, no action is in
/// flight, and re-running the sensing poll would change nothing — so no
/// enabled writer exists for any waited-on flag. Distinguishes a provably
/// stuck site from a mere budget Timeout.
inline std::optional<Violation> detect_deadlock(
    const std::map<std::string, std::unique_ptr<TreeInstance>>& trees,
    const CompiledPlan& plan, SiteState& state, GlobalBlackboard& bb, bool any_action_in_flight) {
    std::vector<std::string> blocked;
    FlagSnapshot snap = bb.snapshot();
    auto gate_false = [&snap](const FlagExpr& gate) {
        try {
            return !eval_expr(gate, snap.values);
        } catch (const MissingFlagError&) {
            return true;  // a gate over an unregistered flag can never pass
        }
    };
    for (const auto& [machine, tree] : trees) {
        if (tree->finished()) continue;
        bool gate_blocked = false;
        for (const auto& stmt_tree : tree->root().children) {
            if (tree->phase_of(stmt_tree.id) != NodePhase::Running) continue;
            auto it = plan.statement_preconditions.find(stmt_tree.stmt_index);
            gate_blocked = it != plan.statement_preconditions.end() &&
                           !it->second.is_always_true() && gate_false(it->second);
            break;
        }
        if (!gate_blocked) return std::nullopt;  // someone can still make progress
        blocked.push_back(machine);
    }
    if (blocked.empty() || any_action_in_flight) return std::nullopt;
    std::uint64_t before = bb.version();
    sensing_update(state, bb, state.tick);
    if (bb.version() != before) return std::nullopt;  // a sensed change is pending
    Violation v;
    v.kind = ViolationKind::Deadlock;
    v.tick = state.tick;
    v.machines = blocked;
    v.detail = "all machines wait on false gates";
    return v;
}

/// Scenario goal predicate over the final world state and completed skills.
inline bool check_goal(const Scenario& scenario, const SiteState& state,
                       const std::map<std::string, int>& completed_skills) {
    for (const auto& [place, units] : scenario.goal.soil_at) {
        auto it = state.soil.find(place);
        if (it == state.soil.end() || it->second != units) return false;
    }
    for (const auto& [skill, count] : scenario.goal.completed_skills) {
        auto it = completed_skills.find(skill);
        if ((it == completed_skills.end() ? 0 : it->second) != count) return false;
    }
    for (const auto& [machine, place] : scenario.goal.machine_at) {
        auto it = state.machines.find(machine);
        if (it == state.machines.end() || it->second.at_place != place) return false;
    }
    if (scenario.goal.beds_empty) {
        for (const auto& [id, m] : state.machines)
            if (*scenario.goal.beds_empty && m.bed_load != 0) return false;
    }
    return true;
}

/// Executes all machine trees against a shared world until every tree
/// succeeds, a violation occurs, or the tick budget runs out. Per tick:
/// sensing update, tree ticks in fixed machine order (or one thread per tree
/// in concurrent mode), action advancement, then the detectors.
inline RunReport run(const CompiledPlan& plan, const Scenario& scenario, GlobalBlackboard& bb,
                     long budget = 5000, const RunOptions& opt = {},
                     std::vector<TimelineRow>* timeline = nullptr,
                     std::vector<TraceEvent>* trace_out = nullptr) {
    RunReport report;
    SiteState state = SiteState::from_site(scenario.site);

    for (const auto& [machine, root] : plan.trees)
        if (!state.machines.count(machine))
            throw IoError("plan machine " + machine + " is not in the scenario");

    for (const auto& g : plan.generated_flags)
        if (!bb.has_flag(g.name))
            bb.register_flag({g.name, FlagKind::Generated, false, g.description});

    std::map<std::string, std::unique_ptr<TreeInstance>> trees;
    for (const auto& [machine, root] : plan.trees)
        trees[machine] = std::make_unique<TreeInstance>(machine, root);

    detail::SimWorld world(state, report.events, report.violations);
    detail::PlanIndex plan_index = detail::PlanIndex::build(plan, trees);

    const int initial_soil = state.total_soil();

    std::map<std::string, std::map<int, NodePhase>> prev_phase;
    auto process_trace = [&](const std::string& machine,
                             const std::vector<TraceEvent>& trace) {
        auto& pm = plan_index.machines[machine];
        auto& prev = prev_phase[machine];
        FlagSnapshot snap = bb.snapshot();
        for (const auto& ev : trace) {
            auto ap = pm.action_parts.find(ev.node_id);
            if (ap != pm.action_parts.end()) {
                bool was_running = prev[ev.node_id] == NodePhase::Running;
                if (ev.status == TickStatus::Running && !was_running)
                    report.events.push_back({state.tick, machine, "skill_start",
                                             {{"stmt", ap->second.first},
                                              {"skill", ap->second.second}}});
                if (ev.status == TickStatus::Success)
                    report.events.push_back({state.tick, machine, "skill_complete",
                                             {{"stmt", ap->second.first},
                                              {"skill", ap->second.second}}});
                prev[ev.node_id] =
                    ev.status == TickStatus::Running ? NodePhase::Running : NodePhase::Idle;
            }
            auto gate = pm.gate_of_leaf.find(ev.node_id);
            if (gate != pm.gate_of_leaf.end()) {
                bool leaf_started =
                    ev.status == TickStatus::Running && prev[ev.node_id] != NodePhase::Running;
                bool gate_holds = true;
                if (leaf_started) {
                    try {
                        gate_holds = eval_expr(gate->second, snap.values);
                    } catch (const MissingFlagError&) {
                        gate_holds = false;
                    }
                }
                if (leaf_started && !gate_holds) {
                    report.violations.push_back(
                        {ViolationKind::SyncViolation, state.tick,
                         {machine},
                         "statement " + std::to_string(pm.stmt_of_leaf[ev.node_id]) +
                             " gate false at action start: " +
                             expr_to_string(gate->second, ExprSpelling::Dsl)});
                }
                prev[ev.node_id] =
                    ev.status == TickStatus::Running ? NodePhase::Running : NodePhase::Idle;
            }
        }
    };

    auto record_flag_events = [&](std::uint64_t& seen_version) {
        for (const auto& ev : bb.history()) {
            if (ev.version <= seen_version) continue;
            report.events.push_back({state.tick, "", "flag_set",
                                     {{"flag", ev.name},
                                      {"value", ev.new_value},
                                      {"source", to_string(ev.source)}}});
        }
        seen_version = bb.version();
    };

    auto audit = [&]() {
        if (!opt.self_check) return;
        if (state.total_soil() != initial_soil)
            report.audit_failures.push_back(
                "tick " + std::to_string(state.tick) + ": soil sum " +
                std::to_string(state.total_soil()) + " != " + std::to_string(initial_soil));
    };

    auto audit_sensing_truth = [&]() {
        if (!opt.self_check) return;
        FlagSnapshot snap = bb.snapshot();
        bool arrival = false, loaded = false;
        for (const auto& [id, m] : state.machines) {
            if (m.kind == MachineKind::DumpTruck) {
                if (!state.loading_place.empty() && m.at_place == state.loading_place)
                    arrival = true;
                if (m.bed_load > 0) loaded = true;
            }
            for (const auto& [place, spec] : state.places) {
                FlagName name = "SENSING_" + to_upper_flag_token(id) + "_AT_" +
                                to_upper_flag_token(place) + "_FLG";
                auto it = snap.values.find(name);
                if (it != snap.values.end() && it->second != (m.at_place == place))
                    report.audit_failures.push_back("tick " + std::to_string(state.tick) +
                                                    ": " + name + " out of sync");
            }
        }
        auto check = [&](const FlagName& name, bool want) {
            auto it = snap.values.find(name);
            if (it != snap.values.end() && it->second != want)
                report.audit_failures.push_back("tick " + std::to_string(state.tick) + ": " +
                                                name + " out of sync");
        };
        check("SENSING_ARRIVAL_FLG", arrival);
        check("SENSING_LOADED_FLG", loaded);
    };

    std::uint64_t seen_version = bb.version();
    std::vector<std::string> machine_order;
    for (const auto& [machine, tree] : trees) machine_order.push_back(machine);

    auto all_finished = [&]() {
        for (const auto& m : machine_order)
            if (!trees[m]->finished()) return false;
        return true;
    };
    auto any_failed = [&]() {
        for (const auto& m : machine_order)
            if (trees[m]->finished() && trees[m]->root_status() == TickStatus::Failure)
                return true;
        return false;
    };

    auto snapshot_timeline = [&]() {
        if (!opt.timeline || !timeline) return;
        TimelineRow row;
        row.tick = state.tick;
        row.flags = bb.snapshot().values;
        for (const auto& [id, m] : state.machines)
            row.machine_at[id] = m.at_place.empty() ? "edge:" + m.edge_path : m.at_place;
        timeline->push_back(std::move(row));
    };

    bool done = all_finished();
    while (!done && state.tick < budget) {
        ++state.tick;

        sensing_update(state, bb, state.tick);
        audit_sensing_truth();
        record_flag_events(seen_version);

        if (!opt.concurrent) {
            for (const auto& machine : machine_order) {
                TreeInstance& tree = *trees[machine];
                if (tree.finished()) continue;
                std::vector<TraceEvent> trace;
                tree.tick(bb, world, state.tick, &trace);
                process_trace(machine, trace);
                if (trace_out)
                    trace_out->insert(trace_out->end(), trace.begin(), trace.end());
            }
        } else {
            // One thread per tree; the barrier keeps everyone on the same tick.
            std::vector<std::vector<TraceEvent>> traces(machine_order.size());
            std::vector<std::thread> workers;
            std::barrier sync(static_cast<std::ptrdiff_t>(machine_order.size()));
            for (std::size_t i = 0; i < machine_order.size(); ++i) {
                workers.emplace_back([&, i] {
                    TreeInstance& tree = *trees[machine_order[i]];
                    if (!tree.finished()) tree.tick(bb, world, state.tick, &traces[i]);
                    sync.arrive_and_wait();
                });
            }
            for (auto& w : workers) w.join();
            for (std::size_t i = 0; i < machine_order.size(); ++i) {
                process_trace(machine_order[i], traces[i]);
                if (trace_out)
                    trace_out->insert(trace_out->end(), traces[i].begin(), traces[i].end());
            }
        }
        record_flag_events(seen_version);

        world.advance();
        record_flag_events(seen_version);
        audit();
        snapshot_timeline();

        if (auto collision = detect_collision(state)) report.violations.push_back(*collision);
        if (!report.violations.empty()) break;
        if (any_failed()) {
            for (const auto& m : machine_order)
                if (trees[m]->finished() && trees[m]->root_status() == TickStatus::Failure)
                    report.events.push_back({state.tick, m, "tree_failed", {}});
            break;
        }
        done = all_finished();
        if (done) break;

        if (auto deadlock = detect_deadlock(trees, plan, state, bb, world.any_busy())) {
            report.violations.push_back(*deadlock);
            record_flag_events(seen_version);
            break;
        }
        record_flag_events(seen_version);
    }

    report.ticks_used = state.tick;
    if (report.violations.empty() && !done && !any_failed() && state.tick >= budget) {
        std::vector<std::string> unfinished;
        for (const auto& m : machine_order)
            if (!trees[m]->finished()) unfinished.push_back(m);
        report.violations.push_back(
            {ViolationKind::Timeout, state.tick, unfinished, "tick budget exhausted"});
    }

    std::map<std::string, int> completed_skills;
    for (const auto& e : report.events)
        if (e.kind == "skill_complete")
            ++completed_skills[e.detail.at("skill").get<std::string>()];

    bool goal_ok = check_goal(scenario, state, completed_skills);
    report.success =
        done && report.violations.empty() && !any_failed() && goal_ok && report.audit_failures.empty();
    return report;
}

inline std::string timeline_to_csv(const std::vector<TimelineRow>& rows) {
    if (rows.empty()) return "tick\n";
    std::string out = "tick";
    for (const auto& [flag, v] : rows.front().flags) out += "," + flag;
    for (const auto& [machine, at] : rows.front().machine_at) out += "," + machine;
    out += "\n";
    for (const auto& row : rows) {
        out += std::to_string(row.tick);
        for (const auto& [flag, v] : row.flags) out += v ? ",1" : ",0";
        for (const auto& [machine, at] : row.machine_at) out += "," + at;
        out += "\n";
    }
    return out;
}

}  // namespace sitebt
