#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sitebt/errors.hpp"
#include "sitebt/flag_expr.hpp"
#include "sitebt/flags.hpp"

namespace sitebt {

enum class TickStatus { Success, Failure, Running };

inline const char* to_string(TickStatus s) {
    switch (s) {
        case TickStatus::Success: return "success";
        case TickStatus::Failure: return "failure";
        default: return "running";
    }
}

struct PrimitiveAction {
    enum class Verb { MoveAlongPath, SetJointTargets, DumpBed, Wait };

    Verb verb = Verb::Wait;
    int duration_ticks = 1;
    // MoveAlongPath
    std::string path_id;
    std::string from;
    std::string to;
    // SetJointTargets
    std::string pose;
    std::vector<double> joints;
    std::string target;  // material source (scoop) or release destination
};

inline const char* to_string(PrimitiveAction::Verb v) {
    switch (v) {
        case PrimitiveAction::Verb::MoveAlongPath: return "MoveAlongPath";
        case PrimitiveAction::Verb::SetJointTargets: return "SetJointTargets";
        case PrimitiveAction::Verb::DumpBed: return "DumpBed";
        default: return "Wait";
    }
}

inline bool operator==(const PrimitiveAction& a, const PrimitiveAction& b) {
    return a.verb == b.verb && a.duration_ticks == b.duration_ticks && a.path_id == b.path_id &&
           a.from == b.from && a.to == b.to && a.pose == b.pose && a.joints == b.joints &&
           a.target == b.target;
}

/// Tree structure. Runtime state lives in TreeInstance, keyed by node id
/// (assigned in preorder when an instance is built).
struct BTNode {
    enum class Kind {
        Sequence,
        ReactiveSequence,
        Fallback,
        RetryUntilSuccessful,
        DBReader,
        ConditionalExpression,
        ActionLeaf,
        SetFlag
    };

    Kind kind = Kind::Sequence;
    int id = -1;

    int max_attempts = -1;       // RetryUntilSuccessful; -1 = unbounded
    FlagName flag;               // DBReader / SetFlag
    std::string output_key;      // DBReader
    bool value = true;           // SetFlag
    FlagExpr expr;               // ConditionalExpression
    PrimitiveAction action;      // ActionLeaf

    // Plan annotations, carried through the XML dialect.
    int stmt_index = 0;          // 0 = unset
    std::string skill;

    std::vector<BTNode> children;

    bool is_leaf() const {
        return kind == Kind::DBReader || kind == Kind::ConditionalExpression ||
               kind == Kind::ActionLeaf || kind == Kind::SetFlag;
    }
};

inline bool operator==(const BTNode& a, const BTNode& b) {
    return a.kind == b.kind && a.max_attempts == b.max_attempts && a.flag == b.flag &&
           a.output_key == b.output_key && a.value == b.value && a.expr == b.expr &&
           a.action == b.action && a.stmt_index == b.stmt_index && a.skill == b.skill &&
           a.children == b.children;
}

// ---- node builders ----

inline BTNode sequence_node(std::vector<BTNode> children) {
    BTNode n;
    n.kind = BTNode::Kind::Sequence;
    n.children = std::move(children);
    return n;
}

inline BTNode reactive_sequence_node(std::vector<BTNode> children) {
    BTNode n;
    n.kind = BTNode::Kind::ReactiveSequence;
    n.children = std::move(children);
    return n;
}

inline BTNode fallback_node(std::vector<BTNode> children) {
    BTNode n;
    n.kind = BTNode::Kind::Fallback;
    n.children = std::move(children);
    return n;
}

inline BTNode retry_node(int max_attempts, BTNode child) {
    BTNode n;
    n.kind = BTNode::Kind::RetryUntilSuccessful;
    n.max_attempts = max_attempts;
    n.children.push_back(std::move(child));
    return n;
}

inline BTNode db_reader_node(FlagName flag, std::string output_key) {
    BTNode n;
    n.kind = BTNode::Kind::DBReader;
    n.flag = std::move(flag);
    n.output_key = std::move(output_key);
    return n;
}

inline BTNode conditional_node(FlagExpr expr) {
    BTNode n;
    n.kind = BTNode::Kind::ConditionalExpression;
    n.expr = std::move(expr);
    return n;
}

inline BTNode action_node(PrimitiveAction action) {
    BTNode n;
    n.kind = BTNode::Kind::ActionLeaf;
    n.action = std::move(action);
    return n;
}

inline BTNode set_flag_node(FlagName flag, bool value) {
    BTNode n;
    n.kind = BTNode::Kind::SetFlag;
    n.flag = std::move(flag);
    n.value = value;
    return n;
}

inline int count_nodes(const BTNode& root) {
    int n = 1;
    for (const auto& c : root.children) n += count_nodes(c);
    return n;
}

inline void validate_tree(const BTNode& node) {
    if (node.is_leaf()) {
        if (!node.children.empty()) throw MalformedTreeError("leaf node has children");
        return;
    }
    if (node.children.empty()) throw MalformedTreeError("composite node has no children");
    if (node.kind == BTNode::Kind::RetryUntilSuccessful && node.children.size() != 1)
        throw MalformedTreeError("RetryUntilSuccessful needs exactly one child");
    for (const auto& c : node.children) validate_tree(c);
}

/// World interface the engine drives primitive actions through.
class ActionExecutor {
public:
    enum class Progress { InFlight, Done, Fault };

    virtual ~ActionExecutor() = default;
    virtual void start(const std::string& machine, const PrimitiveAction& action) = 0;
    virtual Progress poll(const std::string& machine) = 0;
    virtual void cancel(const std::string& machine) = 0;
};

struct TraceEvent {
    long tick = 0;
    std::string machine;
    int node_id = 0;
    TickStatus status = TickStatus::Running;
};

inline std::string trace_to_json_lines(const std::vector<TraceEvent>& trace) {
    std::string out;
    for (const auto& t : trace) {
        nlohmann::json j = {{"tick", t.tick},
                            {"machine", t.machine},
                            {"node_id", t.node_id},
                            {"status", to_string(t.status)}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

enum class NodePhase { Idle, Running, Done };

struct NodeRuntime {
    NodePhase phase = NodePhase::Idle;
    TickStatus status = TickStatus::Failure;  // valid when phase == Done
    int resume_child = 0;                     // Sequence / Fallback
    int attempts = 0;                         // RetryUntilSuccessful
    bool action_started = false;              // ActionLeaf
};

/// One machine's tree plus its runtime state and Local Blackboard. A tree is
/// ticked by one thread at a time; trees share nothing but the Global
/// Blackboard.
class TreeInstance {
public:
    TreeInstance(std::string machine, BTNode root)
        : machine_(std::move(machine)), root_(std::move(root)) {
        validate_tree(root_);
        int next_id = 0;
        assign_ids(root_, next_id);
        states_.assign(static_cast<std::size_t>(next_id), NodeRuntime{});
    }

    const std::string& machine() const { return machine_; }
    const BTNode& root() const { return root_; }
    const std::map<std::string, bool>& local_blackboard() const { return local_; }
    int node_count() const { return static_cast<int>(states_.size()); }

    NodePhase phase_of(int node_id) const { return state_of(node_id).phase; }
    TickStatus status_of(int node_id) const { return state_of(node_id).status; }
    int attempts_of(int node_id) const { return state_of(node_id).attempts; }

    bool finished() const {
        return states_[0].phase == NodePhase::Done;
    }
    TickStatus root_status() const { return states_[0].status; }

    /// Propagates one tick from the root. Composite semantics:
    ///  - Sequence resumes at its running child; ReactiveSequence restarts at
    ///    the leftmost child every tick and halts running children to its
    ///    right on Running/Failure; Fallback takes the first Success;
    ///    RetryUntilSuccessful resets its child on Failure and keeps Running
    ///    (bounded exhaustion fails, unbounded waits forever).
    ///  - DBReader copies one global flag into the Local Blackboard;
    ///    ConditionalExpression evaluates over local copies only; ActionLeaf
    ///    drives the executor; SetFlag writes the Global Blackboard.
    TickStatus tick(GlobalBlackboard& bb, ActionExecutor& world, long tick_no = 0,
                    std::vector<TraceEvent>* trace = nullptr) {
        TickCtx ctx{bb, world, tick_no, trace};
        TickStatus s = tick_node(root_, ctx);
        return s;
    }

    /// Halts the node and every running descendant: states go Idle, in-flight
    /// actions are cancelled, and a later restart begins from scratch.
    void halt(int node_id, ActionExecutor& world) {
        const BTNode* node = find_node(root_, node_id);
        if (!node) throw UnknownNodeError(node_id);
        halt_subtree(*node, world);
    }

    /// All node states back to Idle and the Local Blackboard cleared. The
    /// Global Blackboard is never touched.
    void reset() {
        for (auto& s : states_) s = NodeRuntime{};
        local_.clear();
    }

private:
    struct TickCtx {
        GlobalBlackboard& bb;
        ActionExecutor& world;
        long tick_no;
        std::vector<TraceEvent>* trace;
    };

    static void assign_ids(BTNode& node, int& next_id) {
        node.id = next_id++;
        for (auto& c : node.children) assign_ids(c, next_id);
    }

    static const BTNode* find_node(const BTNode& node, int id) {
        if (node.id == id) return &node;
        for (const auto& c : node.children)
            if (const BTNode* found = find_node(c, id)) return found;
        return nullptr;
    }

    NodeRuntime& state_of(int id) { return states_.at(static_cast<std::size_t>(id)); }
    const NodeRuntime& state_of(int id) const {
        return states_.at(static_cast<std::size_t>(id));
    }

    void clear_subtree(const BTNode& node) {
        states_[static_cast<std::size_t>(node.id)] = NodeRuntime{};
        for (const auto& c : node.children) clear_subtree(c);
    }

    void halt_subtree(const BTNode& node, ActionExecutor& world) {
        NodeRuntime& st = state_of(node.id);
        if (node.kind == BTNode::Kind::ActionLeaf && st.phase == NodePhase::Running &&
            st.action_started) {
            world.cancel(machine_);
        }
        if (st.phase == NodePhase::Running) {
            for (const auto& c : node.children) halt_subtree(c, world);
        }
        st = NodeRuntime{};
    }

    TickStatus finish(const BTNode& node, TickCtx& ctx, TickStatus s) {
        NodeRuntime& st = state_of(node.id);
        if (s == TickStatus::Running) {
            st.phase = NodePhase::Running;
        } else {
            st.phase = NodePhase::Done;
            st.status = s;
        }
        if (ctx.trace)
            ctx.trace->push_back({ctx.tick_no, machine_, node.id, s});
        return s;
    }

    TickStatus tick_node(const BTNode& node, TickCtx& ctx) {
        NodeRuntime& st = state_of(node.id);
        if (st.phase == NodePhase::Done) clear_subtree(node);  // restart after completion

        switch (node.kind) {
            case BTNode::Kind::Sequence: return finish(node, ctx, tick_sequence(node, ctx));
            case BTNode::Kind::ReactiveSequence:
                return finish(node, ctx, tick_reactive(node, ctx));
            case BTNode::Kind::Fallback: return finish(node, ctx, tick_fallback(node, ctx));
            case BTNode::Kind::RetryUntilSuccessful:
                return finish(node, ctx, tick_retry(node, ctx));
            case BTNode::Kind::DBReader: return finish(node, ctx, tick_db_reader(node, ctx));
            case BTNode::Kind::ConditionalExpression:
                return finish(node, ctx, tick_conditional(node));
            case BTNode::Kind::ActionLeaf: return finish(node, ctx, tick_action(node, ctx));
            case BTNode::Kind::SetFlag: return finish(node, ctx, tick_set_flag(node, ctx));
        }
        throw MalformedTreeError("unknown node kind");
    }

    TickStatus tick_sequence(const BTNode& node, TickCtx& ctx) {
        NodeRuntime& st = state_of(node.id);
        for (std::size_t i = static_cast<std::size_t>(st.resume_child);
             i < node.children.size(); ++i) {
            TickStatus s = tick_node(node.children[i], ctx);
            if (s == TickStatus::Running) {
                st.resume_child = static_cast<int>(i);
                return TickStatus::Running;
            }
            if (s == TickStatus::Failure) {
                st.resume_child = 0;
                return TickStatus::Failure;
            }
        }
        st.resume_child = 0;
        return TickStatus::Success;
    }

    // Restarts from the leftmost child every tick; a child returning
    // Running or Failure interrupts (halts) every running child to its right.
    TickStatus tick_reactive(const BTNode& node, TickCtx& ctx) {
        for (std::size_t i = 0; i < node.children.size(); ++i) {
            TickStatus s = tick_node(node.children[i], ctx);
            if (s == TickStatus::Success) continue;
            for (std::size_t j = i + 1; j < node.children.size(); ++j) {
                if (state_of(node.children[j].id).phase == NodePhase::Running)
                    halt_subtree(node.children[j], ctx.world);
            }
            return s;
        }
        return TickStatus::Success;
    }

    TickStatus tick_fallback(const BTNode& node, TickCtx& ctx) {
        NodeRuntime& st = state_of(node.id);
        for (std::size_t i = static_cast<std::size_t>(st.resume_child);
             i < node.children.size(); ++i) {
            TickStatus s = tick_node(node.children[i], ctx);
            if (s == TickStatus::Running) {
                st.resume_child = static_cast<int>(i);
                return TickStatus::Running;
            }
            if (s == TickStatus::Success) {
                st.resume_child = 0;
                return TickStatus::Success;
            }
        }
        st.resume_child = 0;
        return TickStatus::Failure;
    }

    TickStatus tick_retry(const BTNode& node, TickCtx& ctx) {
        NodeRuntime& st = state_of(node.id);
        TickStatus s = tick_node(node.children.front(), ctx);
        if (s == TickStatus::Success) {
            st.attempts = 0;
            return TickStatus::Success;
        }
        if (s == TickStatus::Running) return TickStatus::Running;
        ++st.attempts;
        if (node.max_attempts >= 0 && st.attempts >= node.max_attempts) {
            st.attempts = 0;
            return TickStatus::Failure;
        }
        clear_subtree(node.children.front());
        // the attempt counter lives on this node, so it survives the child reset
        return TickStatus::Running;
    }

    TickStatus tick_db_reader(const BTNode& node, TickCtx& ctx) {
        if (!ctx.bb.has_flag(node.flag)) return TickStatus::Failure;
        local_[node.output_key] = ctx.bb.get_flag(node.flag);
        return TickStatus::Success;
    }

    TickStatus tick_conditional(const BTNode& node) {
        try {
            return eval_expr(node.expr, local_) ? TickStatus::Success : TickStatus::Failure;
        } catch (const MissingFlagError&) {
            return TickStatus::Failure;  // key never read into the Local Blackboard
        }
    }

    TickStatus tick_action(const BTNode& node, TickCtx& ctx) {
        NodeRuntime& st = state_of(node.id);
        if (!st.action_started) {
            ctx.world.start(machine_, node.action);
            st.action_started = true;
            return TickStatus::Running;
        }
        switch (ctx.world.poll(machine_)) {
            case ActionExecutor::Progress::InFlight: return TickStatus::Running;
            case ActionExecutor::Progress::Done:
                st.action_started = false;
                return TickStatus::Success;
            default:
                st.action_started = false;
                return TickStatus::Failure;
        }
    }

    TickStatus tick_set_flag(const BTNode& node, TickCtx& ctx) {
        ctx.bb.set_flag(node.flag, node.value, FlagSource::Action, ctx.tick_no);
        return TickStatus::Success;
    }

    std::string machine_;
    BTNode root_;
    std::map<std::string, bool> local_;
    std::vector<NodeRuntime> states_;
};

}  // namespace sitebt
