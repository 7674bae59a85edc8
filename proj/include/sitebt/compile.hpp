#pragma once

#include <map>
#include <string>
#include <vector>

#include "sitebt/action_sequence.hpp"
#include "sitebt/analysis.hpp"
#include "sitebt/btree.hpp"
#include "sitebt/task_params.hpp"

namespace sitebt {

enum class FlagBoundary { OnCompletion, OnStart };

struct FlagContractEntry {
    int setter_statement = 0;
    bool value = true;
    FlagBoundary boundary = FlagBoundary::OnCompletion;
};

struct CompiledPlan {
    std::map<std::string, BTNode> trees;  // machine id -> root
    std::map<FlagName, FlagContractEntry> flag_contract;
    std::vector<GeneratedFlag> generated_flags;
    std::map<int, FlagExpr> statement_preconditions;
    std::map<int, std::string> statement_machines;
};

struct PlanStats {
    int nn_total = 0;
    std::map<std::string, int> nn_per_machine;
    int flag_count = 0;
};

inline PlanStats plan_stats(const CompiledPlan& plan) {
    PlanStats stats;
    for (const auto& [machine, root] : plan.trees) {
        int nn = count_nodes(root);
        stats.nn_per_machine[machine] = nn;
        stats.nn_total += nn;
    }
    stats.flag_count = static_cast<int>(plan.generated_flags.size());
    return stats;
}

namespace detail {

// Canonical expansion of one skill into primitive actions. The excavation
// micro-steps (dig_ready / dig / scoop / swing / release) are fixed; their
// durations and joint vectors come from the database. `current_place` is the
// machine's tracked location and is updated by moves.
inline std::vector<PrimitiveAction> expand_skill(const ActionStatement& stmt,
                                                 const TaskParamDB& db,
                                                 std::string& current_place) {
    auto joint_step = [&db](const std::string& pose, std::string target = "") {
        PrimitiveAction a;
        a.verb = PrimitiveAction::Verb::SetJointTargets;
        a.pose = pose;
        a.joints = db.joints(pose);
        a.duration_ticks = db.duration(pose);
        a.target = std::move(target);
        return a;
    };
    auto move_step = [&db](const std::string& from, const std::string& to) {
        PathInfo path = db.path(from, to);
        PrimitiveAction a;
        a.verb = PrimitiveAction::Verb::MoveAlongPath;
        a.path_id = path.id;
        a.from = from;
        a.to = to;
        a.duration_ticks = path.length_ticks;
        return a;
    };

    std::vector<PrimitiveAction> out;
    if (stmt.skill == "move") {
        out.push_back(move_step(current_place, stmt.params.at(0)));
        current_place = stmt.params.at(0);
    } else if (stmt.skill == "initial_pose") {
        out.push_back(joint_step("initial"));
    } else if (stmt.skill == "excavate_and_release") {
        const std::string& source = stmt.params.at(0);
        const std::string& release = stmt.params.at(1);
        out.push_back(joint_step("dig_ready"));
        out.push_back(joint_step("dig"));
        out.push_back(joint_step("scoop", source));
        out.push_back(joint_step("swing", release));
        out.push_back(joint_step("release", release));
    } else if (stmt.skill == "level") {
        out.push_back(joint_step("level_start"));
        // a leveling pass over the target (place or truck bed); the machine
        // returns to its current position, so no place-pair path is needed
        PrimitiveAction pass;
        pass.verb = PrimitiveAction::Verb::MoveAlongPath;
        pass.path_id = "level_pass_" + stmt.params.at(0);
        pass.from = current_place;
        pass.to = current_place;
        pass.duration_ticks = db.duration("level_pass");
        out.push_back(pass);
    } else if (stmt.skill == "gather") {
        out.push_back(joint_step("gather_start"));
        out.push_back(joint_step("gather_pull", stmt.params.at(0)));
    } else if (stmt.skill == "dump_soil") {
        PrimitiveAction a;
        a.verb = PrimitiveAction::Verb::DumpBed;
        a.duration_ticks = db.duration("dump_soil");
        out.push_back(a);
    } else {
        throw UnvalidatedError("no expansion for skill " + stmt.skill);
    }
    return out;
}

}  // namespace detail

/// Template compiler: one tree per machine, each statement becoming
///   ReactiveSequence[ RetryUntilSuccessful(-1)[ Sequence[ DBReader per
///   precondition flag, ConditionalExpression ] ], Sequence[ primitive
///   actions..., SetFlag per generated flag bound to this statement ] ]
/// A statement with an always-true precondition collapses to the action
/// Sequence alone. Generated flags are written true on completion of their
/// binding statement (the name/description match performed by
/// bind_generated_flags); flags that fail to bind abort compilation.
inline CompiledPlan compile(const ActionSequence& seq, const TaskParamDB& db) {
    for (const auto& stmt : seq.statements) {
        for (const auto* leaf : leaves_in_order(stmt.precondition)) {
            if (!seq.declares_flag(leaf->flag) && leaf->flag.rfind("SENSING_", 0) != 0)
                throw UnvalidatedError("precondition flag " + leaf->flag +
                                       " is neither declared nor a sensing flag");
        }
    }

    FlagBindingResult binding = bind_generated_flags(seq);
    for (const auto& p : binding.problems) {
        if (p.code == "UnboundFlag") throw UnboundFlagError(p.flag);
        throw AmbiguousFlagBindingError(p.flag, p.message);
    }

    std::map<int, std::vector<FlagName>> flags_by_setter;
    CompiledPlan plan;
    plan.generated_flags = seq.generated_flags;
    for (const auto& b : binding.bindings) {
        flags_by_setter[b.setter_index].push_back(b.flag);
        plan.flag_contract[b.flag] = FlagContractEntry{b.setter_index, true,
                                                       FlagBoundary::OnCompletion};
    }

    std::map<std::string, std::string> current_place;
    std::map<std::string, std::vector<BTNode>> subtrees;  // machine -> statement subtrees
    std::vector<std::string> machine_order;

    for (const auto& stmt : seq.statements) {
        plan.statement_preconditions[stmt.index] = stmt.precondition;
        plan.statement_machines[stmt.index] = stmt.machine;
        if (!current_place.count(stmt.machine)) {
            current_place[stmt.machine] = db.start_place(stmt.machine);
            machine_order.push_back(stmt.machine);
        }

        std::vector<BTNode> actions;
        for (auto& prim : detail::expand_skill(stmt, db, current_place[stmt.machine]))
            actions.push_back(action_node(std::move(prim)));
        for (const auto& flag : flags_by_setter[stmt.index])
            actions.push_back(set_flag_node(flag, true));
        BTNode action_part = sequence_node(std::move(actions));
        action_part.stmt_index = stmt.index;
        action_part.skill = stmt.skill;

        if (stmt.precondition.is_always_true()) {
            subtrees[stmt.machine].push_back(std::move(action_part));
            continue;
        }

        std::vector<BTNode> checks;
        for (const auto* leaf : leaves_in_order(stmt.precondition))
            checks.push_back(db_reader_node(leaf->flag, leaf->flag));
        checks.push_back(conditional_node(stmt.precondition));
        BTNode condition_part = retry_node(-1, sequence_node(std::move(checks)));

        BTNode statement_tree =
            reactive_sequence_node({std::move(condition_part), std::move(action_part)});
        statement_tree.stmt_index = stmt.index;
        subtrees[stmt.machine].push_back(std::move(statement_tree));
    }

    for (const auto& machine : machine_order)
        plan.trees[machine] = sequence_node(std::move(subtrees[machine]));
    return plan;
}

/// Per-machine statement sets, in order — used by tests and `inspect`.
inline std::map<std::string, std::vector<int>> statement_partition(const CompiledPlan& plan) {
    std::map<std::string, std::vector<int>> out;
    for (const auto& [index, machine] : plan.statement_machines) out[machine].push_back(index);
    return out;
}

namespace detail {

inline void harvest_plan_info(const BTNode& node, const std::string& machine, int stmt,
                              CompiledPlan& plan) {
    if (node.stmt_index > 0) stmt = node.stmt_index;
    if (node.kind == BTNode::Kind::ConditionalExpression && stmt > 0) {
        plan.statement_preconditions[stmt] = node.expr;
    }
    if (node.kind == BTNode::Kind::SetFlag && stmt > 0 && node.value) {
        if (!plan.flag_contract.count(node.flag)) {
            plan.flag_contract[node.flag] =
                FlagContractEntry{stmt, node.value, FlagBoundary::OnCompletion};
            plan.generated_flags.push_back(
                {node.flag, "set on completion of statement " + std::to_string(stmt)});
        }
    }
    for (const auto& c : node.children) harvest_plan_info(c, machine, stmt, plan);
}

}  // namespace detail

/// Rebuilds a CompiledPlan from per-machine trees (e.g. parsed back from
/// XML): statement indices and gates come from the node annotations, the
/// flag contract from the SetFlag nodes.
inline CompiledPlan plan_from_trees(std::map<std::string, BTNode> trees) {
    CompiledPlan plan;
    for (auto& [machine, root] : trees) {
        for (const auto& stmt_tree : root.children) {
            if (stmt_tree.stmt_index > 0) {
                plan.statement_machines[stmt_tree.stmt_index] = machine;
                plan.statement_preconditions.emplace(stmt_tree.stmt_index,
                                                     FlagExpr::always_true());
            }
        }
        detail::harvest_plan_info(root, machine, 0, plan);
    }
    plan.trees = std::move(trees);
    return plan;
}

}  // namespace sitebt
