#include <gtest/gtest.h>

#include <chrono>

#include "sitebt/analysis.hpp"
#include "sitebt/bt_xml.hpp"
#include "sitebt/eval.hpp"
#include "sitebt/io_util.hpp"
#include "sitebt/planner.hpp"
#include "sitebt/sim.hpp"

using namespace sitebt;

namespace {

TaskParamDB base_db() {
    return task_param_db_from_json(
        nlohmann::json::parse(read_text_file(std::string(SITEBT_DATA_DIR) + "/paramdb.json")));
}

const std::vector<Scenario>& catalog() {
    static const std::vector<Scenario> scenarios =
        load_catalog(std::string(SITEBT_DATA_DIR) + "/scenarios");
    return scenarios;
}

}  // namespace

TEST(Catalog, ThirtyScenariosSplitFifteenFifteen) {
    ASSERT_EQ(catalog().size(), 30u);
    int singles = 0, coordinated = 0;
    for (const auto& s : catalog())
        (s.category == ScenarioCategory::Single ? singles : coordinated) += 1;
    EXPECT_EQ(singles, 15);
    EXPECT_EQ(coordinated, 15);
    for (int i = 0; i < 30; ++i) EXPECT_EQ(catalog()[i].id, i + 1);
}

TEST(Catalog, PaperScenariosCarryProvenance) {
    for (const auto& s : catalog()) {
        if (s.id <= 10)
            EXPECT_EQ(s.source, "paper") << s.id;
        else
            EXPECT_EQ(s.source, "derived") << s.id;
        EXPECT_FALSE(s.instruction.empty());
    }
}

TEST(Catalog, CategoryMatchesMachineCount) {
    for (const auto& s : catalog()) {
        bool multi = s.site.machines.size() > 1;
        EXPECT_EQ(s.category == ScenarioCategory::Coordinated, multi) << s.id;
        EXPECT_EQ(static_cast<int>(s.site.machines.size()), s.excavators + s.dump_trucks)
            << s.id;
    }
}

TEST(RulePlanner, KnownScenarioShapes) {
    // Scenario 4 is a single dump_soil statement.
    ActionSequence s4 = rule_planner(catalog()[3]);
    ASSERT_EQ(s4.statements.size(), 1u);
    EXPECT_EQ(s4.statements[0].skill, "dump_soil");
    EXPECT_TRUE(s4.generated_flags.empty());

    // Scenario 6 follows the real-world sequencing: pose gate, arrival gates,
    // reset gate before departure.
    ActionSequence s6 = rule_planner(catalog()[5]);
    ASSERT_EQ(s6.statements.size(), 6u);
    EXPECT_EQ(s6.statements[0].skill, "initial_pose");
    EXPECT_EQ(s6.statements[1].skill, "move");
    ASSERT_EQ(s6.statements[1].precondition.kind, FlagExpr::Kind::Leaf);
    EXPECT_EQ(s6.statements[1].precondition.flag, "EXCAVATOR_INITIAL_POSE_FLG");
    EXPECT_EQ(s6.statements[2].skill, "excavate_and_release");
    auto leaves = leaves_in_order(s6.statements[2].precondition);
    ASSERT_EQ(leaves.size(), 2u);
    EXPECT_EQ(leaves[1]->flag, "SENSING_ARRIVAL_FLG");
    EXPECT_EQ(s6.statements[3].skill, "initial_pose");
    EXPECT_EQ(s6.statements[4].skill, "move");
    EXPECT_EQ(s6.statements[5].skill, "dump_soil");

    // Scenario 27 is the three-statement load-only plan.
    ActionSequence s27 = rule_planner(catalog()[26]);
    EXPECT_EQ(s27.statements.size(), 3u);
    EXPECT_EQ(s27.generated_flags.size(), 2u);
}

TEST(RulePlanner, UnsupportedScenarioRejected) {
    Scenario s = catalog()[0];
    s.task = {{"kind", "build_a_bridge"}};
    EXPECT_THROW(rule_planner(s), UnsupportedScenarioError);
    s.task = nlohmann::json::object();
    EXPECT_THROW(rule_planner(s), UnsupportedScenarioError);
}

TEST(RulePlanner, EveryOutputValidatesCleanWithZeroNrf) {
    for (const auto& scenario : catalog()) {
        ActionSequence seq = rule_planner(scenario);
        ValidationReport report =
            validate(seq, scenario.site.machine_kinds(), scenario.site.place_names(),
                     default_registry_for(scenario.site));
        EXPECT_TRUE(report.ok()) << "scenario " << scenario.id << ": "
                                 << validation_report_to_json(report).dump(2);
        FlagAnalysis analysis = analyze_flags(seq);
        EXPECT_EQ(analysis.nrf(), 0) << "scenario " << scenario.id << " flag "
                                     << (analysis.redundant.empty()
                                             ? ""
                                             : analysis.redundant.front().name);
    }
}

TEST(RulePlanner, EverySequenceRoundTripsThroughTheDsl) {
    for (const auto& scenario : catalog()) {
        ActionSequence seq = rule_planner(scenario);
        EXPECT_EQ(parse(serialize(seq)), seq) << "scenario " << scenario.id;
    }
}

TEST(RulePlanner, DeterministicOutputs) {
    for (const auto& scenario : catalog())
        EXPECT_EQ(serialize(rule_planner(scenario)), serialize(rule_planner(scenario)));
}

// The oracle pipeline: rules planner -> compiler -> simulator succeeds on the
// whole catalog with zero violations, and XML round-trips byte-exactly.
TEST(OraclePipeline, FullCatalogSucceeds) {
    TaskParamDB base = base_db();
    for (const auto& scenario : catalog()) {
        auto started = std::chrono::steady_clock::now();
        ActionSequence seq = rule_planner(scenario);
        CompiledPlan plan = compile(seq, paramdb_for_scenario(base, scenario));

        for (const auto& [machine, xml] : emit_xml(plan)) {
            BTNode reparsed = parse_tree_xml(xml);
            EXPECT_EQ(reparsed, plan.trees[machine]) << scenario.id << "/" << machine;
            EXPECT_EQ(emit_tree_xml(reparsed), xml);
        }

        GlobalBlackboard bb(default_registry_for(scenario.site));
        RunOptions opt;
        opt.self_check = true;
        RunReport report = run(plan, scenario, bb, 5000, opt);
        double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

        EXPECT_TRUE(report.success)
            << "scenario " << scenario.id << ": " << run_report_to_json(report).dump(2);
        EXPECT_TRUE(report.violations.empty()) << "scenario " << scenario.id;
        EXPECT_TRUE(report.audit_failures.empty()) << "scenario " << scenario.id;
        EXPECT_LT(wall, 5.0) << "scenario " << scenario.id;
    }
}

// Gate completeness across the whole catalog: every gated statement subtree
// holds one DBReader per precondition leaf (in leaf order) and exactly one
// ConditionalExpression carrying the statement's own gate.
TEST(OraclePipeline, GateCompletenessOnEveryCompiledStatement) {
    TaskParamDB base = base_db();
    for (const auto& scenario : catalog()) {
        ActionSequence seq = rule_planner(scenario);
        CompiledPlan plan = compile(seq, paramdb_for_scenario(base, scenario));
        for (const auto& stmt : seq.statements) {
            if (stmt.precondition.is_always_true()) continue;
            const BTNode* subtree = nullptr;
            for (const auto& [machine, root] : plan.trees)
                for (const auto& child : root.children)
                    if (child.stmt_index == stmt.index) subtree = &child;
            ASSERT_NE(subtree, nullptr) << scenario.id << "/" << stmt.index;

            std::vector<const BTNode*> readers, conds;
            std::function<void(const BTNode&)> walk = [&](const BTNode& n) {
                if (n.kind == BTNode::Kind::DBReader) readers.push_back(&n);
                if (n.kind == BTNode::Kind::ConditionalExpression) conds.push_back(&n);
                for (const auto& c : n.children) walk(c);
            };
            walk(*subtree);

            auto leaves = leaves_in_order(stmt.precondition);
            ASSERT_EQ(readers.size(), leaves.size()) << scenario.id << "/" << stmt.index;
            for (std::size_t i = 0; i < leaves.size(); ++i)
                EXPECT_EQ(readers[i]->flag, leaves[i]->flag);
            ASSERT_EQ(conds.size(), 1u) << scenario.id << "/" << stmt.index;
            EXPECT_EQ(conds[0]->expr, stmt.precondition);
        }
    }
}

// Replay determinism within the pipeline: replaying any run's blackboard
// history onto a fresh board reproduces the final snapshot.
TEST(OraclePipeline, HistoryReplayReproducesEveryRun) {
    TaskParamDB base = base_db();
    for (int id : {2, 6, 9, 28, 30}) {
        const Scenario& scenario = catalog()[static_cast<std::size_t>(id - 1)];
        ActionSequence seq = rule_planner(scenario);
        CompiledPlan plan = compile(seq, paramdb_for_scenario(base, scenario));
        std::vector<FlagRegistryEntry> registry = default_registry_for(scenario.site);
        for (const auto& g : plan.generated_flags)
            registry.push_back({g.name, FlagKind::Generated, false, g.description});
        GlobalBlackboard bb(registry);
        RunReport report = run(plan, scenario, bb, 5000);
        ASSERT_TRUE(report.success) << id;
        FlagSnapshot replayed = replay_history(registry, bb.history());
        EXPECT_EQ(replayed.values, bb.snapshot().values) << id;
        EXPECT_EQ(replayed.version, bb.snapshot().version) << id;
    }
}

// Engine invariant over a real coordinated run: a tree never has two action
// leaves running in the same tick.
TEST(OraclePipeline, AtMostOneRunningActionLeafPerTree) {
    const Scenario& scenario = catalog()[29];  // the alternating two-truck plan
    ActionSequence seq = rule_planner(scenario);
    CompiledPlan plan = compile(seq, paramdb_for_scenario(base_db(), scenario));
    GlobalBlackboard bb(default_registry_for(scenario.site));
    std::vector<TraceEvent> trace;
    RunReport report = run(plan, scenario, bb, 5000, {}, nullptr, &trace);
    ASSERT_TRUE(report.success);

    // ActionLeaf ids per machine
    std::map<std::string, std::set<int>> leaf_ids;
    std::function<void(const BTNode&, std::set<int>&)> collect =
        [&collect](const BTNode& node, std::set<int>& out) {
            if (node.kind == BTNode::Kind::ActionLeaf) out.insert(node.id);
            for (const auto& c : node.children) collect(c, out);
        };
    for (const auto& [machine, root] : plan.trees) {
        TreeInstance instance(machine, root);  // assigns the same preorder ids
        collect(instance.root(), leaf_ids[machine]);
    }

    std::map<std::string, std::set<int>> running;  // machine -> leaves running
    std::map<std::pair<std::string, long>, int> max_running;
    for (const auto& ev : trace) {
        if (!leaf_ids[ev.machine].count(ev.node_id)) continue;
        if (ev.status == TickStatus::Running)
            running[ev.machine].insert(ev.node_id);
        else
            running[ev.machine].erase(ev.node_id);
        auto& peak = max_running[{ev.machine, ev.tick}];
        peak = std::max(peak, static_cast<int>(running[ev.machine].size()));
    }
    for (const auto& [key, peak] : max_running)
        EXPECT_LE(peak, 1) << key.first << " tick " << key.second;
}

TEST(EvalAggregation, CategorySplitAndMeans) {
    std::vector<ScenarioResult> results;
    for (const auto& scenario : catalog()) {
        ScenarioResult r;
        r.id = scenario.id;
        r.category = scenario.category;
        r.success = true;
        r.nn = 10;
        r.nrf = 0;
        results.push_back(r);
    }
    EvalReport report = make_eval_report(results);
    EXPECT_EQ(report.by_category["single"].scenarios, 15);
    EXPECT_EQ(report.by_category["coordinated"].scenarios, 15);
    EXPECT_DOUBLE_EQ(report.by_category["single"].sr, 1.0);
    EXPECT_DOUBLE_EQ(report.by_category["coordinated"].sr, 1.0);
    EXPECT_DOUBLE_EQ(report.by_category["single"].mean_nn, 10.0);
    EXPECT_FALSE(report.by_category["single"].low_sr);

    std::string table = eval_report_table(report);
    EXPECT_NE(table.find("single"), std::string::npos);
    EXPECT_NE(table.find("coordinated"), std::string::npos);
    EXPECT_NE(table.find("1.00"), std::string::npos);
}

TEST(EvalAggregation, LowSrParenthesizesNn) {
    std::vector<ScenarioResult> results;
    for (int i = 1; i <= 10; ++i) {
        ScenarioResult r;
        r.id = i;
        r.category = ScenarioCategory::Coordinated;
        r.success = i == 1;  // SR 0.1
        r.nn = 20;
        results.push_back(r);
    }
    EvalReport report = make_eval_report(results);
    EXPECT_TRUE(report.by_category["coordinated"].low_sr);
    std::string table = eval_report_table(report);
    EXPECT_NE(table.find("("), std::string::npos);
}

TEST(EvalReportJson, ValidatesAgainstBundledSchema) {
    std::vector<ScenarioResult> results;
    ScenarioResult r;
    r.id = 1;
    r.category = ScenarioCategory::Single;
    r.success = true;
    r.nn = 8;
    results.push_back(r);
    nlohmann::json report = eval_report_to_json(make_eval_report(results));
    nlohmann::json schema = nlohmann::json::parse(
        read_text_file(std::string(SITEBT_DATA_DIR) + "/eval_report.schema.json"));
    auto errors = schema_errors(report, schema);
    EXPECT_TRUE(errors.empty()) << errors.front();
    // and a malformed report does not validate
    nlohmann::json broken = report;
    broken.erase("categories");
    EXPECT_FALSE(schema_errors(broken, schema).empty());
}
