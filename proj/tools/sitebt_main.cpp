// sitebt — earthwork coordination toolkit.
//
// Subcommands: plan (instruction or scenario -> .aseq), compile (.aseq ->
// per-machine behavior tree XML), run (XML + scenario -> simulation report),
// eval (batch pipeline over a scenario catalog), inspect (pretty-print).

#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sitebt/analysis.hpp"
#include "sitebt/bt_xml.hpp"
#include "sitebt/compile.hpp"
#include "sitebt/eval.hpp"
#include "sitebt/io_util.hpp"
#include "sitebt/planner.hpp"
#include "sitebt/sim.hpp"

namespace fs = std::filesystem;
using namespace sitebt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolation = 1;
constexpr int kExitInput = 2;
constexpr int kExitPlanner = 3;

TaskParamDB load_paramdb(const std::string& path) {
    return task_param_db_from_json(nlohmann::json::parse(read_text_file(path)));
}

std::string default_data_dir() { return SITEBT_DEFAULT_DATA_DIR; }

Scenario load_scenario_arg(const std::string& scenario_file, int scenario_id,
                           const std::string& catalog_dir) {
    if (!scenario_file.empty()) return load_scenario(scenario_file);
    char name[64];
    std::snprintf(name, sizeof(name), "/scenario_%02d.json", scenario_id);
    return load_scenario(catalog_dir + name);
}

struct HitlMode {
    enum class Kind { Off, Interactive, Scripted } kind = Kind::Off;
    std::string script_path;

    static HitlMode parse(const std::string& text) {
        HitlMode m;
        if (text == "off" || text.empty()) return m;
        if (text == "interactive") {
            m.kind = Kind::Interactive;
            return m;
        }
        if (text.rfind("scripted:", 0) == 0) {
            m.kind = Kind::Scripted;
            m.script_path = text.substr(9);
            return m;
        }
        throw IoError("unknown --hitl mode: " + text);
    }

    std::optional<std::string> feedback_line(const std::string& artifact) const {
        if (kind == Kind::Scripted) {
            std::string text = read_text_file(script_path);
            while (!text.empty() && (text.back() == '\n' || text.back() == '\r'))
                text.pop_back();
            if (text.empty()) return std::nullopt;
            return text;
        }
        if (kind == Kind::Interactive) {
            std::cout << "--- proposed plan ---\n"
                      << artifact << "---------------------\n"
                      << "feedback (empty line accepts): " << std::flush;
            std::string line;
            std::getline(std::cin, line);
            if (line.empty()) return std::nullopt;
            return line;
        }
        return std::nullopt;
    }
};

std::string machine_kinds_text(const Scenario& scenario) {
    std::string out;
    for (const auto& m : scenario.site.machines)
        out += m.id + ": " + to_string(m.kind) + "\n";
    return out;
}

std::string default_flags_text(const std::vector<FlagRegistryEntry>& registry) {
    std::string out;
    for (const auto& e : registry)
        out += e.name + std::string(" = ") + (e.initial ? "true" : "false") + "  # " +
               e.description + "\n";
    return out;
}

// LLM planning path for stage one: prompt, request, extract, parse, with one
// optional HITL refinement. The reviewer sees the artifact even when it
// parses; empty feedback accepts it. Parse failures surface once the
// refinement budget is spent.
ActionSequence plan_with_llm(const std::string& instruction, const Scenario* scenario,
                             const LlmEndpointConfig& config, LlmTransport& transport,
                             const HitlMode& hitl, std::vector<UsageRecord>& usage_log,
                             const std::string& transcript_path) {
    std::map<std::string, std::string> context;
    context["skills_table"] = skills_table_text();
    std::vector<FlagRegistryEntry> registry =
        scenario ? default_registry_for(scenario->site)
                 : registry_from_json(nlohmann::json::parse(
                       read_text_file(default_data_dir() + "/default_flags.json")));
    context["default_flags"] = default_flags_text(registry);
    context["flag_rules"] = flag_rules_text();
    if (scenario) context["machines"] = machine_kinds_text(*scenario);

    PromptBundle bundle = build_prompt(PlanStage::ActionSequence, instruction, context);
    std::exception_ptr last_parse_error;
    std::optional<ActionSequence> parsed;

    for (int attempt = 1; attempt <= 2; ++attempt) {
        auto [raw, usage] = request(config, bundle, transport);
        usage_log.push_back(usage);
        if (!transcript_path.empty()) {
            nlohmann::json t = transcript_to_json(bundle, raw, usage);
            write_text_file(transcript_path + (attempt == 1 ? "" : ".refined"), t.dump(2) + "\n");
        }
        std::string artifact = extract_artifact(raw).value_or(raw);
        parsed.reset();
        try {
            parsed = parse(artifact);
            last_parse_error = nullptr;
        } catch (const Error&) {
            last_parse_error = std::current_exception();
        }
        if (attempt == 2) break;  // the one refinement is spent
        std::optional<std::string> feedback = hitl.feedback_line(artifact);
        if (!feedback) break;  // accepted, or unusable with nothing to refine on
        bundle = refine(bundle, {PlanStage::ActionSequence, *feedback, artifact});
    }
    if (parsed) return *parsed;
    std::rethrow_exception(last_parse_error);
}

void print_checks(const ActionSequence& seq, const Scenario* scenario) {
    if (scenario) {
        ValidationReport report =
            validate(seq, scenario->site.machine_kinds(), scenario->site.place_names(),
                     default_registry_for(scenario->site));
        std::cout << "validation: " << (report.ok() ? "ok" : "FAILED") << "\n";
        for (const auto& e : report.errors)
            std::cout << "  error " << e.where << " [" << e.code << "] " << e.message << "\n";
        for (const auto& w : report.warnings)
            std::cout << "  warning " << w.where << " [" << w.code << "] " << w.message << "\n";
        if (!report.ok()) throw UnvalidatedError("plan failed validation");
    }
    FlagAnalysis analysis = analyze_flags(seq);
    std::cout << "flag analysis: nrf=" << analysis.nrf() << "\n";
    for (const auto& r : analysis.redundant)
        std::cout << "  redundant " << r.name << " (" << to_string(r.reason) << ")\n";
}

int cmd_plan(const std::string& instruction, int scenario_id, const std::string& scenario_file,
             const std::string& catalog_dir, const std::string& planner_name,
             const std::string& hitl_text, const std::string& endpoint_file,
             const std::string& fixture_file, const std::string& out_file,
             const std::string& transcript_path) {
    HitlMode hitl = HitlMode::parse(hitl_text);

    std::optional<Scenario> scenario;
    if (scenario_id > 0 || !scenario_file.empty())
        scenario = load_scenario_arg(scenario_file, scenario_id, catalog_dir);

    ActionSequence seq;
    if (planner_name == "rules") {
        if (!scenario) throw UnsupportedScenarioError("--planner rules needs --scenario");
        seq = rule_planner(*scenario);
    } else {
        std::string text = !instruction.empty()
                               ? instruction
                               : (scenario ? scenario->instruction
                                           : throw IoError("no instruction given"));
        LlmEndpointConfig config;
        if (!endpoint_file.empty())
            config = endpoint_config_from_json(
                nlohmann::json::parse(read_text_file(endpoint_file)));
        std::unique_ptr<LlmTransport> transport;
        if (!fixture_file.empty()) {
            // A fixture holds one response, or several separated by
            // ===RESPONSE=== lines (consumed in order across refinements).
            std::vector<std::string> responses;
            std::string blob = read_text_file(fixture_file);
            const std::string sep = "===RESPONSE===\n";
            std::size_t pos = 0;
            while (true) {
                std::size_t next = blob.find(sep, pos);
                if (next == std::string::npos) {
                    responses.push_back(blob.substr(pos));
                    break;
                }
                responses.push_back(blob.substr(pos, next - pos));
                pos = next + sep.size();
            }
            if (responses.size() == 1) responses.push_back(responses.front());
            transport = std::make_unique<FakeTransport>(std::move(responses));
        } else {
            transport = std::make_unique<HttpTransport>();
        }
        std::vector<UsageRecord> usage;
        seq = plan_with_llm(text, scenario ? &*scenario : nullptr, config, *transport, hitl,
                            usage, transcript_path);
        long tu = 0;
        double gt = 0.0;
        for (const auto& u : usage) {
            tu += u.total_tokens();
            gt += u.wall_seconds;
        }
        std::cout << "usage: tu=" << tu << " tokens, gt=" << gt << " s\n";
    }

    print_checks(seq, scenario ? &*scenario : nullptr);
    write_text_file(out_file, serialize(seq));
    std::cout << "wrote " << out_file << "\n";
    return kExitOk;
}

int cmd_compile(const std::string& seq_file, const std::string& paramdb_file,
                const std::string& scenario_file, const std::string& out_dir) {
    ActionSequence seq = parse(read_text_file(seq_file));
    TaskParamDB db = load_paramdb(paramdb_file);
    if (!scenario_file.empty()) db = paramdb_for_scenario(db, load_scenario(scenario_file));

    CompiledPlan plan = compile(seq, db);  // throws before anything is written
    PlanStats stats = plan_stats(plan);

    fs::create_directories(out_dir);
    for (const auto& [machine, xml] : emit_xml(plan))
        write_text_file(out_dir + "/" + machine + ".xml", xml);

    nlohmann::json stats_json = {{"nn_total", stats.nn_total},
                                 {"flag_count", stats.flag_count},
                                 {"nn_per_machine", nlohmann::json::object()},
                                 {"generated_flags", nlohmann::json::array()}};
    for (const auto& [machine, nn] : stats.nn_per_machine)
        stats_json["nn_per_machine"][machine] = nn;
    for (const auto& g : plan.generated_flags)
        stats_json["generated_flags"].push_back(
            {{"name", g.name}, {"description", g.description}});
    write_text_file(out_dir + "/plan_stats.json", stats_json.dump(2) + "\n");

    std::cout << "compiled " << plan.trees.size() << " tree(s), nn_total=" << stats.nn_total
              << "\n";
    return kExitOk;
}

CompiledPlan load_plan_from_dir(const std::string& xml_dir) {
    std::map<std::string, BTNode> trees;
    for (const auto& entry : fs::directory_iterator(xml_dir)) {
        if (entry.path().extension() != ".xml") continue;
        trees[entry.path().stem().string()] =
            parse_tree_xml(read_text_file(entry.path().string()));
    }
    if (trees.empty()) throw IoError("no .xml trees found in " + xml_dir);
    CompiledPlan plan = plan_from_trees(std::move(trees));

    // flag descriptions travel in the stats sidecar when present
    std::string stats_path = xml_dir + "/plan_stats.json";
    if (fs::exists(stats_path)) {
        nlohmann::json stats = nlohmann::json::parse(read_text_file(stats_path));
        if (stats.contains("generated_flags")) {
            for (const auto& g : stats.at("generated_flags")) {
                for (auto& mine : plan.generated_flags)
                    if (mine.name == g.at("name").get<std::string>())
                        mine.description = g.at("description").get<std::string>();
            }
        }
    }
    return plan;
}

int cmd_run(const std::string& xml_dir, const std::string& scenario_file,
            const std::string& mode, long budget, const std::string& report_file,
            const std::string& timeline_file, const std::string& history_file,
            const std::string& trace_file, const std::string& events_file,
            const std::string& registry_file) {
    Scenario scenario = load_scenario(scenario_file);
    CompiledPlan plan = load_plan_from_dir(xml_dir);

    // sensing registry derived from the site, with optional file overrides
    std::vector<FlagRegistryEntry> registry = default_registry_for(scenario.site);
    if (!registry_file.empty()) {
        for (const auto& extra :
             registry_from_json(nlohmann::json::parse(read_text_file(registry_file)))) {
            bool replaced = false;
            for (auto& e : registry)
                if (e.name == extra.name) {
                    e = extra;
                    replaced = true;
                }
            if (!replaced) registry.push_back(extra);
        }
    }
    GlobalBlackboard bb(registry);

    RunOptions opt;
    opt.concurrent = mode == "concurrent";
    opt.timeline = !timeline_file.empty();
    std::vector<TimelineRow> timeline;
    std::vector<TraceEvent> trace;
    RunReport report = run(plan, scenario, bb, budget, opt, &timeline,
                           trace_file.empty() ? nullptr : &trace);

    if (!report_file.empty())
        write_text_file(report_file, run_report_to_json(report).dump(2) + "\n");
    if (!timeline_file.empty()) write_text_file(timeline_file, timeline_to_csv(timeline));
    if (!history_file.empty()) write_text_file(history_file, history_to_json_lines(bb.history()));
    if (!trace_file.empty()) write_text_file(trace_file, trace_to_json_lines(trace));
    if (!events_file.empty()) write_text_file(events_file, events_to_json_lines(report.events));

    std::cout << (report.success ? "success" : "FAILED") << " in " << report.ticks_used
              << " ticks\n";
    for (const auto& v : report.violations)
        std::cout << "violation [" << to_string(v.kind) << "] tick " << v.tick << ": "
                  << v.detail << "\n";
    return report.success ? kExitOk : kExitViolation;
}

int cmd_eval(const std::string& catalog_dir, const std::string& paramdb_file,
             const std::string& planner_name, long budget, const std::string& out_file,
             const std::string& mode, const std::string& endpoint_file,
             const std::string& fixture_dir, const std::string& hitl_text) {
    std::vector<Scenario> scenarios = load_catalog(catalog_dir);
    TaskParamDB base = load_paramdb(paramdb_file);
    LlmEndpointConfig endpoint;
    if (!endpoint_file.empty())
        endpoint = endpoint_config_from_json(nlohmann::json::parse(read_text_file(endpoint_file)));
    std::string hitl_dir;
    if (hitl_text.rfind("scripted:", 0) == 0) hitl_dir = hitl_text.substr(9);

    std::vector<ScenarioResult> results;
    for (const auto& scenario : scenarios) {
        ScenarioResult result;
        result.id = scenario.id;
        result.category = scenario.category;
        auto wall_start = std::chrono::steady_clock::now();
        try {
            ActionSequence seq;
            auto gen_start = std::chrono::steady_clock::now();
            if (planner_name == "rules") {
                seq = rule_planner(scenario);
                result.gt = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                          gen_start)
                                .count();
            } else {
                std::unique_ptr<LlmTransport> transport;
                if (!fixture_dir.empty()) {
                    char name[64];
                    std::snprintf(name, sizeof(name), "/fixture_%02d.txt", scenario.id);
                    std::string fixture = read_text_file(fixture_dir + name);
                    transport = std::make_unique<FakeTransport>(
                        std::vector<std::string>{fixture, fixture});
                } else {
                    transport = std::make_unique<HttpTransport>();
                }
                HitlMode hitl;
                if (!hitl_dir.empty()) {
                    char name[64];
                    std::snprintf(name, sizeof(name), "/feedback_%02d.txt", scenario.id);
                    if (fs::exists(hitl_dir + name))
                        hitl = HitlMode::parse("scripted:" + hitl_dir + name);
                }
                std::vector<UsageRecord> usage;
                seq = plan_with_llm(scenario.instruction, &scenario, endpoint, *transport,
                                    hitl, usage, "");
                for (const auto& u : usage) {
                    result.tu += u.total_tokens();
                    result.gt += u.wall_seconds;
                }
            }

            ValidationReport report =
                validate(seq, scenario.site.machine_kinds(), scenario.site.place_names(),
                         default_registry_for(scenario.site));
            if (!report.ok()) throw UnvalidatedError(report.errors.front().message);
            result.nrf = analyze_flags(seq).nrf();

            CompiledPlan plan = compile(seq, paramdb_for_scenario(base, scenario));
            result.nn = plan_stats(plan).nn_total;

            GlobalBlackboard bb(default_registry_for(scenario.site));
            RunOptions opt;
            opt.concurrent = mode == "concurrent";
            RunReport run_report = run(plan, scenario, bb, budget, opt);
            result.success = run_report.success;
            result.ticks_used = run_report.ticks_used;
            if (!run_report.success) {
                result.failure = run_report.violations.empty()
                                     ? "goal not reached"
                                     : std::string(to_string(run_report.violations[0].kind));
            }
        } catch (const Error& e) {
            result.success = false;
            result.failure = e.what();
        }
        result.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start)
                .count();
        results.push_back(std::move(result));
    }

    EvalReport report = make_eval_report(std::move(results));
    std::cout << eval_report_table(report);
    for (const auto& r : report.results)
        if (!r.success)
            std::cout << "scenario " << r.id << " failed: " << r.failure << "\n";
    if (!out_file.empty())
        write_text_file(out_file, eval_report_to_json(report).dump(2) + "\n");

    bool all_ok = true;
    for (const auto& r : report.results) all_ok = all_ok && r.success;
    return all_ok ? kExitOk : kExitViolation;
}

void print_tree(const BTNode& node, int depth) {
    std::cout << std::string(static_cast<std::size_t>(depth) * 2, ' ');
    switch (node.kind) {
        case BTNode::Kind::Sequence: std::cout << "Sequence"; break;
        case BTNode::Kind::ReactiveSequence: std::cout << "ReactiveSequence"; break;
        case BTNode::Kind::Fallback: std::cout << "Fallback"; break;
        case BTNode::Kind::RetryUntilSuccessful:
            std::cout << "RetryUntilSuccessful(" << node.max_attempts << ")";
            break;
        case BTNode::Kind::DBReader:
            std::cout << "DBReader " << node.flag << " -> " << node.output_key;
            break;
        case BTNode::Kind::ConditionalExpression:
            std::cout << "Condition [" << expr_to_string(node.expr, ExprSpelling::Dsl) << "]";
            break;
        case BTNode::Kind::SetFlag:
            std::cout << "SetFlag " << node.flag << "=" << (node.value ? "true" : "false");
            break;
        case BTNode::Kind::ActionLeaf:
            std::cout << to_string(node.action.verb);
            if (!node.action.pose.empty()) std::cout << " pose=" << node.action.pose;
            if (!node.action.to.empty()) std::cout << " to=" << node.action.to;
            std::cout << " (" << node.action.duration_ticks << " ticks)";
            break;
    }
    if (node.stmt_index > 0) std::cout << "  [stmt " << node.stmt_index << "]";
    std::cout << "\n";
    for (const auto& c : node.children) print_tree(c, depth + 1);
}

int cmd_inspect(const std::string& file) {
    fs::path path(file);
    if (path.extension() == ".aseq") {
        ActionSequence seq = parse(read_text_file(file));
        std::cout << seq.statements.size() << " statement(s), " << seq.generated_flags.size()
                  << " generated flag(s)\n";
        for (const auto& stmt : seq.statements) {
            std::cout << "  " << stmt.index << ". " << stmt.skill << "(" << stmt.machine;
            for (const auto& p : stmt.params) std::cout << ", " << p;
            std::cout << ")";
            if (!stmt.precondition.is_always_true())
                std::cout << " when [" << expr_to_string(stmt.precondition, ExprSpelling::Dsl)
                          << "]";
            std::cout << "\n";
        }
        for (const auto& g : seq.generated_flags)
            std::cout << "  flag " << g.name << ": " << g.description << "\n";
        return kExitOk;
    }
    if (path.extension() == ".xml") {
        BTNode root = parse_tree_xml(read_text_file(file));
        std::cout << "tree with " << count_nodes(root) << " node(s)\n";
        print_tree(root, 1);
        return kExitOk;
    }
    if (path.extension() == ".json") {
        Scenario s = load_scenario(file);
        std::cout << "scenario " << s.id << " [" << to_string(s.category) << ", " << s.source
                  << "]\n  " << s.instruction << "\n  machines:";
        for (const auto& m : s.site.machines) std::cout << " " << m.id;
        std::cout << "\n  places:";
        for (const auto& p : s.site.places) std::cout << " " << p.name;
        std::cout << "\n";
        return kExitOk;
    }
    throw IoError("cannot inspect " + file + " (expect .aseq, .xml or scenario .json)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"earthwork coordination toolkit: instructions -> behavior trees -> simulation"};
    app.require_subcommand(1);

    // plan
    std::string instruction, scenario_file, catalog_dir = default_data_dir() + "/scenarios";
    std::string planner_name = "rules", hitl_text = "off", endpoint_file, fixture_file;
    std::string plan_out = "plan.aseq", transcript_path;
    int scenario_id = 0;
    auto* plan_cmd = app.add_subcommand("plan", "generate an Action Sequence");
    plan_cmd->add_option("instruction", instruction, "natural-language instruction");
    plan_cmd->add_option("--scenario", scenario_id, "catalog scenario id");
    plan_cmd->add_option("--scenario-file", scenario_file, "scenario JSON file");
    plan_cmd->add_option("--catalog", catalog_dir, "scenario catalog directory");
    plan_cmd->add_option("--planner", planner_name, "rules | llm")
        ->check(CLI::IsMember({"rules", "llm"}));
    plan_cmd->add_option("--hitl", hitl_text, "off | interactive | scripted:FILE");
    plan_cmd->add_option("--endpoint", endpoint_file, "LLM endpoint config JSON");
    plan_cmd->add_option("--llm-fixture", fixture_file, "canned response file (fake transport)");
    plan_cmd->add_option("-o,--out", plan_out, "output .aseq path");
    plan_cmd->add_option("--transcript", transcript_path, "write request transcript JSON");

    // compile
    std::string seq_file, paramdb_file = default_data_dir() + "/paramdb.json";
    std::string compile_scenario_file, out_dir = "plan_xml";
    auto* compile_cmd = app.add_subcommand("compile", "compile an .aseq into per-machine XML");
    compile_cmd->add_option("seq", seq_file, ".aseq file")->required();
    compile_cmd->add_option("--paramdb", paramdb_file, "task parameter database JSON");
    compile_cmd->add_option("--scenario", compile_scenario_file,
                            "scenario JSON to derive site paths from");
    compile_cmd->add_option("--out", out_dir, "output directory");

    // run
    std::string xml_dir, run_scenario_file, run_mode = "deterministic";
    std::string report_file, timeline_file, history_file, trace_file, events_file;
    std::string registry_file;
    long budget = 5000;
    auto* run_cmd = app.add_subcommand("run", "execute compiled trees in the site simulator");
    run_cmd->add_option("--xml-dir", xml_dir, "directory of per-machine .xml trees")->required();
    run_cmd->add_option("--scenario", run_scenario_file, "scenario JSON")->required();
    run_cmd->add_option("--mode", run_mode, "deterministic | concurrent")
        ->check(CLI::IsMember({"deterministic", "concurrent"}));
    run_cmd->add_option("--budget", budget, "tick budget");
    run_cmd->add_option("--report", report_file, "write RunReport JSON");
    run_cmd->add_option("--timeline", timeline_file, "write flag/occupancy CSV");
    run_cmd->add_option("--history", history_file, "write blackboard history JSON lines");
    run_cmd->add_option("--trace", trace_file, "write tick trace JSON lines");
    run_cmd->add_option("--events", events_file, "write site event log JSON lines");
    run_cmd->add_option("--registry", registry_file, "extra/override flag registry JSON");

    // eval
    std::string eval_catalog = default_data_dir() + "/scenarios";
    std::string eval_paramdb = default_data_dir() + "/paramdb.json";
    std::string eval_planner = "rules", eval_out, eval_mode = "deterministic";
    std::string eval_endpoint, eval_fixture_dir, eval_hitl = "off";
    long eval_budget = 5000;
    auto* eval_cmd = app.add_subcommand("eval", "batch pipeline over the scenario catalog");
    eval_cmd->add_option("--catalog", eval_catalog, "scenario catalog directory");
    eval_cmd->add_option("--paramdb", eval_paramdb, "task parameter database JSON");
    eval_cmd->add_option("--planner", eval_planner, "rules | llm")
        ->check(CLI::IsMember({"rules", "llm"}));
    eval_cmd->add_option("--budget", eval_budget, "tick budget per scenario");
    eval_cmd->add_option("--out", eval_out, "write EvalReport JSON");
    eval_cmd->add_option("--mode", eval_mode, "deterministic | concurrent");
    eval_cmd->add_option("--endpoint", eval_endpoint, "LLM endpoint config JSON");
    eval_cmd->add_option("--fixture-dir", eval_fixture_dir,
                         "canned responses, one fixture_<id>.txt per scenario");
    eval_cmd->add_option("--hitl", eval_hitl, "off | scripted:DIR (feedback_<id>.txt files)");

    // inspect
    std::string inspect_file;
    auto* inspect_cmd = app.add_subcommand("inspect", "pretty-print .aseq / .xml / scenario");
    inspect_cmd->add_option("file", inspect_file, "file to inspect")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (plan_cmd->parsed())
            return cmd_plan(instruction, scenario_id, scenario_file, catalog_dir, planner_name,
                            hitl_text, endpoint_file, fixture_file, plan_out, transcript_path);
        if (compile_cmd->parsed())
            return cmd_compile(seq_file, paramdb_file, compile_scenario_file, out_dir);
        if (run_cmd->parsed())
            return cmd_run(xml_dir, run_scenario_file, run_mode, budget, report_file,
                           timeline_file, history_file, trace_file, events_file,
                           registry_file);
        if (eval_cmd->parsed())
            return cmd_eval(eval_catalog, eval_paramdb, eval_planner, eval_budget, eval_out,
                            eval_mode, eval_endpoint, eval_fixture_dir, eval_hitl);
        if (inspect_cmd->parsed()) return cmd_inspect(inspect_file);
    } catch (const HttpError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPlanner;
    } catch (const TimeoutError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPlanner;
    } catch (const AuthMissingError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPlanner;
    } catch (const BudgetExhaustedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPlanner;
    } catch (const MissingContextError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPlanner;
    } catch (const UnsupportedScenarioError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPlanner;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitOk;
}
