#pragma once

#include <chrono>
#include <cstdlib>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sitebt/action_sequence.hpp"
#include "sitebt/errors.hpp"
#include "sitebt/io_util.hpp"
#include "sitebt/scenario.hpp"
#include "sitebt/skills.hpp"

namespace sitebt {

enum class PlanStage { ActionSequence, BehaviorTree };

inline const char* to_string(PlanStage s) {
    return s == PlanStage::ActionSequence ? "action_sequence" : "behavior_tree";
}

struct PromptBundle {
    PlanStage stage = PlanStage::ActionSequence;
    std::string system_text;
    std::string user_text;
    std::map<std::string, std::string> attachments;
    int attempt = 1;  // 2 after the one allowed refinement
};

struct LlmEndpointConfig {
    std::string base_url = "http://127.0.0.1:8080";
    std::string path = "/v1/chat/completions";
    std::string model = "local-model";
    std::string auth_env = "SITEBT_LLM_TOKEN";
    int max_output_tokens = 4096;
    int timeout_seconds = 120;
    int max_retries = 0;
};

inline LlmEndpointConfig endpoint_config_from_json(const nlohmann::json& j) {
    LlmEndpointConfig c;
    c.base_url = j.value("base_url", c.base_url);
    c.path = j.value("path", c.path);
    c.model = j.value("model", c.model);
    c.auth_env = j.value("auth_env", c.auth_env);
    c.max_output_tokens = j.value("max_output_tokens", c.max_output_tokens);
    c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
    c.max_retries = j.value("max_retries", c.max_retries);
    if (c.timeout_seconds <= 0) throw IoError("endpoint timeout must be positive");
    return c;
}

struct UsageRecord {
    PlanStage stage = PlanStage::ActionSequence;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    double wall_seconds = 0.0;
    int attempt = 1;
    bool estimated = false;  // tokens counted locally, not reported by the provider

    long total_tokens() const { return prompt_tokens + completion_tokens; }
};

struct HitlFeedback {
    PlanStage stage = PlanStage::ActionSequence;
    std::string feedback;
    std::string target_artifact;  // the sequence text or XML being corrected
};

// ---------------------------------------------------------------------------
// Prompt assembly
// ---------------------------------------------------------------------------

namespace detail {

inline const std::vector<std::string>& required_attachments(PlanStage stage) {
    static const std::vector<std::string> stage1 = {"skills_table", "default_flags",
                                                    "flag_rules"};
    static const std::vector<std::string> stage2 = {"action_sequence", "template_structure",
                                                    "node_definitions", "xml_example",
                                                    "task_parameters"};
    return stage == PlanStage::ActionSequence ? stage1 : stage2;
}

}  // namespace detail

inline std::string flag_rules_text() {
    return "Rules for generated synchronization flags:\n"
           "- Generate a flag only when one machine must wait for another; avoid redundant "
           "flags.\n"
           "- Flags mirroring sensed world states may be added for consistency checks.\n"
           "- Flag names are uppercase, state what machine and state they describe, and end "
           "with _FLG.\n"
           "- Declare every generated flag after the statements as `NAME_FLG: description` "
           "stating when it is True and when False.\n";
}

/// Deterministic text assembly; the same inputs always produce the same
/// bundle, and the result is stable against the golden files under tests.
inline PromptBundle build_prompt(PlanStage stage, const std::string& instruction,
                                 const std::map<std::string, std::string>& context) {
    for (const auto& item : detail::required_attachments(stage))
        if (!context.count(item)) throw MissingContextError(item);

    PromptBundle bundle;
    bundle.stage = stage;
    bundle.attachments = context;
    if (stage == PlanStage::ActionSequence) {
        bundle.system_text =
            "You plan earthwork operations. Decompose the instruction into an Action "
            "Sequence: numbered skill calls, one per line, in the form\n"
            "  <n>. skill(machine, args...) [depends_on FLAG==true and ...] [# reasoning]\n"
            "using only the skills listed. Order actions so machines never interfere; "
            "express cross-machine waits with depends_on over flags.\n";
        bundle.user_text = "Instruction: " + instruction + "\n\nAvailable skills:\n" +
                           context.at("skills_table") + "\nDefault flags (initial states):\n" +
                           context.at("default_flags") + "\n" + context.at("flag_rules");
    } else {
        bundle.system_text =
            "You translate an Action Sequence into one behavior tree per machine, emitted "
            "as XML. Follow the template exactly: every statement becomes a "
            "ReactiveSequence whose first child retries flag reads and the condition check "
            "until the precondition holds, and whose second child runs the primitive "
            "actions followed by the statement's SetFlag nodes.\n";
        bundle.user_text = "Action Sequence:\n" + context.at("action_sequence") +
                           "\nTemplate structure:\n" + context.at("template_structure") +
                           "\nNode definitions:\n" + context.at("node_definitions") +
                           "\nExample tree:\n" + context.at("xml_example") +
                           "\nTask parameters:\n" + context.at("task_parameters");
    }
    return bundle;
}

/// Appends the prior artifact and one round of human feedback. Each stage
/// allows a single refinement; a second call exhausts the budget.
inline PromptBundle refine(const PromptBundle& bundle, const HitlFeedback& feedback) {
    if (feedback.feedback.empty()) throw IoError("refinement feedback must not be empty");
    if (bundle.attempt >= 2) throw BudgetExhaustedError();
    PromptBundle next = bundle;
    next.attempt = bundle.attempt + 1;
    next.user_text += "\n\nPrevious attempt:\n" + feedback.target_artifact +
                      "\nReviewer feedback: " + feedback.feedback +
                      "\nRegenerate the full artifact with the feedback applied.\n";
    return next;
}

// ---------------------------------------------------------------------------
// Transport
// ---------------------------------------------------------------------------

struct LlmResponse {
    std::string text;
    std::optional<long> prompt_tokens;
    std::optional<long> completion_tokens;
};

class LlmTransport {
public:
    virtual ~LlmTransport() = default;
    virtual LlmResponse post(const LlmEndpointConfig& config, const nlohmann::json& payload) = 0;
};

/// Canned responses for offline runs and tests.
class FakeTransport : public LlmTransport {
public:
    explicit FakeTransport(std::vector<std::string> responses)
        : responses_(std::move(responses)) {}

    LlmResponse post(const LlmEndpointConfig&, const nlohmann::json&) override {
        if (next_ >= responses_.size()) throw HttpError(503);
        LlmResponse r;
        r.text = responses_[next_++];
        return r;
    }

private:
    std::vector<std::string> responses_;
    std::size_t next_ = 0;
};

/// Chat-completions style JSON POST over HTTP. The auth token comes from the
/// environment variable named in the config and is checked before any
/// network activity.
class HttpTransport : public LlmTransport {
public:
    LlmResponse post(const LlmEndpointConfig& config, const nlohmann::json& payload) override {
        const char* token = config.auth_env.empty() ? "" : std::getenv(config.auth_env.c_str());
        if (!config.auth_env.empty() && (!token || !*token))
            throw AuthMissingError(config.auth_env);

        httplib::Client client(config.base_url);
        client.set_connection_timeout(config.timeout_seconds, 0);
        client.set_read_timeout(config.timeout_seconds, 0);
        httplib::Headers headers;
        if (token && *token) headers.emplace("Authorization", std::string("Bearer ") + token);

        int attempts = 0;
        while (true) {
            ++attempts;
            auto res = client.Post(config.path, headers, payload.dump(), "application/json");
            if (!res) throw TimeoutError();
            if (res->status == 429 || res->status >= 500) {
                if (attempts <= config.max_retries) continue;
                throw HttpError(res->status);
            }
            if (res->status < 200 || res->status >= 300) throw HttpError(res->status);
            return parse_body(res->body);
        }
    }

private:
    static LlmResponse parse_body(const std::string& body) {
        LlmResponse out;
        nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
        if (j.is_discarded()) throw HttpError(502);
        out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (j.contains("usage")) {
            const auto& u = j.at("usage");
            if (u.contains("prompt_tokens")) out.prompt_tokens = u.at("prompt_tokens").get<long>();
            if (u.contains("completion_tokens"))
                out.completion_tokens = u.at("completion_tokens").get<long>();
        }
        return out;
    }
};

inline long whitespace_token_estimate(const std::string& text) {
    long count = 0;
    bool in_token = false;
    for (char c : text) {
        bool ws = std::isspace(static_cast<unsigned char>(c));
        if (!ws && !in_token) ++count;
        in_token = !ws;
    }
    return count;
}

/// Sends the bundle and returns the raw model text plus a usage record.
/// Token counts come from the provider when reported, otherwise from a
/// whitespace estimate marked as such.
inline std::pair<std::string, UsageRecord> request(const LlmEndpointConfig& config,
                                                   const PromptBundle& bundle,
                                                   LlmTransport& transport) {
    nlohmann::json payload = {
        {"model", config.model},
        {"max_tokens", config.max_output_tokens},
        {"messages",
         {{{"role", "system"}, {"content", bundle.system_text}},
          {{"role", "user"}, {"content", bundle.user_text}}}}};

    auto started = std::chrono::steady_clock::now();
    LlmResponse response = transport.post(config, payload);
    double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    UsageRecord usage;
    usage.stage = bundle.stage;
    usage.attempt = bundle.attempt;
    usage.wall_seconds = std::max(wall, 1e-9);
    if (response.prompt_tokens && response.completion_tokens) {
        usage.prompt_tokens = *response.prompt_tokens;
        usage.completion_tokens = *response.completion_tokens;
    } else {
        usage.prompt_tokens =
            whitespace_token_estimate(bundle.system_text) +
            whitespace_token_estimate(bundle.user_text);
        usage.completion_tokens = whitespace_token_estimate(response.text);
        usage.estimated = true;
    }
    return {response.text, usage};
}

/// The artifact is the first fenced code block of the model response; a
/// response without one is a generation failure routed back to HITL.
inline std::optional<std::string> extract_artifact(const std::string& raw) {
    std::size_t open = raw.find("```");
    if (open == std::string::npos) return std::nullopt;
    std::size_t body_start = raw.find('\n', open);
    if (body_start == std::string::npos) return std::nullopt;
    ++body_start;
    std::size_t close = raw.find("```", body_start);
    if (close == std::string::npos) return std::nullopt;
    return raw.substr(body_start, close - body_start);
}

inline nlohmann::json transcript_to_json(const PromptBundle& bundle, const std::string& raw,
                                         const UsageRecord& usage) {
    nlohmann::json attachments = nlohmann::json::object();
    for (const auto& [k, v] : bundle.attachments) attachments[k] = v;
    return {{"bundle",
             {{"stage", to_string(bundle.stage)},
              {"system", bundle.system_text},
              {"user", bundle.user_text},
              {"attachments", attachments},
              {"attempt", bundle.attempt}}},
            {"response", raw},
            {"usage",
             {{"stage", to_string(usage.stage)},
              {"prompt_tokens", usage.prompt_tokens},
              {"completion_tokens", usage.completion_tokens},
              {"wall_seconds", usage.wall_seconds},
              {"attempt", usage.attempt},
              {"estimated", usage.estimated}}}};
}

// ---------------------------------------------------------------------------
// Rule-based planner: the deterministic offline oracle for the catalog.
// ---------------------------------------------------------------------------

namespace detail {

class SequenceBuilder {
public:
    int add(const std::string& skill, const std::string& machine,
            std::vector<std::string> params, FlagExpr precondition, std::string reasoning) {
        ActionStatement stmt;
        stmt.index = static_cast<int>(seq_.statements.size()) + 1;
        stmt.skill = skill;
        stmt.machine = machine;
        stmt.params = std::move(params);
        stmt.precondition = std::move(precondition);
        stmt.reasoning = std::move(reasoning);
        seq_.statements.push_back(std::move(stmt));
        return seq_.statements.back().index;
    }

    void declare(const FlagName& name, const std::string& description) {
        if (!seq_.declares_flag(name)) seq_.generated_flags.push_back({name, description});
    }

    ActionSequence take() { return std::move(seq_); }

private:
    ActionSequence seq_;
};

struct Trip {
    std::string truck;
    int trip_no = 0;  // 1-based per truck
    int loads = 1;
};

inline std::string truck_flag(const std::string& truck, const std::string& state, int trip_no) {
    std::string name = to_upper_flag_token(truck) + "_" + state;
    if (trip_no > 1) name += "_TRIP_" + std::to_string(trip_no);
    return name + "_FLG";
}

}  // namespace detail

/// Deterministic planner over the catalog's task schema. Every output passes
/// validation, compiles, runs without violations and carries no redundant
/// flags; free-form instructions outside the schema go through the LLM path.
inline ActionSequence rule_planner(const Scenario& scenario) {
    const nlohmann::json& task = scenario.task;
    if (!task.contains("kind")) throw UnsupportedScenarioError("scenario has no task kind");
    const std::string kind = task.at("kind").get<std::string>();

    auto machine_of_kind = [&scenario](MachineKind kind) -> std::string {
        for (const auto& m : scenario.site.machines)
            if (m.kind == kind) return m.id;
        throw UnsupportedScenarioError("scenario lacks a required machine");
    };

    detail::SequenceBuilder b;

    if (kind == "excavate") {
        const std::string exc = machine_of_kind(MachineKind::Excavator);
        const std::string source = task.at("source").get<std::string>();
        const std::string release = task.at("release").get<std::string>();
        const int reps = task.value("repetitions", 1);
        b.add("initial_pose", exc, {}, FlagExpr::always_true(),
              "Start from the safe initial pose.");
        for (int i = 0; i < reps; ++i)
            b.add("excavate_and_release", exc, {source, release}, FlagExpr::always_true(),
                  "Excavate from " + source + " and release at " + release + ".");
        if (task.value("final_initial_pose", false))
            b.add("initial_pose", exc, {}, FlagExpr::always_true(),
                  "Return to the initial pose when done.");
        return b.take();
    }

    if (kind == "excavate_relocate") {
        const std::string exc = machine_of_kind(MachineKind::Excavator);
        b.add("initial_pose", exc, {}, FlagExpr::always_true(),
              "Start from the safe initial pose.");
        for (const auto& round : task.at("rounds")) {
            if (round.contains("move_to"))
                b.add("move", exc, {round.at("move_to").get<std::string>()},
                      FlagExpr::always_true(), "Relocate to the next excavation point.");
            b.add("excavate_and_release", exc,
                  {round.at("source").get<std::string>(), round.at("release").get<std::string>()},
                  FlagExpr::always_true(), "Excavate once at this point.");
            b.add("initial_pose", exc, {}, FlagExpr::always_true(),
                  "Return to the initial pose after the excavation.");
        }
        return b.take();
    }

    if (kind == "move_only") {
        const std::string machine = task.at("machine").get<std::string>();
        b.add("move", machine, {task.at("destination").get<std::string>()},
              FlagExpr::always_true(), "Drive to the requested destination.");
        return b.take();
    }

    if (kind == "level" || kind == "gather" || kind == "gather_level") {
        const std::string exc = machine_of_kind(MachineKind::Excavator);
        const std::string place = task.at("place").get<std::string>();
        b.add("initial_pose", exc, {}, FlagExpr::always_true(),
              "Start from the safe initial pose.");
        if (kind != "level")
            b.add("gather", exc, {place}, FlagExpr::always_true(),
                  "Gather the scattered soil at " + place + ".");
        if (kind != "gather")
            b.add("level", exc, {place}, FlagExpr::always_true(),
                  "Level the soil at " + place + ".");
        return b.take();
    }

    if (kind == "excavate_gather") {
        const std::string exc = machine_of_kind(MachineKind::Excavator);
        const std::string source = task.at("source").get<std::string>();
        b.add("initial_pose", exc, {}, FlagExpr::always_true(),
              "Start from the safe initial pose.");
        b.add("excavate_and_release", exc, {source, task.at("release").get<std::string>()},
              FlagExpr::always_true(), "Excavate once at " + source + ".");
        b.add("gather", exc, {source}, FlagExpr::always_true(),
              "Gather the remaining soil at " + source + ".");
        return b.take();
    }

    if (kind == "truck_route") {
        const std::string truck =
            task.contains("machine") ? task.at("machine").get<std::string>()
                                     : machine_of_kind(MachineKind::DumpTruck);
        for (const auto& step : task.at("route")) {
            const std::string op = step.at("op").get<std::string>();
            if (op == "move")
                b.add("move", truck, {step.at("to").get<std::string>()},
                      FlagExpr::always_true(), "Drive to " + step.at("to").get<std::string>() + ".");
            else if (op == "dump")
                b.add("dump_soil", truck, {}, FlagExpr::always_true(),
                      "Dump the loaded soil here.");
            else
                throw UnsupportedScenarioError("unknown route op " + op);
        }
        return b.take();
    }

    if (kind == "load_only") {
        // Load a truck at the loading position without transporting: the
        // approach waits for the excavator's initial pose, the excavation for
        // the truck's arrival.
        const std::string exc = machine_of_kind(MachineKind::Excavator);
        const std::string truck = machine_of_kind(MachineKind::DumpTruck);
        const std::string source = task.at("source").get<std::string>();
        const std::string loading = task.at("loading").get<std::string>();
        const FlagName init_flag = to_upper_flag_token(exc) + "_INITIAL_POSE_FLG";
        const FlagName arrive_flag =
            detail::truck_flag(truck, "AT_" + to_upper_flag_token(loading), 1);
        b.add("initial_pose", exc, {}, FlagExpr::always_true(),
              "Reach the initial pose so the dump truck can approach safely.");
        b.declare(init_flag,
                  "True when the " + exc + " is in its initial pose; False otherwise.");
        b.add("move", truck, {loading}, FlagExpr::leaf(init_flag, true),
              "Move the dump truck next to the excavator.");
        b.declare(arrive_flag, "True when " + truck + " is at the " + loading +
                                   " for trip 1; False otherwise.");
        b.add("excavate_and_release", exc, {source, truck},
              FlagExpr::all_of({FlagExpr::leaf(arrive_flag, true),
                                FlagExpr::leaf("SENSING_ARRIVAL_FLG", true)}),
              "Excavate and load the soil.");
        return b.take();
    }

    if (kind == "excavate_transport") {
        const std::string exc = machine_of_kind(MachineKind::Excavator);
        const std::string source = task.at("source").get<std::string>();
        const std::string loading = task.at("loading").get<std::string>();
        const std::string dumping = task.at("dumping").get<std::string>();
        const bool level_on_bed = task.value("level_on_bed", false);
        const bool level_loading_after = task.value("level_loading_after", false);

        // Round-robin trip order over the trucks.
        std::vector<detail::Trip> trips;
        {
            struct TruckPlan {
                std::string id;
                int trips = 1;
                int loads = 1;
                int done = 0;
            };
            std::vector<TruckPlan> plans;
            for (const auto& t : task.at("trucks"))
                plans.push_back({t.at("id").get<std::string>(), t.value("trips", 1),
                                 t.value("loads_per_trip", 1), 0});
            bool remaining = true;
            while (remaining) {
                remaining = false;
                for (auto& p : plans) {
                    if (p.done >= p.trips) continue;
                    ++p.done;
                    trips.push_back({p.id, p.done, p.loads});
                    if (p.done < p.trips) remaining = true;
                }
            }
        }
        if (trips.empty()) throw UnsupportedScenarioError("no trips configured");

        const FlagName init_flag = to_upper_flag_token(exc) + "_INITIAL_POSE_FLG";
        b.add("initial_pose", exc, {}, FlagExpr::always_true(),
              "Reach the initial pose so the first dump truck can approach safely.");
        b.declare(init_flag,
                  "True when the " + exc + " is in its initial pose; False otherwise.");

        FlagName prev_reset;
        FlagName prev_at_dumping;  // empty when the previous trip used the same truck
        for (std::size_t k = 0; k < trips.size(); ++k) {
            const detail::Trip& trip = trips[k];
            const bool last_trip = k + 1 == trips.size();

            std::vector<FlagExpr> approach;
            if (k == 0) {
                approach.push_back(FlagExpr::leaf(init_flag, true));
            } else {
                approach.push_back(FlagExpr::leaf(prev_reset, true));
                if (!prev_at_dumping.empty())
                    approach.push_back(FlagExpr::leaf(prev_at_dumping, true));
            }
            const FlagName arrive_flag =
                detail::truck_flag(trip.truck, "AT_" + to_upper_flag_token(loading),
                                   trip.trip_no);
            b.add("move", trip.truck, {loading}, FlagExpr::all_of(std::move(approach)),
                  "Approach the loading position once it is safe.");
            b.declare(arrive_flag, "True when " + trip.truck + " is at the " + loading +
                                       " for trip " + std::to_string(trip.trip_no) +
                                       "; False otherwise.");

            FlagExpr load_gate = FlagExpr::all_of(
                {FlagExpr::leaf(arrive_flag, true), FlagExpr::leaf("SENSING_ARRIVAL_FLG", true)});
            for (int j = 0; j < trip.loads; ++j)
                b.add("excavate_and_release", exc, {source, trip.truck}, load_gate,
                      "Excavate from " + source + " and load " + trip.truck + ".");

            if (level_on_bed)
                b.add("level", exc, {trip.truck}, FlagExpr::always_true(),
                      "Level the soil on the truck bed.");

            const FlagName reset_flag = to_upper_flag_token(exc) + "_RESET_TRIP_" +
                                        std::to_string(k + 1) + "_FLG";
            b.add("initial_pose", exc, {},
                  FlagExpr::leaf("SENSING_LOADED_FLG", true),
                  "Return to the initial pose to clear the departure path.");
            b.declare(reset_flag, "True when the " + exc +
                                      " has returned to its initial pose after loading of "
                                      "trip " +
                                      std::to_string(k + 1) + "; False otherwise.");

            b.add("move", trip.truck, {dumping}, FlagExpr::leaf(reset_flag, true),
                  "Depart for the dumping site once the excavator is clear.");
            const bool next_differs = !last_trip && trips[k + 1].truck != trip.truck;
            FlagName at_dumping;
            if (next_differs) {
                at_dumping = detail::truck_flag(
                    trip.truck, "AT_" + to_upper_flag_token(dumping), trip.trip_no);
                b.declare(at_dumping, "True when " + trip.truck + " has arrived at the " +
                                          dumping + " on trip " +
                                          std::to_string(trip.trip_no) + "; False otherwise.");
            }
            b.add("dump_soil", trip.truck, {}, FlagExpr::always_true(),
                  "Unload the soil at the dumping site.");

            prev_reset = reset_flag;
            prev_at_dumping = next_differs ? at_dumping : FlagName{};
        }

        if (level_loading_after) {
            // The excavator must wait until the final truck has left the zone.
            const detail::Trip& last = trips.back();
            const FlagName left_flag = detail::truck_flag(
                last.truck, "AT_" + to_upper_flag_token(dumping), last.trip_no);
            b.declare(left_flag, "True when " + last.truck + " has arrived at the " + dumping +
                                     " on trip " + std::to_string(last.trip_no) +
                                     "; False otherwise.");
            b.add("level", exc, {loading}, FlagExpr::leaf(left_flag, true),
                  "Level the loading area after the truck has departed.");
        }

        if (task.contains("park")) {
            for (const auto& [truck, place] : task.at("park").items())
                b.add("move", truck, {place.get<std::string>()}, FlagExpr::always_true(),
                      "Park at " + place.get<std::string>() + ".");
        }
        return b.take();
    }

    throw UnsupportedScenarioError("unknown task kind " + kind);
}

}  // namespace sitebt
