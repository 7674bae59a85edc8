#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sitebt/errors.hpp"
#include "sitebt/flags.hpp"
#include "sitebt/io_util.hpp"
#include "sitebt/skills.hpp"
#include "sitebt/task_params.hpp"

namespace sitebt {

enum class ScenarioCategory { Single, Coordinated };

inline const char* to_string(ScenarioCategory c) {
    return c == ScenarioCategory::Single ? "single" : "coordinated";
}

struct PlaceSpec {
    std::string name;
    double x = 0.0;
    double y = 0.0;
    int slots = 1;
    int soil = 0;
};

struct MachineSpec {
    std::string id;
    MachineKind kind = MachineKind::Excavator;
    std::string at;
    int bed_load = 0;
};

struct SiteSpec {
    std::vector<PlaceSpec> places;
    std::vector<MachineSpec> machines;
    std::string loading_place;  // swing-zone place; empty when the site has none

    std::set<std::string> place_names() const {
        std::set<std::string> out;
        for (const auto& p : places) out.insert(p.name);
        return out;
    }

    std::map<std::string, MachineKind> machine_kinds() const {
        std::map<std::string, MachineKind> out;
        for (const auto& m : machines) out[m.id] = m.kind;
        return out;
    }
};

/// Goal predicate, the conjunction of every present part.
struct GoalSpec {
    std::map<std::string, int> soil_at;           // place -> exact units
    std::map<std::string, int> completed_skills;  // skill -> completed count
    std::map<std::string, std::string> machine_at;
    std::optional<bool> beds_empty;
};

struct Scenario {
    int id = 0;
    std::string instruction;
    ScenarioCategory category = ScenarioCategory::Single;
    std::string source;  // "paper" | "derived"
    int excavators = 0;
    int dump_trucks = 0;
    SiteSpec site;
    nlohmann::json task;  // rule-planner parameters
    GoalSpec goal;
};

inline Scenario scenario_from_json(const nlohmann::json& j) {
    Scenario s;
    s.id = j.at("id").get<int>();
    s.instruction = j.at("instruction").get<std::string>();
    s.category = j.at("category").get<std::string>() == "coordinated"
                     ? ScenarioCategory::Coordinated
                     : ScenarioCategory::Single;
    s.source = j.value("source", "derived");
    s.excavators = j.value("excavators", 0);
    s.dump_trucks = j.value("dump_trucks", 0);
    const auto& site = j.at("site");
    for (const auto& p : site.at("places")) {
        PlaceSpec place;
        place.name = p.at("name").get<std::string>();
        place.x = p.value("x", 0.0);
        place.y = p.value("y", 0.0);
        place.slots = p.value("slots", 1);
        place.soil = p.value("soil", 0);
        s.site.places.push_back(std::move(place));
    }
    for (const auto& m : site.at("machines")) {
        MachineSpec machine;
        machine.id = m.at("id").get<std::string>();
        machine.kind = m.at("kind").get<std::string>() == "dump_truck" ? MachineKind::DumpTruck
                                                                       : MachineKind::Excavator;
        machine.at = m.at("at").get<std::string>();
        machine.bed_load = m.value("bed_load", 0);
        s.site.machines.push_back(std::move(machine));
    }
    s.site.loading_place = site.value("loading_place", "");
    s.task = j.value("task", nlohmann::json::object());
    if (j.contains("goal")) {
        const auto& g = j.at("goal");
        if (g.contains("soil_at"))
            for (const auto& [place, units] : g.at("soil_at").items())
                s.goal.soil_at[place] = units.get<int>();
        if (g.contains("completed_skills"))
            for (const auto& [skill, count] : g.at("completed_skills").items())
                s.goal.completed_skills[skill] = count.get<int>();
        if (g.contains("machine_at"))
            for (const auto& [machine, place] : g.at("machine_at").items())
                s.goal.machine_at[machine] = place.get<std::string>();
        if (g.contains("beds_empty")) s.goal.beds_empty = g.at("beds_empty").get<bool>();
    }

    int participants = static_cast<int>(s.site.machines.size());
    bool coordinated = s.category == ScenarioCategory::Coordinated;
    if (coordinated != (participants > 1))
        throw IoError("scenario " + std::to_string(s.id) +
                      ": category does not match machine count");
    return s;
}

inline Scenario load_scenario(const std::string& path) {
    return scenario_from_json(nlohmann::json::parse(read_text_file(path)));
}

/// Default sensing flags for a site: arrival and loaded plus one
/// SENSING_<MACHINE>_AT_<PLACE>_FLG per machine/place pair. All start false;
/// the sensing poll aligns them with the world on the first tick.
inline std::vector<FlagRegistryEntry> default_registry_for(const SiteSpec& site) {
    std::vector<FlagRegistryEntry> out;
    out.push_back({"SENSING_LOADED_FLG", FlagKind::Default, false,
                   "True when soil is loaded in some dump truck bed; False otherwise."});
    out.push_back({"SENSING_ARRIVAL_FLG", FlagKind::Default, false,
                   "True when a dump truck occupies the loading place; False otherwise."});
    for (const auto& m : site.machines) {
        for (const auto& p : site.places) {
            FlagRegistryEntry e;
            e.name = "SENSING_" + to_upper_flag_token(m.id) + "_AT_" +
                     to_upper_flag_token(p.name) + "_FLG";
            e.kind = FlagKind::Default;
            e.initial = false;
            e.description = "True when " + m.id + " is at " + p.name + "; False otherwise.";
            out.push_back(std::move(e));
        }
    }
    return out;
}

/// Site-specific database: base joint targets and durations plus paths,
/// coordinates and start places derived from the scenario.
inline TaskParamDB paramdb_for_scenario(const TaskParamDB& base, const Scenario& scenario) {
    TaskParamDB db = base;
    for (const auto& p : scenario.site.places) db.place_coords[p.name] = {p.x, p.y};
    for (const auto& m : scenario.site.machines) db.start_places[m.id] = m.at;
    return db;
}

/// Loads every scenario_*.json under `dir`, ordered by id.
inline std::vector<Scenario> load_catalog(const std::string& dir);

}  // namespace sitebt

#include <filesystem>

namespace sitebt {

inline std::vector<Scenario> load_catalog(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<Scenario> out;
    if (!fs::exists(dir)) throw IoError("catalog directory not found: " + dir);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".json") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.push_back(load_scenario(f));
    std::sort(out.begin(), out.end(),
              [](const Scenario& a, const Scenario& b) { return a.id < b.id; });
    return out;
}

}  // namespace sitebt
