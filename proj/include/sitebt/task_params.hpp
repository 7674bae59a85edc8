#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sitebt/errors.hpp"

namespace sitebt {

struct PathInfo {
    std::string id;
    int length_ticks = 1;
};

struct PlaceCoord {
    double x = 0.0;
    double y = 0.0;
};

/// Movement paths, joint configurations and step durations stored in the
/// system database. Paths absent from the table are derived from place
/// coordinates at `travel_speed` meters per tick; everything else that fails
/// to resolve is a MissingParam error.
struct TaskParamDB {
    std::map<std::pair<std::string, std::string>, PathInfo> paths;
    std::map<std::string, std::vector<double>> joint_targets;  // pose name -> radians
    std::map<std::string, int> skill_durations;                // step key -> ticks
    std::map<std::string, PlaceCoord> place_coords;
    std::map<std::string, std::string> start_places;           // machine -> initial place
    double travel_speed = 2.0;                                 // m per tick for derived paths

    PathInfo path(const std::string& from, const std::string& to) const {
        auto it = paths.find({from, to});
        if (it != paths.end()) return it->second;
        auto a = place_coords.find(from);
        auto b = place_coords.find(to);
        if (a == place_coords.end() || b == place_coords.end())
            throw MissingParamError("path", from + " -> " + to);
        double dx = a->second.x - b->second.x;
        double dy = a->second.y - b->second.y;
        double dist = std::sqrt(dx * dx + dy * dy);
        int ticks = std::max(1, static_cast<int>(std::lround(dist / travel_speed)));
        return PathInfo{"path_" + from + "__" + to, ticks};
    }

    const std::vector<double>& joints(const std::string& pose) const {
        auto it = joint_targets.find(pose);
        if (it == joint_targets.end()) throw MissingParamError("joint_targets", pose);
        return it->second;
    }

    int duration(const std::string& key) const {
        auto it = skill_durations.find(key);
        if (it == skill_durations.end()) throw MissingParamError("skill_durations", key);
        return it->second;
    }

    std::string start_place(const std::string& machine) const {
        auto it = start_places.find(machine);
        if (it == start_places.end()) throw MissingParamError("start_places", machine);
        return it->second;
    }
};

inline TaskParamDB task_param_db_from_json(const nlohmann::json& j) {
    TaskParamDB db;
    if (j.contains("paths")) {
        for (const auto& p : j.at("paths")) {
            PathInfo info{p.at("id").get<std::string>(), p.at("length_ticks").get<int>()};
            db.paths[{p.at("from").get<std::string>(), p.at("to").get<std::string>()}] = info;
        }
    }
    if (j.contains("joint_targets"))
        for (const auto& [pose, joints] : j.at("joint_targets").items())
            db.joint_targets[pose] = joints.get<std::vector<double>>();
    if (j.contains("skill_durations"))
        for (const auto& [key, ticks] : j.at("skill_durations").items()) {
            int t = ticks.get<int>();
            if (t < 1) throw IoError("skill duration for " + key + " must be >= 1");
            db.skill_durations[key] = t;
        }
    if (j.contains("place_coords"))
        for (const auto& [place, xy] : j.at("place_coords").items())
            db.place_coords[place] = {xy.at("x").get<double>(), xy.at("y").get<double>()};
    if (j.contains("start_places"))
        for (const auto& [machine, place] : j.at("start_places").items())
            db.start_places[machine] = place.get<std::string>();
    if (j.contains("travel_speed")) db.travel_speed = j.at("travel_speed").get<double>();
    return db;
}

inline nlohmann::json task_param_db_to_json(const TaskParamDB& db) {
    nlohmann::json j;
    j["paths"] = nlohmann::json::array();
    for (const auto& [key, info] : db.paths)
        j["paths"].push_back({{"from", key.first},
                              {"to", key.second},
                              {"id", info.id},
                              {"length_ticks", info.length_ticks}});
    j["joint_targets"] = nlohmann::json::object();
    for (const auto& [pose, joints] : db.joint_targets) j["joint_targets"][pose] = joints;
    j["skill_durations"] = nlohmann::json::object();
    for (const auto& [key, ticks] : db.skill_durations) j["skill_durations"][key] = ticks;
    j["place_coords"] = nlohmann::json::object();
    for (const auto& [place, xy] : db.place_coords)
        j["place_coords"][place] = {{"x", xy.x}, {"y", xy.y}};
    j["start_places"] = nlohmann::json::object();
    for (const auto& [machine, place] : db.start_places) j["start_places"][machine] = place;
    j["travel_speed"] = db.travel_speed;
    return j;
}

}  // namespace sitebt
