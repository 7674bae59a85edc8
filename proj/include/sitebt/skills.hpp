#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace sitebt {

enum class MachineKind { Excavator, DumpTruck };

inline const char* to_string(MachineKind k) {
    return k == MachineKind::Excavator ? "excavator" : "dump_truck";
}

enum class ParamKind { Machine, Place };

struct SkillParam {
    std::string name;
    ParamKind kind;
};

/// Signature of one abstract skill. The first parameter is always the machine
/// executing the skill; Place parameters also admit machine identifiers
/// (a release target can be a dump truck) and are resolved during validation.
struct SkillSignature {
    std::string name;
    std::set<MachineKind> machine_kinds;
    std::vector<SkillParam> params;  // includes the leading machine param

    int arity() const { return static_cast<int>(params.size()); }
};

using SkillRegistry = std::map<std::string, SkillSignature>;

/// The built-in skill set: move / initial_pose / excavate_and_release /
/// level / gather for excavators, move / dump_soil for dump trucks.
inline const SkillRegistry& default_skills() {
    static const SkillRegistry registry = [] {
        SkillRegistry r;
        auto add = [&r](std::string name, std::set<MachineKind> kinds,
                        std::vector<SkillParam> params) {
            SkillSignature s;
            s.name = name;
            s.machine_kinds = std::move(kinds);
            s.params = std::move(params);
            r[std::move(name)] = std::move(s);
        };
        add("move", {MachineKind::Excavator, MachineKind::DumpTruck},
            {{"machine", ParamKind::Machine}, {"destination", ParamKind::Place}});
        add("initial_pose", {MachineKind::Excavator}, {{"machine", ParamKind::Machine}});
        add("excavate_and_release", {MachineKind::Excavator},
            {{"machine", ParamKind::Machine},
             {"excavate_place", ParamKind::Place},
             {"release_place", ParamKind::Place}});
        add("level", {MachineKind::Excavator},
            {{"machine", ParamKind::Machine}, {"level_place", ParamKind::Place}});
        add("gather", {MachineKind::Excavator},
            {{"machine", ParamKind::Machine}, {"gather_place", ParamKind::Place}});
        add("dump_soil", {MachineKind::DumpTruck}, {{"machine", ParamKind::Machine}});
        return r;
    }();
    return registry;
}

/// Human-readable skill table, used as prompt context.
inline std::string skills_table_text(const SkillRegistry& registry = default_skills()) {
    std::string out;
    for (const auto& [name, sig] : registry) {
        out += name + "(";
        for (std::size_t i = 0; i < sig.params.size(); ++i) {
            if (i) out += ", ";
            out += sig.params[i].name;
        }
        out += ") -- machines:";
        for (auto k : sig.machine_kinds) {
            out += " ";
            out += to_string(k);
        }
        out += "\n";
    }
    return out;
}

}  // namespace sitebt
