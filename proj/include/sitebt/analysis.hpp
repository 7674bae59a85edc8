#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sitebt/action_sequence.hpp"
#include "sitebt/flags.hpp"
#include "sitebt/io_util.hpp"
#include "sitebt/skills.hpp"

namespace sitebt {

struct ValidationIssue {
    std::string where;   // statement index ("#3") or flag name
    std::string code;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> errors;
    std::vector<ValidationIssue> warnings;

    bool ok() const { return errors.empty(); }
};

inline nlohmann::json validation_report_to_json(const ValidationReport& r) {
    auto issues = [](const std::vector<ValidationIssue>& list) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& i : list)
            arr.push_back({{"where", i.where}, {"code", i.code}, {"message", i.message}});
        return arr;
    };
    return {{"errors", issues(r.errors)}, {"warnings", issues(r.warnings)}};
}

// ---------------------------------------------------------------------------
// Generated-flag binding: which statement's completion sets each flag.
//
// The binding key is the flag's own name and declaration text. A flag name
// starts with the squashed machine identifier (DUMPTRUCK_AT_LOADING_SITE_FLG
// -> dump_truck) and the remainder names the state, which is matched against
// the statement's skill and parameters; the declaration description breaks
// remaining ties. When several statements of the owning machine still tie,
// the closest one preceding the flag's first use wins; a tie that cannot be
// broken that way is reported for HITL correction.
// ---------------------------------------------------------------------------

struct FlagBinding {
    FlagName flag;
    int setter_index = 0;  // statement whose completion sets the flag true
};

struct FlagBindingProblem {
    FlagName flag;
    std::string code;  // "UnboundFlag" | "AmbiguousFlagBinding"
    std::string message;
};

struct FlagBindingResult {
    std::vector<FlagBinding> bindings;
    std::vector<FlagBindingProblem> problems;

    std::optional<int> setter_of(const FlagName& name) const {
        for (const auto& b : bindings)
            if (b.flag == name) return b.setter_index;
        return std::nullopt;
    }
};

namespace detail {

inline bool contains(const std::string& haystack, const std::string& needle) {
    return !needle.empty() && haystack.find(needle) != std::string::npos;
}

inline int first_use_index(const ActionSequence& seq, const FlagName& flag) {
    for (const auto& stmt : seq.statements) {
        for (const auto* leaf : leaves_in_order(stmt.precondition))
            if (leaf->flag == flag) return stmt.index;
    }
    return 0;  // unused
}

}  // namespace detail

inline FlagBindingResult bind_generated_flags(const ActionSequence& seq) {
    FlagBindingResult result;

    // Longest squashed machine id that prefixes the flag name owns the flag.
    std::vector<std::string> machines;
    for (const auto& stmt : seq.statements)
        if (std::find(machines.begin(), machines.end(), stmt.machine) == machines.end())
            machines.push_back(stmt.machine);

    for (const auto& decl : seq.generated_flags) {
        const std::string base = decl.name.substr(0, decl.name.size() - 4);  // strip _FLG
        const std::string sq_name = squash_identifier(base);
        const std::string sq_desc = squash_identifier(decl.description);

        std::string owner;
        for (const auto& m : machines) {
            std::string sq_m = squash_identifier(m);
            if (sq_name.rfind(sq_m, 0) == 0 && sq_m.size() > owner.size()) owner = m;
        }

        int best_score = 0;
        std::vector<int> best;  // statement indices at best_score
        for (const auto& stmt : seq.statements) {
            int score = 0;
            const std::string sq_machine = squash_identifier(stmt.machine);
            std::string rest = sq_name;
            if (!owner.empty()) {
                if (stmt.machine != owner) continue;
                score += 4;
                rest = sq_name.substr(squash_identifier(owner).size());
            } else if (detail::contains(sq_desc, sq_machine)) {
                score += 2;
            } else {
                continue;
            }
            const std::string sq_skill = squash_identifier(stmt.skill);
            if (detail::contains(rest, sq_skill))
                score += 3;
            else if (detail::contains(sq_desc, sq_skill))
                score += 1;
            for (const auto& p : stmt.params) {
                const std::string sq_p = squash_identifier(p);
                if (detail::contains(rest, sq_p))
                    score += 3;
                else if (detail::contains(sq_desc, sq_p))
                    score += 2;
            }
            if (score > best_score) {
                best_score = score;
                best = {stmt.index};
            } else if (score == best_score && score > 0) {
                best.push_back(stmt.index);
            }
        }

        if (best.empty()) {
            result.problems.push_back(
                {decl.name, "UnboundFlag", "no statement matches machine and state"});
            continue;
        }
        if (best.size() == 1) {
            result.bindings.push_back({decl.name, best.front()});
            continue;
        }
        int first_use = detail::first_use_index(seq, decl.name);
        if (first_use > 0) {
            std::vector<int> preceding;
            for (int idx : best)
                if (idx < first_use) preceding.push_back(idx);
            if (!preceding.empty()) {
                result.bindings.push_back(
                    {decl.name, *std::max_element(preceding.begin(), preceding.end())});
                continue;
            }
        }
        std::string candidates;
        for (int idx : best) candidates += (candidates.empty() ? "" : ", ") + std::to_string(idx);
        result.problems.push_back({decl.name, "AmbiguousFlagBinding",
                                   "statements {" + candidates + "} match equally"});
    }
    return result;
}

// ---------------------------------------------------------------------------
// Validation against the known machines, places and sensing flags.
// ---------------------------------------------------------------------------

inline ValidationReport validate(const ActionSequence& seq,
                                 const std::map<std::string, MachineKind>& machines,
                                 const std::set<std::string>& places,
                                 const std::vector<FlagRegistryEntry>& default_registry,
                                 const SkillRegistry& skills = default_skills()) {
    ValidationReport report;
    auto error = [&report](const std::string& where, const std::string& code,
                           const std::string& message) {
        report.errors.push_back({where, code, message});
    };

    std::set<FlagName> default_flags;
    for (const auto& e : default_registry) default_flags.insert(e.name);

    std::set<FlagName> declared;
    for (const auto& g : seq.generated_flags) {
        if (declared.count(g.name))
            error(g.name, "DuplicateFlagDecl", "flag declared more than once");
        declared.insert(g.name);
        if (g.description.empty())
            error(g.name, "MissingDescription", "generated flag has no description");
        if (default_flags.count(g.name))
            error(g.name, "ShadowsDefaultFlag", "declaration shadows a default sensing flag");
    }

    for (const auto& stmt : seq.statements) {
        const std::string where = "#" + std::to_string(stmt.index);
        auto sig_it = skills.find(stmt.skill);
        if (sig_it == skills.end()) {
            error(where, "UnknownSkill", "no such skill: " + stmt.skill);
            continue;
        }
        const SkillSignature& sig = sig_it->second;

        auto machine_it = machines.find(stmt.machine);
        if (machine_it == machines.end()) {
            error(where, "UnknownMachine", "no such machine: " + stmt.machine);
        } else if (!sig.machine_kinds.count(machine_it->second)) {
            error(where, "SkillKindMismatch",
                  stmt.skill + " is not available for a " + to_string(machine_it->second));
        }

        for (std::size_t i = 0; i < stmt.params.size(); ++i) {
            const std::string& p = stmt.params[i];
            // Place parameters admit machine identifiers (release into a truck).
            if (!places.count(p) && !machines.count(p))
                error(where, "UnknownPlace", "unknown place or machine: " + p);
        }

        for (const auto* leaf : leaves_in_order(stmt.precondition)) {
            if (!default_flags.count(leaf->flag) && !declared.count(leaf->flag))
                error(where, "UndeclaredFlag",
                      "precondition references undeclared flag " + leaf->flag);
        }
    }

    // Binding failures make the sequence uncompilable, so they are errors; a
    // statement waiting on such a flag additionally gets the semantic warning.
    FlagBindingResult binding = bind_generated_flags(seq);
    for (const auto& p : binding.problems) report.errors.push_back({p.flag, p.code, p.message});
    for (const auto& stmt : seq.statements) {
        for (const auto* leaf : leaves_in_order(stmt.precondition)) {
            if (default_flags.count(leaf->flag)) continue;  // sensing-driven
            if (!declared.count(leaf->flag)) continue;      // already an error
            if (!binding.setter_of(leaf->flag))
                report.warnings.push_back(
                    {"#" + std::to_string(stmt.index), "UnsettableFlag",
                     "no statement or sensing source sets " + leaf->flag});
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Redundant-flag analysis.
// ---------------------------------------------------------------------------

enum class RedundancyReason { DuplicateSemantics, IntraMachineSuperfluous };

inline const char* to_string(RedundancyReason r) {
    return r == RedundancyReason::DuplicateSemantics ? "duplicate_semantics"
                                                     : "intra_machine_superfluous";
}

struct RedundantFlag {
    FlagName name;
    RedundancyReason reason;
};

struct FlagAnalysis {
    std::vector<RedundantFlag> redundant;
    int nrf() const { return static_cast<int>(redundant.size()); }
};

inline nlohmann::json flag_analysis_to_json(const FlagAnalysis& a) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : a.redundant)
        arr.push_back({{"flag", r.name}, {"reason", to_string(r.reason)}});
    return {{"nrf", a.nrf()}, {"redundant", arr}};
}

/// Counts generated flags that add no synchronization:
///  - DuplicateSemantics: a later-declared generated flag with the same
///    set-site and the same use-sites as an earlier one. Generated mirrors of
///    default sensing flags are deliberately not counted (they exist for
///    consistency checks between sensed state and machine operation).
///  - IntraMachineSuperfluous: set by statement i of machine M and consumed
///    only by later statements of the same machine, which sequential order
///    already guarantees.
inline FlagAnalysis analyze_flags(const ActionSequence& seq) {
    FlagAnalysis analysis;
    FlagBindingResult binding = bind_generated_flags(seq);
    if (!binding.problems.empty())
        throw UnvalidatedError("flag binding failed for " + binding.problems.front().flag);

    struct Sites {
        int setter = 0;
        std::set<int> uses;
    };
    std::map<FlagName, Sites> sites;
    for (const auto& b : binding.bindings) sites[b.flag].setter = b.setter_index;
    for (const auto& stmt : seq.statements)
        for (const auto* leaf : leaves_in_order(stmt.precondition))
            if (sites.count(leaf->flag)) sites[leaf->flag].uses.insert(stmt.index);

    std::map<int, std::string> machine_of;
    for (const auto& stmt : seq.statements) machine_of[stmt.index] = stmt.machine;

    std::set<FlagName> flagged;
    for (const auto& decl : seq.generated_flags) {
        const Sites& s = sites[decl.name];
        if (s.uses.empty()) continue;
        const std::string& setter_machine = machine_of[s.setter];
        bool intra = true;
        for (int use : s.uses)
            if (machine_of[use] != setter_machine || use <= s.setter) intra = false;
        if (intra) {
            analysis.redundant.push_back({decl.name, RedundancyReason::IntraMachineSuperfluous});
            flagged.insert(decl.name);
        }
    }
    for (std::size_t i = 0; i < seq.generated_flags.size(); ++i) {
        const FlagName& name = seq.generated_flags[i].name;
        if (flagged.count(name)) continue;
        const Sites& s = sites[name];
        for (std::size_t j = 0; j < i; ++j) {
            const FlagName& earlier = seq.generated_flags[j].name;
            const Sites& e = sites[earlier];
            if (e.setter == s.setter && e.uses == s.uses && !s.uses.empty()) {
                analysis.redundant.push_back({name, RedundancyReason::DuplicateSemantics});
                flagged.insert(name);
                break;
            }
        }
    }
    return analysis;
}

}  // namespace sitebt
