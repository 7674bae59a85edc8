#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sitebt/scenario.hpp"
#include "sitebt/sim.hpp"

namespace sitebt {

struct ScenarioResult {
    int id = 0;
    ScenarioCategory category = ScenarioCategory::Single;
    bool success = false;
    std::string failure;  // empty on success
    int nn = 0;
    int nrf = 0;
    long tu = 0;
    double gt = 0.0;
    long ticks_used = 0;
    double wall_seconds = 0.0;
};

struct CategoryAggregate {
    int scenarios = 0;
    int successes = 0;
    double sr = 0.0;
    double mean_nn = 0.0;   // over successful generations only
    double mean_nrf = 0.0;
    long total_tu = 0;
    double total_gt = 0.0;
    bool low_sr = false;    // SR too low for NN to be meaningful
};

struct EvalReport {
    std::vector<ScenarioResult> results;
    std::map<std::string, CategoryAggregate> by_category;  // "single" / "coordinated"
};

inline CategoryAggregate aggregate(const std::vector<ScenarioResult>& results,
                                   ScenarioCategory category) {
    CategoryAggregate agg;
    double nn_sum = 0.0;
    int nn_count = 0;
    double nrf_sum = 0.0;
    int attempted = 0;
    for (const auto& r : results) {
        if (r.category != category) continue;
        ++agg.scenarios;
        ++attempted;
        if (r.success) ++agg.successes;
        if (r.nn > 0) {  // generation succeeded
            nn_sum += r.nn;
            ++nn_count;
        }
        nrf_sum += r.nrf;
        agg.total_tu += r.tu;
        agg.total_gt += r.gt;
    }
    agg.sr = agg.scenarios ? static_cast<double>(agg.successes) / agg.scenarios : 0.0;
    agg.mean_nn = nn_count ? nn_sum / nn_count : 0.0;
    agg.mean_nrf = attempted ? nrf_sum / attempted : 0.0;
    agg.low_sr = agg.scenarios > 0 && agg.sr < 0.5;
    return agg;
}

inline EvalReport make_eval_report(std::vector<ScenarioResult> results) {
    EvalReport report;
    report.results = std::move(results);
    report.by_category["single"] = aggregate(report.results, ScenarioCategory::Single);
    report.by_category["coordinated"] =
        aggregate(report.results, ScenarioCategory::Coordinated);
    return report;
}

inline nlohmann::json eval_report_to_json(const EvalReport& report) {
    nlohmann::json results = nlohmann::json::array();
    for (const auto& r : report.results)
        results.push_back({{"id", r.id},
                           {"category", to_string(r.category)},
                           {"success", r.success},
                           {"failure", r.failure},
                           {"nn", r.nn},
                           {"nrf", r.nrf},
                           {"tu", r.tu},
                           {"gt", r.gt},
                           {"ticks_used", r.ticks_used},
                           {"wall_seconds", r.wall_seconds}});
    nlohmann::json categories = nlohmann::json::object();
    for (const auto& [name, agg] : report.by_category)
        categories[name] = {{"scenarios", agg.scenarios}, {"successes", agg.successes},
                            {"sr", agg.sr},               {"mean_nn", agg.mean_nn},
                            {"mean_nrf", agg.mean_nrf},   {"total_tu", agg.total_tu},
                            {"total_gt", agg.total_gt},   {"low_sr", agg.low_sr}};
    return {{"results", results}, {"categories", categories}};
}

/// Table in the shape used for reporting: SR / NRF / NN / TU / GT per
/// category. NN is parenthesized when the success rate is too low for the
/// value to mean much.
inline std::string eval_report_table(const EvalReport& report) {
    char buf[256];
    std::string out =
        "category     scenarios  SR     NRF    NN        TU        GT(s)\n";
    for (const char* name : {"single", "coordinated"}) {
        auto it = report.by_category.find(name);
        if (it == report.by_category.end()) continue;
        const CategoryAggregate& a = it->second;
        std::string nn = a.low_sr ? "(" + std::to_string(a.mean_nn).substr(0, 5) + ")"
                                  : std::to_string(a.mean_nn).substr(0, 6);
        std::snprintf(buf, sizeof(buf), "%-12s %-10d %-6.2f %-6.2f %-9s %-9ld %.2f\n", name,
                      a.scenarios, a.sr, a.mean_nrf, nn.c_str(), a.total_tu, a.total_gt);
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Minimal JSON schema checking (type / required / properties / items subset),
// enough to pin the report format.
// ---------------------------------------------------------------------------

inline bool json_matches_type(const nlohmann::json& value, const std::string& type) {
    if (type == "object") return value.is_object();
    if (type == "array") return value.is_array();
    if (type == "string") return value.is_string();
    if (type == "number") return value.is_number();
    if (type == "integer") return value.is_number_integer();
    if (type == "boolean") return value.is_boolean();
    if (type == "null") return value.is_null();
    return false;
}

inline void validate_against_schema(const nlohmann::json& value, const nlohmann::json& schema,
                                    const std::string& path, std::vector<std::string>& errors) {
    if (schema.contains("type") &&
        !json_matches_type(value, schema.at("type").get<std::string>()))
        errors.push_back(path + ": expected " + schema.at("type").get<std::string>());
    if (schema.contains("required") && value.is_object()) {
        for (const auto& key : schema.at("required"))
            if (!value.contains(key.get<std::string>()))
                errors.push_back(path + ": missing required key " + key.get<std::string>());
    }
    if (schema.contains("properties") && value.is_object()) {
        for (const auto& [key, sub] : schema.at("properties").items())
            if (value.contains(key))
                validate_against_schema(value.at(key), sub, path + "/" + key, errors);
    }
    if (schema.contains("items") && value.is_array()) {
        int i = 0;
        for (const auto& item : value)
            validate_against_schema(item, schema.at("items"), path + "/" + std::to_string(i++),
                                    errors);
    }
    if (schema.contains("additionalProperties") && value.is_object() &&
        schema.at("additionalProperties").is_object()) {
        const auto& sub = schema.at("additionalProperties");
        for (const auto& [key, item] : value.items()) {
            if (schema.contains("properties") && schema.at("properties").contains(key)) continue;
            validate_against_schema(item, sub, path + "/" + key, errors);
        }
    }
}

inline std::vector<std::string> schema_errors(const nlohmann::json& value,
                                              const nlohmann::json& schema) {
    std::vector<std::string> errors;
    validate_against_schema(value, schema, "$", errors);
    return errors;
}

}  // namespace sitebt
