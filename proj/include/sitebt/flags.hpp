#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sitebt/errors.hpp"

namespace sitebt {

using FlagName = std::string;

/// Valid flag names are non-empty, use uppercase letters / digits / underscores,
/// start with a letter and end with "_FLG".
inline bool is_valid_flag_name(const FlagName& name) {
    static const std::string suffix = "_FLG";
    if (name.size() <= suffix.size()) return false;
    if (name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) return false;
    if (!(name.front() >= 'A' && name.front() <= 'Z')) return false;
    for (char c : name) {
        const bool ok = (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
        if (!ok) return false;
    }
    return true;
}

enum class FlagKind { Default, Generated };

enum class FlagSource { Sensing, Action, External };

inline const char* to_string(FlagSource s) {
    switch (s) {
        case FlagSource::Sensing: return "sensing";
        case FlagSource::Action: return "action";
        default: return "external";
    }
}

inline FlagSource flag_source_from_string(const std::string& s) {
    if (s == "sensing") return FlagSource::Sensing;
    if (s == "action") return FlagSource::Action;
    return FlagSource::External;
}

struct FlagRegistryEntry {
    FlagName name;
    FlagKind kind = FlagKind::Default;
    bool initial = false;
    std::string description;
};

/// One value-changing write. `version` is the blackboard version after the write.
struct FlagEvent {
    FlagName name;
    bool old_value = false;
    bool new_value = false;
    std::uint64_t version = 0;
    long tick = 0;
    FlagSource source = FlagSource::External;
};

inline bool operator==(const FlagEvent& a, const FlagEvent& b) {
    return a.name == b.name && a.old_value == b.old_value && a.new_value == b.new_value &&
           a.version == b.version && a.tick == b.tick && a.source == b.source;
}

struct FlagSnapshot {
    std::map<FlagName, bool> values;
    std::uint64_t version = 0;
};

class GlobalBlackboard;

/// Single-consumer change feed over a set of flags. Events arrive in version
/// order; the handle buffers them until polled. Detaches on destruction.
class Subscription {
public:
    ~Subscription() = default;

    std::optional<FlagEvent> poll() {
        std::lock_guard<std::mutex> lock(state_->mutex);
        if (state_->queue.empty()) return std::nullopt;
        FlagEvent ev = state_->queue.front();
        state_->queue.pop_front();
        return ev;
    }

    std::vector<FlagEvent> drain() {
        std::lock_guard<std::mutex> lock(state_->mutex);
        std::vector<FlagEvent> out(state_->queue.begin(), state_->queue.end());
        state_->queue.clear();
        return out;
    }

private:
    friend class GlobalBlackboard;

    struct State {
        std::mutex mutex;
        std::set<FlagName> names;
        std::deque<FlagEvent> queue;
    };

    explicit Subscription(std::shared_ptr<State> state) : state_(std::move(state)) {}

    std::shared_ptr<State> state_;
};

/// Shared flag store through which all machine trees exchange execution state.
/// Values are strictly boolean. Every value-changing write bumps the version by
/// one and appends a FlagEvent to the history; writes of the current value are
/// no-ops. All operations are atomic and linearizable (one internal lock).
class GlobalBlackboard {
public:
    explicit GlobalBlackboard(const std::vector<FlagRegistryEntry>& registry = {}) {
        for (const auto& entry : registry) {
            if (!is_valid_flag_name(entry.name)) throw BadFlagNameError(entry.name);
            if (registry_.count(entry.name)) throw DuplicateFlagError(entry.name);
            if (entry.kind == FlagKind::Generated && entry.description.empty())
                throw Error("generated flag " + entry.name + " needs a description");
            registry_[entry.name] = entry;
            values_[entry.name] = entry.initial;
        }
    }

    GlobalBlackboard(const GlobalBlackboard&) = delete;
    GlobalBlackboard& operator=(const GlobalBlackboard&) = delete;

    bool has_flag(const FlagName& name) const {
        std::lock_guard<std::mutex> lock(mutex_);
        return values_.count(name) != 0;
    }

    /// Registers an extra flag after construction (generated flags from a plan).
    void register_flag(const FlagRegistryEntry& entry) {
        std::lock_guard<std::mutex> lock(mutex_);
        if (!is_valid_flag_name(entry.name)) throw BadFlagNameError(entry.name);
        if (values_.count(entry.name)) throw DuplicateFlagError(entry.name);
        if (entry.kind == FlagKind::Generated && entry.description.empty())
            throw Error("generated flag " + entry.name + " needs a description");
        registry_[entry.name] = entry;
        values_[entry.name] = entry.initial;
    }

    std::uint64_t set_flag(const FlagName& name, bool value,
                           FlagSource source = FlagSource::External, long tick = 0) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = values_.find(name);
        if (it == values_.end()) throw UnknownFlagError(name);
        if (it->second == value) return version_;  // idempotent write, no event
        FlagEvent ev;
        ev.name = name;
        ev.old_value = it->second;
        ev.new_value = value;
        ev.version = ++version_;
        ev.tick = tick;
        ev.source = source;
        it->second = value;
        history_.push_back(ev);
        dispatch_locked(ev);
        return version_;
    }

    bool get_flag(const FlagName& name) const {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = values_.find(name);
        if (it == values_.end()) throw UnknownFlagError(name);
        return it->second;
    }

    /// Consistent point-in-time copy: all values belong to one version.
    FlagSnapshot snapshot() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return FlagSnapshot{values_, version_};
    }

    std::uint64_t version() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return version_;
    }

    std::vector<FlagEvent> history() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return history_;
    }

    std::vector<FlagRegistryEntry> registry() const {
        std::lock_guard<std::mutex> lock(mutex_);
        std::vector<FlagRegistryEntry> out;
        out.reserve(registry_.size());
        for (const auto& [name, entry] : registry_) out.push_back(entry);
        return out;
    }

    std::shared_ptr<Subscription> subscribe(const std::set<FlagName>& names) {
        std::lock_guard<std::mutex> lock(mutex_);
        for (const auto& n : names)
            if (!values_.count(n)) throw UnknownFlagError(n);
        auto state = std::make_shared<Subscription::State>();
        state->names = names;
        subscribers_.push_back(state);
        return std::shared_ptr<Subscription>(new Subscription(state));
    }

private:
    void dispatch_locked(const FlagEvent& ev) {
        for (auto it = subscribers_.begin(); it != subscribers_.end();) {
            auto sub = it->lock();
            if (!sub) {
                it = subscribers_.erase(it);
                continue;
            }
            if (sub->names.count(ev.name)) {
                std::lock_guard<std::mutex> sub_lock(sub->mutex);
                sub->queue.push_back(ev);
            }
            ++it;
        }
    }

    mutable std::mutex mutex_;
    std::map<FlagName, bool> values_;
    std::map<FlagName, FlagRegistryEntry> registry_;
    std::uint64_t version_ = 0;
    std::vector<FlagEvent> history_;
    std::vector<std::weak_ptr<Subscription::State>> subscribers_;
};

inline std::unique_ptr<GlobalBlackboard> create_blackboard(
    const std::vector<FlagRegistryEntry>& registry) {
    return std::make_unique<GlobalBlackboard>(registry);
}

/// Replays a history onto a fresh board with the given registry. Used by the
/// determinism checks: replay(history) must reproduce the final snapshot.
inline FlagSnapshot replay_history(const std::vector<FlagRegistryEntry>& registry,
                                   const std::vector<FlagEvent>& history) {
    GlobalBlackboard board(registry);
    for (const auto& ev : history) board.set_flag(ev.name, ev.new_value, ev.source, ev.tick);
    return board.snapshot();
}

// ---- JSON registry file + history export ----

inline nlohmann::json registry_to_json(const std::vector<FlagRegistryEntry>& registry) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : registry) {
        arr.push_back({{"name", e.name},
                       {"kind", e.kind == FlagKind::Default ? "default" : "generated"},
                       {"initial", e.initial},
                       {"description", e.description}});
    }
    return arr;
}

inline std::vector<FlagRegistryEntry> registry_from_json(const nlohmann::json& arr) {
    std::vector<FlagRegistryEntry> out;
    for (const auto& item : arr) {
        FlagRegistryEntry e;
        e.name = item.at("name").get<std::string>();
        e.kind = item.value("kind", "default") == "generated" ? FlagKind::Generated
                                                              : FlagKind::Default;
        e.initial = item.value("initial", false);
        e.description = item.value("description", "");
        out.push_back(std::move(e));
    }
    return out;
}

inline nlohmann::json flag_event_to_json(const FlagEvent& ev) {
    return {{"name", ev.name},     {"old", ev.old_value}, {"new", ev.new_value},
            {"version", ev.version}, {"tick", ev.tick},     {"source", to_string(ev.source)}};
}

/// One FlagEvent per line.
inline std::string history_to_json_lines(const std::vector<FlagEvent>& history) {
    std::string out;
    for (const auto& ev : history) {
        out += flag_event_to_json(ev).dump();
        out += '\n';
    }
    return out;
}

}  // namespace sitebt
