#include <gtest/gtest.h>

#include <atomic>
#include <map>
#include <random>
#include <thread>

#include "sitebt/flags.hpp"

using namespace sitebt;

namespace {

std::vector<FlagRegistryEntry> two_flag_registry() {
    return {{"SENSING_LOADED_FLG", FlagKind::Default, false, "loaded"},
            {"SENSING_ARRIVAL_FLG", FlagKind::Default, false, "arrival"}};
}

}  // namespace

TEST(FlagName, PatternIsEnforced) {
    EXPECT_TRUE(is_valid_flag_name("SENSING_LOADED_FLG"));
    EXPECT_TRUE(is_valid_flag_name("DUMP_TRUCK_1_AT_LOADING_SITE_FLG"));
    EXPECT_FALSE(is_valid_flag_name(""));
    EXPECT_FALSE(is_valid_flag_name("_FLG"));
    EXPECT_FALSE(is_valid_flag_name("SENSING_LOADED"));
    EXPECT_FALSE(is_valid_flag_name("sensing_loaded_flg"));
    EXPECT_FALSE(is_valid_flag_name("SENSING-LOADED_FLG"));
    EXPECT_FALSE(is_valid_flag_name("1BAD_FLG"));
}

TEST(Blackboard, CreateWithRegistry) {
    GlobalBlackboard bb(two_flag_registry());
    EXPECT_FALSE(bb.get_flag("SENSING_LOADED_FLG"));
    EXPECT_FALSE(bb.get_flag("SENSING_ARRIVAL_FLG"));
    EXPECT_EQ(bb.version(), 0u);
    EXPECT_TRUE(bb.history().empty());
}

TEST(Blackboard, EmptyRegistry) {
    GlobalBlackboard bb;
    EXPECT_EQ(bb.version(), 0u);
    EXPECT_TRUE(bb.snapshot().values.empty());
}

TEST(Blackboard, DuplicateRegistryEntryRejected) {
    auto reg = two_flag_registry();
    reg.push_back({"SENSING_LOADED_FLG", FlagKind::Default, true, "again"});
    EXPECT_THROW(GlobalBlackboard{reg}, DuplicateFlagError);
}

TEST(Blackboard, SetFlagBumpsVersionAndHistory) {
    GlobalBlackboard bb(two_flag_registry());
    EXPECT_EQ(bb.set_flag("SENSING_LOADED_FLG", true, FlagSource::Sensing, 7), 1u);
    ASSERT_EQ(bb.history().size(), 1u);
    const FlagEvent ev = bb.history().front();
    EXPECT_EQ(ev.name, "SENSING_LOADED_FLG");
    EXPECT_FALSE(ev.old_value);
    EXPECT_TRUE(ev.new_value);
    EXPECT_EQ(ev.version, 1u);
    EXPECT_EQ(ev.tick, 7);
    EXPECT_EQ(ev.source, FlagSource::Sensing);
}

TEST(Blackboard, IdempotentWriteIsNoOp) {
    GlobalBlackboard bb(two_flag_registry());
    EXPECT_EQ(bb.set_flag("SENSING_LOADED_FLG", false), 0u);
    EXPECT_EQ(bb.version(), 0u);
    EXPECT_TRUE(bb.history().empty());
}

TEST(Blackboard, UnknownFlagRejected) {
    GlobalBlackboard bb(two_flag_registry());
    EXPECT_THROW(bb.set_flag("UNREGISTERED_FLG", true), UnknownFlagError);
    EXPECT_THROW(bb.get_flag("UNREGISTERED_FLG"), UnknownFlagError);
    EXPECT_THROW(bb.subscribe({"UNREGISTERED_FLG"}), UnknownFlagError);
}

TEST(Blackboard, GetAfterSet) {
    GlobalBlackboard bb(two_flag_registry());
    bb.set_flag("SENSING_ARRIVAL_FLG", true);
    EXPECT_TRUE(bb.get_flag("SENSING_ARRIVAL_FLG"));
}

TEST(Blackboard, SnapshotCountsDistinctChanges) {
    GlobalBlackboard bb(two_flag_registry());
    bb.set_flag("SENSING_LOADED_FLG", true);
    bb.set_flag("SENSING_LOADED_FLG", false);
    bb.set_flag("SENSING_ARRIVAL_FLG", true);
    FlagSnapshot snap = bb.snapshot();
    EXPECT_EQ(snap.version, 3u);
    EXPECT_FALSE(snap.values.at("SENSING_LOADED_FLG"));
    EXPECT_TRUE(snap.values.at("SENSING_ARRIVAL_FLG"));
}

TEST(Blackboard, SubscriptionSeesOnlySubscribedFlags) {
    GlobalBlackboard bb(two_flag_registry());
    auto sub = bb.subscribe({"SENSING_LOADED_FLG"});
    bb.set_flag("SENSING_LOADED_FLG", true);
    bb.set_flag("SENSING_ARRIVAL_FLG", true);
    auto ev = sub->poll();
    ASSERT_TRUE(ev.has_value());
    EXPECT_EQ(ev->name, "SENSING_LOADED_FLG");
    EXPECT_FALSE(sub->poll().has_value());
}

TEST(Blackboard, ReplayReproducesFinalSnapshot) {
    auto reg = two_flag_registry();
    GlobalBlackboard bb(reg);
    std::mt19937 rng(11);
    std::vector<FlagName> names{"SENSING_LOADED_FLG", "SENSING_ARRIVAL_FLG"};
    for (int i = 0; i < 200; ++i)
        bb.set_flag(names[rng() % names.size()], rng() % 2 == 0, FlagSource::External, i);
    FlagSnapshot replayed = replay_history(reg, bb.history());
    EXPECT_EQ(replayed.values, bb.snapshot().values);
    EXPECT_EQ(replayed.version, bb.snapshot().version);
}

TEST(Blackboard, HistoryLengthEqualsValueChangingWrites) {
    GlobalBlackboard bb(two_flag_registry());
    int changing = 0;
    std::mt19937 rng(5);
    std::vector<FlagName> names{"SENSING_LOADED_FLG", "SENSING_ARRIVAL_FLG"};
    for (int i = 0; i < 500; ++i) {
        FlagName n = names[rng() % names.size()];
        bool v = rng() % 2 == 0;
        if (bb.get_flag(n) != v) ++changing;
        bb.set_flag(n, v);
    }
    EXPECT_EQ(bb.history().size(), static_cast<std::size_t>(changing));
}

// Concurrent stress: snapshots must never mix versions, every reader
// observation must match the single-writer timeline reconstructed from the
// history, and subscriptions must observe version order without losses.
TEST(Blackboard, LinearizabilityUnderConcurrentStress) {
    std::vector<FlagRegistryEntry> reg;
    for (int i = 0; i < 6; ++i)
        reg.push_back({"STRESS_" + std::to_string(i) + "_FLG", FlagKind::Default, false, "s"});
    GlobalBlackboard bb(reg);

    constexpr int kWriters = 4;
    constexpr int kReaders = 4;
    constexpr int kWritesEach = 2600;  // > 10k ops total

    auto sub = bb.subscribe({"STRESS_0_FLG"});

    std::vector<std::thread> threads;
    std::vector<std::vector<FlagSnapshot>> observations(kReaders);
    std::atomic<bool> stop{false};

    for (int r = 0; r < kReaders; ++r) {
        threads.emplace_back([&bb, &observations, &stop, r] {
            while (!stop.load(std::memory_order_relaxed))
                observations[static_cast<std::size_t>(r)].push_back(bb.snapshot());
        });
    }
    for (int w = 0; w < kWriters; ++w) {
        threads.emplace_back([&bb, w] {
            std::mt19937 rng(static_cast<unsigned>(w) + 1);
            for (int i = 0; i < kWritesEach; ++i)
                bb.set_flag("STRESS_" + std::to_string(rng() % 6) + "_FLG", rng() % 2 == 0,
                            FlagSource::External, i);
        });
    }
    for (int w = 0; w < kWriters; ++w) threads[static_cast<std::size_t>(kReaders + w)].join();
    stop.store(true);
    for (int r = 0; r < kReaders; ++r) threads[static_cast<std::size_t>(r)].join();

    // Reconstruct the state after every version from the history.
    std::vector<FlagEvent> history = bb.history();
    std::map<FlagName, bool> state;
    for (const auto& e : reg) state[e.name] = e.initial;
    std::vector<std::map<FlagName, bool>> timeline{state};
    for (std::size_t i = 0; i < history.size(); ++i) {
        EXPECT_EQ(history[i].version, i + 1) << "history versions must be dense";
        EXPECT_NE(history[i].old_value, history[i].new_value);
        state[history[i].name] = history[i].new_value;
        timeline.push_back(state);
    }

    long checked = 0;
    for (const auto& obs : observations) {
        for (const auto& snap : obs) {
            ASSERT_LT(snap.version, timeline.size());
            EXPECT_EQ(snap.values, timeline[snap.version])
                << "snapshot at version " << snap.version << " mixes states";
            ++checked;
        }
    }
    EXPECT_GT(checked, 0);

    // Replay determinism on the full history.
    FlagSnapshot replayed = replay_history(reg, history);
    EXPECT_EQ(replayed.values, bb.snapshot().values);

    // Subscription order: strictly increasing versions, no gaps for the flag.
    std::uint64_t last = 0;
    std::size_t seen = 0;
    for (const auto& ev : sub->drain()) {
        EXPECT_GT(ev.version, last);
        last = ev.version;
        ++seen;
    }
    std::size_t expected = 0;
    for (const auto& ev : history)
        if (ev.name == "STRESS_0_FLG") ++expected;
    EXPECT_EQ(seen, expected);
}

TEST(FlagRegistry, JsonRoundTrip) {
    auto reg = two_flag_registry();
    reg.push_back({"EXCAVATOR_INITIAL_POSE_FLG", FlagKind::Generated, false,
                   "True when the excavator is in its initial pose; False otherwise."});
    auto parsed = registry_from_json(registry_to_json(reg));
    ASSERT_EQ(parsed.size(), reg.size());
    for (std::size_t i = 0; i < reg.size(); ++i) {
        EXPECT_EQ(parsed[i].name, reg[i].name);
        EXPECT_EQ(parsed[i].kind, reg[i].kind);
        EXPECT_EQ(parsed[i].initial, reg[i].initial);
        EXPECT_EQ(parsed[i].description, reg[i].description);
    }
}

TEST(FlagHistory, JsonLinesExport) {
    GlobalBlackboard bb(two_flag_registry());
    bb.set_flag("SENSING_LOADED_FLG", true, FlagSource::Sensing, 3);
    std::string lines = history_to_json_lines(bb.history());
    EXPECT_NE(lines.find("\"SENSING_LOADED_FLG\""), std::string::npos);
    EXPECT_NE(lines.find("\"sensing\""), std::string::npos);
    EXPECT_EQ(std::count(lines.begin(), lines.end(), '\n'), 1);
}
