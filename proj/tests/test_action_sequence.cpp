#include <gtest/gtest.h>

#include <random>

#include "sitebt/action_sequence.hpp"
#include "sitebt/io_util.hpp"

using namespace sitebt;

namespace {

std::string golden_path() { return std::string(SITEBT_DATA_DIR) + "/golden/load_soil.aseq"; }

}  // namespace

TEST(Parse, GoldenLoadSoilExample) {
    ActionSequence seq = parse(read_text_file(golden_path()));

    ASSERT_EQ(seq.statements.size(), 3u);
    EXPECT_EQ(seq.statements[0].skill, "initial_pose");
    EXPECT_EQ(seq.statements[0].machine, "excavator");
    EXPECT_TRUE(seq.statements[0].precondition.is_always_true());
    EXPECT_EQ(seq.statements[0].reasoning, "Return excavator to initial pose.");

    EXPECT_EQ(seq.statements[1].skill, "move");
    EXPECT_EQ(seq.statements[1].machine, "dump_truck");
    ASSERT_EQ(seq.statements[1].params.size(), 1u);
    EXPECT_EQ(seq.statements[1].params[0], "loading_site");
    ASSERT_EQ(seq.statements[1].precondition.kind, FlagExpr::Kind::Leaf);
    EXPECT_EQ(seq.statements[1].precondition.flag, "EXCAVATOR_INITIAL_POSE_FLG");
    EXPECT_TRUE(seq.statements[1].precondition.expected);

    EXPECT_EQ(seq.statements[2].skill, "excavate_and_release");
    ASSERT_EQ(seq.statements[2].params.size(), 2u);
    EXPECT_EQ(seq.statements[2].params[0], "mound");
    EXPECT_EQ(seq.statements[2].params[1], "dump_truck");
    const FlagExpr& pre = seq.statements[2].precondition;
    ASSERT_EQ(pre.kind, FlagExpr::Kind::And);
    ASSERT_EQ(pre.children.size(), 2u);
    EXPECT_EQ(pre.children[0].flag, "DUMPTRUCK_AT_LOADING_SITE_FLG");
    EXPECT_EQ(pre.children[1].flag, "SENSING_ARRIVAL_FLG");

    ASSERT_EQ(seq.generated_flags.size(), 2u);
    EXPECT_EQ(seq.generated_flags[0].name, "EXCAVATOR_INITIAL_POSE_FLG");
    EXPECT_EQ(seq.generated_flags[1].name, "DUMPTRUCK_AT_LOADING_SITE_FLG");
    EXPECT_FALSE(seq.generated_flags[0].description.empty());
}

TEST(Parse, SingleStatementDefaults) {
    ActionSequence seq = parse("1. initial_pose(excavator)");
    ASSERT_EQ(seq.statements.size(), 1u);
    EXPECT_TRUE(seq.statements[0].precondition.is_always_true());
    EXPECT_TRUE(seq.statements[0].reasoning.empty());
    EXPECT_TRUE(seq.generated_flags.empty());
}

TEST(Parse, UnknownSkillCarriesLine) {
    try {
        parse("1. fly(excavator)");
        FAIL() << "expected UnknownSkillError";
    } catch (const UnknownSkillError& e) {
        EXPECT_EQ(e.skill(), "fly");
        EXPECT_EQ(e.line(), 1);
    }
}

TEST(Parse, BadArity) {
    try {
        parse("1. move(dump_truck)");
        FAIL() << "expected BadArityError";
    } catch (const BadArityError& e) {
        EXPECT_EQ(e.skill(), "move");
        EXPECT_EQ(e.got(), 1);
        EXPECT_EQ(e.want(), 2);
    }
}

TEST(Parse, SyntaxErrorsCarryLocation) {
    try {
        parse("1. move(dump_truck, loading_site) depends_on NOT_A_FLAG==yes");
        FAIL() << "expected SyntaxError";
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.line(), 1);
        EXPECT_GT(e.column(), 1);
    }
    EXPECT_THROW(parse("move(dump_truck, loading_site)"), SyntaxError);
    EXPECT_THROW(parse("1. move dump_truck"), SyntaxError);
    EXPECT_THROW(parse("1. move(dump_truck loading_site)"), SyntaxError);
    EXPECT_THROW(parse("2. initial_pose(excavator)"), SyntaxError);  // indices start at 1
    EXPECT_THROW(parse("1. initial_pose(excavator)\n3. initial_pose(excavator)"), SyntaxError);
    EXPECT_THROW(parse("not_a_flag: description"), SyntaxError);
}

TEST(Parse, DeclarationsAfterStatements) {
    ActionSequence seq = parse(
        "1. move(dump_truck, loading_site) depends_on A_FLG==true\n"
        "\n"
        "A_FLG: True after something happened; False otherwise.\n");
    ASSERT_EQ(seq.generated_flags.size(), 1u);
    EXPECT_EQ(seq.generated_flags[0].name, "A_FLG");
    EXPECT_EQ(seq.generated_flags[0].description,
              "True after something happened; False otherwise.");
}

TEST(Serialize, EmptySequence) { EXPECT_EQ(serialize(ActionSequence{}), ""); }

TEST(Serialize, OrKeywordAppearsExactlyOnce) {
    ActionSequence seq = parse(
        "1. move(dump_truck, loading_site) depends_on A_FLG==true or B_FLG==true\n\n"
        "A_FLG: a.\nB_FLG: b.\n");
    std::string text = serialize(seq);
    std::size_t first = text.find(" or ");
    ASSERT_NE(first, std::string::npos);
    EXPECT_EQ(text.find(" or ", first + 1), std::string::npos);
}

TEST(Serialize, GoldenRoundTrip) {
    ActionSequence seq = parse(read_text_file(golden_path()));
    ActionSequence again = parse(serialize(seq));
    EXPECT_EQ(seq, again);
}

// Round-trip property over generated sequences: parse(serialize(s)) == s,
// reasoning comments included.
TEST(Serialize, RandomizedRoundTrip) {
    std::mt19937 rng(321);
    const std::vector<std::string> skills{"move", "initial_pose", "dump_soil"};
    for (int trial = 0; trial < 100; ++trial) {
        ActionSequence seq;
        int n = 1 + static_cast<int>(rng() % 5);
        for (int i = 1; i <= n; ++i) {
            ActionStatement stmt;
            stmt.index = i;
            switch (rng() % 3) {
                case 0:
                    stmt.skill = "move";
                    stmt.machine = "dump_truck";
                    stmt.params = {"loading_site"};
                    break;
                case 1:
                    stmt.skill = "initial_pose";
                    stmt.machine = "excavator";
                    break;
                default:
                    stmt.skill = "dump_soil";
                    stmt.machine = "dump_truck";
                    break;
            }
            if (rng() % 2) {
                std::vector<FlagExpr> leaves;
                int k = 1 + static_cast<int>(rng() % 3);
                for (int j = 0; j < k; ++j)
                    leaves.push_back(
                        FlagExpr::leaf("GATE_" + std::to_string(j) + "_FLG", rng() % 2 == 0));
                stmt.precondition =
                    rng() % 2 ? FlagExpr::all_of(leaves) : FlagExpr::any_of(leaves);
            }
            if (rng() % 2) stmt.reasoning = "step " + std::to_string(i);
            seq.statements.push_back(std::move(stmt));
        }
        for (int j = 0; j < 3; ++j)
            seq.generated_flags.push_back(
                {"GATE_" + std::to_string(j) + "_FLG", "True sometimes; False otherwise."});
        ActionSequence again = parse(serialize(seq));
        EXPECT_EQ(seq, again) << serialize(seq);
    }
}

// Parser totality: arbitrary junk either parses or throws a located error.
TEST(Parse, TotalityOnNoise) {
    std::mt19937 rng(99);
    const std::string alphabet = "abcXYZ_01().,#=+ \t\n";
    for (int trial = 0; trial < 500; ++trial) {
        std::string junk;
        int len = static_cast<int>(rng() % 80);
        for (int i = 0; i < len; ++i) junk.push_back(alphabet[rng() % alphabet.size()]);
        try {
            parse(junk);
        } catch (const Error&) {
            // located failure is acceptable; crashes are not
        }
    }
    SUCCEED();
}
