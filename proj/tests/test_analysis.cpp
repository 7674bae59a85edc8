#include <gtest/gtest.h>

#include "sitebt/analysis.hpp"
#include "sitebt/io_util.hpp"

using namespace sitebt;

namespace {

std::string golden_path() { return std::string(SITEBT_DATA_DIR) + "/golden/load_soil.aseq"; }

std::map<std::string, MachineKind> demo_machines() {
    return {{"excavator", MachineKind::Excavator}, {"dump_truck", MachineKind::DumpTruck}};
}

std::set<std::string> demo_places() {
    return {"mound", "loading_site", "dumping_site", "excavator_home", "truck_home"};
}

std::vector<FlagRegistryEntry> demo_registry() {
    return {{"SENSING_LOADED_FLG", FlagKind::Default, false, "loaded"},
            {"SENSING_ARRIVAL_FLG", FlagKind::Default, false, "arrival"}};
}

}  // namespace

TEST(Validate, GoldenExampleIsClean) {
    ActionSequence seq = parse(read_text_file(golden_path()));
    ValidationReport report = validate(seq, demo_machines(), demo_places(), demo_registry());
    EXPECT_TRUE(report.ok()) << validation_report_to_json(report).dump(2);
    EXPECT_TRUE(report.warnings.empty());
}

TEST(Validate, SkillKindMismatch) {
    ActionSequence seq = parse("1. dump_soil(excavator)");
    ValidationReport report = validate(seq, demo_machines(), demo_places(), demo_registry());
    ASSERT_FALSE(report.ok());
    EXPECT_EQ(report.errors[0].code, "SkillKindMismatch");
}

TEST(Validate, UndeclaredFlag) {
    ActionSequence seq =
        parse("1. move(dump_truck, loading_site) depends_on NEVER_DECLARED_FLG==true");
    ValidationReport report = validate(seq, demo_machines(), demo_places(), demo_registry());
    ASSERT_FALSE(report.ok());
    EXPECT_EQ(report.errors[0].code, "UndeclaredFlag");
}

TEST(Validate, UnknownMachineAndPlace) {
    ActionSequence seq = parse("1. move(bulldozer, nowhere)");
    ValidationReport report = validate(seq, demo_machines(), demo_places(), demo_registry());
    ASSERT_EQ(report.errors.size(), 2u);
    EXPECT_EQ(report.errors[0].code, "UnknownMachine");
    EXPECT_EQ(report.errors[1].code, "UnknownPlace");
}

TEST(Validate, DuplicateFlagDeclaration) {
    ActionSequence seq = parse(
        "1. initial_pose(excavator)\n\n"
        "EXCAVATOR_INITIAL_POSE_FLG: True when in initial pose.\n"
        "EXCAVATOR_INITIAL_POSE_FLG: duplicated.\n");
    ValidationReport report = validate(seq, demo_machines(), demo_places(), demo_registry());
    ASSERT_FALSE(report.ok());
    EXPECT_EQ(report.errors[0].code, "DuplicateFlagDecl");
}

// Soundness against the skill table: every skill called on a machine kind
// outside its table row is rejected.
TEST(Validate, SkillTableSoundness) {
    for (const auto& [name, sig] : default_skills()) {
        for (MachineKind kind : {MachineKind::Excavator, MachineKind::DumpTruck}) {
            std::string machine = kind == MachineKind::Excavator ? "excavator" : "dump_truck";
            ActionSequence seq;
            ActionStatement stmt;
            stmt.index = 1;
            stmt.skill = name;
            stmt.machine = machine;
            for (int i = 1; i < sig.arity(); ++i) stmt.params.push_back("mound");
            seq.statements.push_back(stmt);
            ValidationReport report =
                validate(seq, demo_machines(), demo_places(), demo_registry());
            bool kind_ok = sig.machine_kinds.count(kind) > 0;
            bool mismatch_reported = false;
            for (const auto& e : report.errors)
                if (e.code == "SkillKindMismatch") mismatch_reported = true;
            EXPECT_EQ(mismatch_reported, !kind_ok) << name << " on " << machine;
        }
    }
}

TEST(Validate, MachineAsReleasePlaceIsAccepted) {
    ActionSequence seq = parse("1. excavate_and_release(excavator, mound, dump_truck)");
    ValidationReport report = validate(seq, demo_machines(), demo_places(), demo_registry());
    EXPECT_TRUE(report.ok());
}

TEST(Validate, UnboundFlagIsAnErrorAndWaitingOnItWarns) {
    // GHOST_FLG is declared but its name and description match no statement:
    // the sequence cannot compile (error) and statement 1 waits forever
    // (warning).
    ActionSequence seq = parse(
        "1. move(dump_truck, loading_site) depends_on GHOST_FLG==true\n\n"
        "GHOST_FLG: True when the stars align; False otherwise.\n");
    ValidationReport report = validate(seq, demo_machines(), demo_places(), demo_registry());
    ASSERT_FALSE(report.ok());
    EXPECT_EQ(report.errors[0].code, "UnboundFlag");
    ASSERT_FALSE(report.warnings.empty());
    EXPECT_EQ(report.warnings[0].code, "UnsettableFlag");
}

TEST(Binding, GoldenExampleSetters) {
    ActionSequence seq = parse(read_text_file(golden_path()));
    FlagBindingResult binding = bind_generated_flags(seq);
    EXPECT_TRUE(binding.problems.empty());
    EXPECT_EQ(binding.setter_of("EXCAVATOR_INITIAL_POSE_FLG"), std::optional<int>(1));
    EXPECT_EQ(binding.setter_of("DUMPTRUCK_AT_LOADING_SITE_FLG"), std::optional<int>(2));
}

TEST(Binding, RepeatedSkillResolvedByFirstUse) {
    // Two initial_pose statements; the reset flag must bind to the latest one
    // preceding its first use.
    ActionSequence seq = parse(
        "1. initial_pose(excavator)\n"
        "2. move(dump_truck, loading_site) depends_on EXCAVATOR_INITIAL_POSE_FLG==true\n"
        "3. excavate_and_release(excavator, mound, dump_truck)\n"
        "4. initial_pose(excavator)\n"
        "5. move(dump_truck, dumping_site) depends_on EXCAVATOR_RESET_FLG==true\n"
        "\n"
        "EXCAVATOR_INITIAL_POSE_FLG: True when the excavator is in its initial pose; False "
        "otherwise.\n"
        "EXCAVATOR_RESET_FLG: True when the excavator has returned to its initial pose after "
        "loading; False otherwise.\n");
    FlagBindingResult binding = bind_generated_flags(seq);
    ASSERT_TRUE(binding.problems.empty()) << binding.problems.front().message;
    EXPECT_EQ(binding.setter_of("EXCAVATOR_INITIAL_POSE_FLG"), std::optional<int>(1));
    EXPECT_EQ(binding.setter_of("EXCAVATOR_RESET_FLG"), std::optional<int>(4));
}

TEST(Binding, UnusedFlagWithTwinSettersIsAmbiguous) {
    ActionSequence seq = parse(
        "1. move(dump_truck, loading_site)\n"
        "2. dump_soil(dump_truck)\n"
        "3. move(dump_truck, loading_site)\n"
        "\n"
        "DUMP_TRUCK_AT_LOADING_SITE_FLG: True when the dump truck is at the loading site; "
        "False otherwise.\n");
    FlagBindingResult binding = bind_generated_flags(seq);
    ASSERT_EQ(binding.problems.size(), 1u);
    EXPECT_EQ(binding.problems[0].code, "AmbiguousFlagBinding");
}

TEST(Binding, NoMatchIsUnbound) {
    ActionSequence seq = parse(
        "1. initial_pose(excavator)\n\n"
        "BULLDOZER_READY_FLG: True when the bulldozer is ready.\n");
    FlagBindingResult binding = bind_generated_flags(seq);
    ASSERT_EQ(binding.problems.size(), 1u);
    EXPECT_EQ(binding.problems[0].code, "UnboundFlag");
}

TEST(AnalyzeFlags, GoldenExampleHasNoRedundancy) {
    ActionSequence seq = parse(read_text_file(golden_path()));
    FlagAnalysis analysis = analyze_flags(seq);
    EXPECT_EQ(analysis.nrf(), 0);
}

TEST(AnalyzeFlags, DuplicateSemanticsDetected) {
    // EXCAVATOR_READY_FLG has the same setter (statement 1) and the same
    // consumer (statement 2) as EXCAVATOR_INITIAL_POSE_FLG.
    ActionSequence seq = parse(
        "1. initial_pose(excavator)\n"
        "2. move(dump_truck, loading_site) depends_on EXCAVATOR_INITIAL_POSE_FLG==true and "
        "EXCAVATOR_READY_FLG==true\n"
        "3. excavate_and_release(excavator, mound, dump_truck) depends_on "
        "SENSING_ARRIVAL_FLG==true\n"
        "\n"
        "EXCAVATOR_INITIAL_POSE_FLG: True when the excavator is in its initial pose; False "
        "otherwise.\n"
        "EXCAVATOR_READY_FLG: True when the excavator is in its initial pose; False "
        "otherwise.\n");
    FlagAnalysis analysis = analyze_flags(seq);
    ASSERT_EQ(analysis.nrf(), 1);
    EXPECT_EQ(analysis.redundant[0].name, "EXCAVATOR_READY_FLG");
    EXPECT_EQ(analysis.redundant[0].reason, RedundancyReason::DuplicateSemantics);
}

TEST(AnalyzeFlags, IntraMachineSuperfluousDetected) {
    // The truck's own move already precedes its dump; the flag adds nothing.
    ActionSequence seq = parse(
        "1. move(dump_truck, dumping_site)\n"
        "2. dump_soil(dump_truck) depends_on DUMP_TRUCK_AT_DUMPING_SITE_FLG==true\n"
        "\n"
        "DUMP_TRUCK_AT_DUMPING_SITE_FLG: True when the dump truck is at the dumping site; "
        "False otherwise.\n");
    FlagAnalysis analysis = analyze_flags(seq);
    ASSERT_EQ(analysis.nrf(), 1);
    EXPECT_EQ(analysis.redundant[0].reason, RedundancyReason::IntraMachineSuperfluous);
}

TEST(AnalyzeFlags, CrossMachineUseIsNotRedundant) {
    ActionSequence seq = parse(
        "1. move(dump_truck, dumping_site)\n"
        "2. excavate_and_release(excavator, mound, temporary_site) depends_on "
        "DUMP_TRUCK_AT_DUMPING_SITE_FLG==true\n"
        "\n"
        "DUMP_TRUCK_AT_DUMPING_SITE_FLG: True when the dump truck is at the dumping site; "
        "False otherwise.\n");
    EXPECT_EQ(analyze_flags(seq).nrf(), 0);
}

TEST(AnalyzeFlags, JsonShape) {
    ActionSequence seq = parse(read_text_file(golden_path()));
    nlohmann::json j = flag_analysis_to_json(analyze_flags(seq));
    EXPECT_EQ(j.at("nrf").get<int>(), 0);
    EXPECT_TRUE(j.at("redundant").is_array());
}

TEST(ValidationReport, JsonShape) {
    ActionSequence seq = parse("1. dump_soil(excavator)");
    nlohmann::json j =
        validation_report_to_json(validate(seq, demo_machines(), demo_places(), demo_registry()));
    ASSERT_TRUE(j.at("errors").is_array());
    ASSERT_FALSE(j.at("errors").empty());
    EXPECT_EQ(j.at("errors")[0].at("code").get<std::string>(), "SkillKindMismatch");
    EXPECT_TRUE(j.at("warnings").is_array());
}
