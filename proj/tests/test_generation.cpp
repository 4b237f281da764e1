#include <doctest.h>

#include <nlohmann/json.hpp>

#include "distrace/errors.hpp"
#include "distrace/generation.hpp"
#include "support/test_util.hpp"

using namespace distrace;
using nlohmann::json;

namespace {

McqProblem problem(const std::string& id, const std::string& question,
                   const std::string& correct = "42") {
    McqProblem p;
    p.id = id;
    p.question_text = question;
    p.correct_answer = correct;
    p.gold_distractors = {"g1" + id, "g2" + id, "g3" + id};
    p.error_descriptions = {"mixes up signs"};
    return p;
}

std::unique_ptr<Gateway> scripted(const test_util::TempDir& dir, const json& script) {
    BackendConfig config;
    config.kind = "mock";
    config.script_path = dir.write("script.json", script.dump());
    config.cache_dir = dir.file("cache");
    config.retry_base_ms = 1;
    return make_gateway(config);
}

const PromptLibrary& prompts() {
    static PromptLibrary lib = PromptLibrary::load(PromptLibrary::default_dir());
    return lib;
}

}  // namespace

TEST_CASE("parse_distractors reads the labeled template") {
    ParsedDistractors parsed =
        parse_distractors("Distractor1: 0.4\nDistractor2: 0.1\nDistractor3: 2.5", 3);
    CHECK(parsed.parse_ok);
    REQUIRE(parsed.candidates.entries.size() == 3);
    CHECK(parsed.candidates.entries[0].answer == "0.4");
    CHECK(parsed.candidates.entries[1].answer == "0.1");
    CHECK(parsed.candidates.entries[2].answer == "2.5");
    CHECK(parsed.candidates.total_multiplicity() == 3);
}

TEST_CASE("parse_distractors accumulates duplicate answers") {
    ParsedDistractors parsed =
        parse_distractors("Distractor1: a\nDistractor2: a\nDistractor3: b", 3);
    CHECK(parsed.parse_ok);
    REQUIRE(parsed.candidates.entries.size() == 2);
    CHECK(parsed.candidates.entries[0].answer == "a");
    CHECK(parsed.candidates.entries[0].multiplicity == 2);
    CHECK(parsed.candidates.support_size() == 2);
}

TEST_CASE("parse_distractors restricts to the [Final Answer] section") {
    std::string cot =
        "[Step-By-Step]\nLet's think. Maybe Distractor1: wrong-draft\n\n"
        "[Final Answer]\nDistractor1: x\nDistractor2: y\nDistractor3: z";
    ParsedDistractors parsed = parse_distractors(cot, 3);
    CHECK(parsed.parse_ok);
    REQUIRE(parsed.candidates.entries.size() == 3);
    CHECK(parsed.candidates.entries[0].answer == "x");
}

TEST_CASE("parse_distractors ignores preamble when no final-answer section exists") {
    ParsedDistractors parsed = parse_distractors(
        "Sure! Here are the options.\nDistractor1: 7\nDistractor2: 8\nDistractor3: 9", 3);
    CHECK(parsed.parse_ok);
    CHECK(parsed.candidates.entries[0].answer == "7");
}

TEST_CASE("parse_distractors tolerates markup and case drift in labels") {
    ParsedDistractors parsed = parse_distractors(
        "**Distractor1:** 1/2\ndistractor2: 3/4\n__DISTRACTOR3__: 5/6", 3);
    CHECK(parsed.parse_ok);
    REQUIRE(parsed.candidates.entries.size() == 3);
    CHECK(parsed.candidates.entries[0].answer == "1/2");
    CHECK(parsed.candidates.entries[1].answer == "3/4");
    CHECK(parsed.candidates.entries[2].answer == "5/6");
}

TEST_CASE("parse_distractors handles out-of-order labels") {
    ParsedDistractors parsed =
        parse_distractors("Distractor2: b\nDistractor1: a\nDistractor3: c", 3);
    CHECK(parsed.parse_ok);
    REQUIRE(parsed.candidates.entries.size() == 3);
    // entries follow label order, not text order
    CHECK(parsed.candidates.entries[0].answer == "a");
    CHECK(parsed.candidates.entries[1].answer == "b");
    CHECK(parsed.candidates.entries[2].answer == "c");
}

TEST_CASE("parse_distractors is not fooled by longer label prefixes") {
    // Distractor1 must not match inside Distractor10
    ParsedDistractors parsed = parse_distractors(
        "Distractor10: nope\nDistractor1: a\nDistractor2: b\nDistractor3: c", 3);
    CHECK(parsed.parse_ok);
    CHECK(parsed.candidates.entries[0].answer == "a");
}

TEST_CASE("parse_distractors flags missing labels and empty values") {
    ParsedDistractors missing = parse_distractors("Distractor1: a\nDistractor3: b", 3);
    CHECK(!missing.parse_ok);
    CHECK(missing.candidates.entries.size() == 2);
    REQUIRE(missing.issues.size() == 1);
    CHECK(missing.issues[0].find("Distractor2") != std::string::npos);

    ParsedDistractors empty = parse_distractors("Distractor1:\nDistractor2: b\nDistractor3: c", 3);
    CHECK(!empty.parse_ok);
    CHECK(empty.candidates.entries.size() == 2);
}

TEST_CASE("run_campaign produces one parsed result per problem") {
    test_util::TempDir dir("gen");
    json script;
    script["rules"] = json::array(
        {{{"match", {{"user_contains", "2+2"}}},
          {"response",
           {{"reasoning", "thinking about 2+2"},
            {"output", "Distractor1: 3\nDistractor2: 5\nDistractor3: 22"}}}},
         {{"match", {{"user_contains", "1/2"}}},
          {"response",
           {{"reasoning", "thinking about 1/2"},
            {"output", "Distractor1: 2\nDistractor2: 1\nDistractor3: 0.2"}}}}});
    auto gateway = scripted(dir, script);

    GenerationConfig config;
    config.model_id = "m";
    config.variant = Variant::kReasoning;
    std::vector<McqProblem> corpus = {problem("p1", "What is 2+2?"),
                                      problem("p2", "What is 1/2 of 1?")};
    auto results = run_campaign(corpus, config, prompts(), *gateway, 2);
    REQUIRE(results.size() == 2);
    CHECK(results[0].parse_ok);
    CHECK(results[1].parse_ok);
    CHECK(results[0].problem_id == "p1");
    REQUIRE(results[0].trace.has_value());
    CHECK(*results[0].trace == "thinking about 2+2");
    CHECK(results[0].candidates.entries[0].answer == "3");

    SUBCASE("empty corpus is an error") {
        CHECK_THROWS_AS(run_campaign({}, config, prompts(), *gateway), DataError);
    }
}

TEST_CASE("run_campaign reveal variant includes the correct answer in the prompt") {
    test_util::TempDir dir("gen");
    json script;
    script["rules"] = json::array(
        {{{"match", {{"user_contains", "Answer: 42"}}},
          {"response", {{"output", "Distractor1: 1\nDistractor2: 2\nDistractor3: 3"}}}}});
    script["default"] = {{"echo_user", false}};
    auto gateway = scripted(dir, script);
    GenerationConfig config;
    config.model_id = "m";
    config.variant = Variant::kDirectReveal;
    auto results = run_campaign({problem("p1", "Q?")}, config, prompts(), *gateway);
    REQUIRE(results.size() == 1);
    CHECK(!results[0].error.has_value());  // only matches if the Answer line was rendered
    CHECK(results[0].parse_ok);
    CHECK(!results[0].trace.has_value());
}

TEST_CASE("run_campaign cot variant captures the step section as trace") {
    test_util::TempDir dir("gen");
    json script;
    script["rules"] = json::array(
        {{{"match", json::object()},
          {"response",
           {{"output", "[Step-By-Step]\nfirst half\n\n[Final Answer]\nDistractor1: 1\n"
                       "Distractor2: 2\nDistractor3: 3"}}}}});
    auto gateway = scripted(dir, script);
    GenerationConfig config;
    config.model_id = "m";
    config.variant = Variant::kCot;
    auto results = run_campaign({problem("p1", "Q?")}, config, prompts(), *gateway);
    REQUIRE(results[0].trace.has_value());
    CHECK(*results[0].trace == "first half");
    CHECK(results[0].parse_ok);
}

TEST_CASE("run_campaign keeps malformed output and flags it") {
    test_util::TempDir dir("gen");
    json script;
    script["rules"] = json::array(
        {{{"match", json::object()}, {"response", {{"output", "no labels here"}}}}});
    auto gateway = scripted(dir, script);
    GenerationConfig config;
    config.model_id = "m";
    config.variant = Variant::kDirect;
    auto results = run_campaign({problem("p1", "Q?")}, config, prompts(), *gateway);
    CHECK(!results[0].parse_ok);
    CHECK(results[0].raw_output == "no labels here");
}

TEST_CASE("run_campaign records per-problem failures and continues") {
    test_util::TempDir dir("gen");
    json script;
    script["rules"] = json::array(
        {{{"match", {{"user_contains", "bad"}}}, {"fail", true}},
         {{"match", json::object()},
          {"response", {{"output", "Distractor1: 1\nDistractor2: 2\nDistractor3: 3"}}}}});
    auto gateway = scripted(dir, script);
    GenerationConfig config;
    config.model_id = "m";
    config.variant = Variant::kDirect;
    auto results =
        run_campaign({problem("p1", "fine"), problem("p2", "bad one")}, config, prompts(), *gateway);
    CHECK(!results[0].error.has_value());
    REQUIRE(results[1].error.has_value());
    CHECK(results[1].candidates.entries.empty());
}

TEST_CASE("variant mapping") {
    CHECK(variant_template(Variant::kDirect) == "distractor_direct");
    CHECK(variant_template(Variant::kReasoning) == "distractor_direct");
    CHECK(variant_template(Variant::kDirectReveal) == "distractor_direct_reveal");
    CHECK(variant_template(Variant::kStructured) == "distractor_structured");
    CHECK(variant_mode(Variant::kDirectReveal) == ChatMode::kDirect);
    CHECK(variant_mode(Variant::kStructured) == ChatMode::kReasoning);
    CHECK(variant_mode(Variant::kCot) == ChatMode::kCot);
    CHECK(variant_from_string("reasoning_reveal") == Variant::kReasoningReveal);
    CHECK_THROWS_AS(variant_from_string("nope"), ConfigError);
}

TEST_CASE("simulate_student_error extracts the text after the last marker") {
    test_util::TempDir dir("gen");
    json script;
    script["rules"] = json::array(
        {{{"match", {{"user_contains", "twice"}}},
          {"response",
           {{"output", "Incorrect Student Answer: draft\nrethinking...\n"
                       "Incorrect Student Answer: 1/6"}}}},
         {{"match", {{"user_contains", "clean"}}},
          {"response", {{"output", "The student adds wrong.\nIncorrect Student Answer: 12"}}}},
         {{"match", json::object()}, {"response", {{"output", "no marker at all"}}}}});
    auto gateway = scripted(dir, script);

    SimulatedError twice =
        simulate_student_error(problem("p", "twice"), "some error", "m", prompts(), *gateway);
    CHECK(twice.final_answer == "1/6");
    SimulatedError clean =
        simulate_student_error(problem("p", "clean"), "some error", "m", prompts(), *gateway);
    CHECK(clean.final_answer == "12");
    CHECK(clean.full_text.find("adds wrong") != std::string::npos);

    CHECK_THROWS_AS(
        simulate_student_error(problem("p", "other"), "some error", "m", prompts(), *gateway),
        DataError);
    CHECK_THROWS_AS(simulate_student_error(problem("p", "q"), "", "m", prompts(), *gateway),
                    DataError);
}

TEST_CASE("parse_step_solution reads steps and final answer") {
    StepSolution s = parse_step_solution("[STEP-1]a\n[STEP-2]b\n[FINAL ANSWER]c");
    REQUIRE(s.steps.size() == 2);
    CHECK(s.steps[0] == "a");
    CHECK(s.steps[1] == "b");
    CHECK(s.final_answer == "c");
    CHECK(s.contiguous_numbering);

    SUBCASE("zero steps, final only") {
        StepSolution only = parse_step_solution("[FINAL ANSWER] 42");
        CHECK(only.steps.empty());
        CHECK(only.final_answer == "42");
    }
    SUBCASE("non-contiguous numbering is flagged, not fatal") {
        StepSolution skipped = parse_step_solution("[STEP-1]a\n[STEP-3]b\n[FINAL ANSWER]c");
        CHECK(skipped.steps.size() == 2);
        CHECK(!skipped.contiguous_numbering);
    }
    SUBCASE("missing final answer throws") {
        CHECK_THROWS_AS(parse_step_solution("[STEP-1]a"), DataError);
    }
}

TEST_CASE("solve_step_by_step binds the correct answer into the template") {
    test_util::TempDir dir("gen");
    json script;
    script["rules"] = json::array(
        {{{"match", {{"user_contains", "MUST equal:\n\"42\""}}},
          {"response", {{"output", "[STEP-1]compute\n[FINAL ANSWER]42"}}}}});
    script["default"] = {{"echo_user", false}};
    auto gateway = scripted(dir, script);
    StepSolution s = solve_step_by_step(problem("p", "Q?", "42"), "m", prompts(), *gateway);
    CHECK(s.final_answer == "42");
    REQUIRE(s.steps.size() == 1);
}

TEST_CASE("parsed multiplicities sum to n for well-formed outputs") {
    for (const char* fixture :
         {"Distractor1: a\nDistractor2: b\nDistractor3: c",
          "Distractor1: a\nDistractor2: a\nDistractor3: a",
          "Distractor1: q\nDistractor2: q\nDistractor3: r"}) {
        ParsedDistractors parsed = parse_distractors(fixture, 3);
        REQUIRE(parsed.parse_ok);
        CHECK(parsed.candidates.total_multiplicity() == 3);
    }
}
