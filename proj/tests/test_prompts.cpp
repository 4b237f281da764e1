#include <doctest.h>

#include <map>
#include <string>

#include "distrace/digest.hpp"
#include "distrace/errors.hpp"
#include "distrace/io.hpp"
#include "distrace/prompts.hpp"
#include "support/prompt_checksums.hpp"

using namespace distrace;

namespace {

const PromptLibrary& library() {
    static PromptLibrary lib = PromptLibrary::load(PromptLibrary::default_dir());
    return lib;
}

}  // namespace

TEST_CASE("registry ships at least 11 templates with unique names") {
    const auto& templates = library().templates();
    CHECK(templates.size() >= 11);
    std::set<std::string> names;
    for (const auto& t : templates) CHECK(names.insert(t.name).second);
}

TEST_CASE("every template's placeholders match its required_vars") {
    for (const auto& t : library().templates()) {
        std::set<std::string> found = placeholder_names(t.system_template);
        auto user_vars = placeholder_names(t.user_template);
        found.insert(user_vars.begin(), user_vars.end());
        CHECK(found == t.required_vars);
    }
}

TEST_CASE("taxonomy_description placeholder appears in both annotation templates") {
    CHECK(library().get("chunk_annotation").required_vars.count("taxonomy_description") == 1);
    CHECK(library().get("example_extraction").required_vars.count("taxonomy_description") == 1);
}

TEST_CASE("template files carry their frozen checksums") {
    std::string dir = PromptLibrary::default_dir();
    for (const auto& [file, checksum] : test_util::prompt_checksums())
        CHECK_MESSAGE(sha256_file(dir + "/" + file) == checksum, file);
}

TEST_CASE("rendering the direct template") {
    RenderedPrompt p = library().render("distractor_direct", {{"problem_formulation", "What?"}});
    CHECK(p.system.find("Please generate 3 incorrect distractor answers") != std::string::npos);
    CHECK(p.user == "Question: What?");
    CHECK(p.system.find('{') == std::string::npos);
}

TEST_CASE("rendering the reveal template includes the Answer line") {
    RenderedPrompt p = library().render(
        "distractor_direct_reveal", {{"problem_formulation", "What?"}, {"correct_answer", "42"}});
    CHECK(p.system.find("along with the correct answer") != std::string::npos);
    CHECK(p.user.find("Answer: 42") != std::string::npos);
}

TEST_CASE("rendering the cot template") {
    RenderedPrompt p = library().render("distractor_cot", {{"problem_formulation", "X?"}});
    CHECK(p.system.find("Think step-by-step before giving") != std::string::npos);
    CHECK(p.system.find("[Final Answer]") != std::string::npos);
}

TEST_CASE("structured template substitutes the distractor count everywhere") {
    RenderedPrompt p = library().render("distractor_structured",
                                        {{"problem_formulation", "X?"}, {"n", "3"}});
    CHECK(p.system.find("generate 3 incorrect distractor") != std::string::npos);
    CHECK(p.system.find("Distractor3:") != std::string::npos);
    CHECK(p.system.find("{n}") == std::string::npos);
}

TEST_CASE("render errors: unknown template and missing binding") {
    CHECK_THROWS_AS(library().render("nope", {}), ConfigError);
    CHECK_THROWS_WITH_AS(library().render("distractor_direct", {}),
                         doctest::Contains("problem_formulation"), ConfigError);
}

TEST_CASE("extra bindings are reported, not fatal") {
    RenderedPrompt p = library().render(
        "distractor_direct", {{"problem_formulation", "Q"}, {"stray", "value"}});
    REQUIRE(p.extra_bindings.size() == 1);
    CHECK(p.extra_bindings[0] == "stray");
}

TEST_CASE("placeholder syntax in bindings passes through without rescanning") {
    RenderedPrompt p = library().render("distractor_direct",
                                        {{"problem_formulation", "weird {correct_answer} text"}});
    CHECK(p.user == "Question: weird {correct_answer} text");
}

TEST_CASE("rendering is injective for distinct plain bindings") {
    RenderedPrompt a = library().render("distractor_direct", {{"problem_formulation", "one"}});
    RenderedPrompt b = library().render("distractor_direct", {{"problem_formulation", "two"}});
    CHECK(a.user != b.user);
}

TEST_CASE("mode hints match how each template is used") {
    CHECK(library().get("distractor_cot").mode_hint == ModeHint::kCot);
    CHECK(library().get("distractor_structured").mode_hint == ModeHint::kReasoning);
    CHECK(library().get("equivalence_judge").mode_hint == ModeHint::kDirect);
}

TEST_CASE("the solve/inject labeling prompt carries the whole task in system text") {
    const PromptTemplate& t = library().get("solve_inject_labeling");
    CHECK(t.user_template.empty());
    CHECK(t.system_template.find("[BEGIN TRACE]") != std::string::npos);
}
