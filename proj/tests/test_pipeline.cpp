#include <doctest.h>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

#include "distrace/errors.hpp"
#include "distrace/io.hpp"
#include "distrace/pipeline.hpp"
#include "support/test_util.hpp"

using namespace distrace;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Two-problem fixture with a scripted mock backend covering generation,
/// judging, annotation and labeling.
struct Fixture {
    test_util::TempDir dir{"pipe"};

    Fixture() {
        std::string corpus;
        corpus += json{{"id", "q1"},
                       {"question", "What is 6 times 7?"},
                       {"correct_answer", "42"},
                       {"distractors", {"36", "13", "67"}},
                       {"errors", {"adds instead of multiplying"}},
                       {"references_image", false},
                       {"choice_reliant", false}}
                      .dump() +
                  "\n";
        corpus += json{{"id", "q2"},
                       {"question", "Halve the number 10."},
                       {"correct_answer", "5"},
                       {"distractors", {"20", "0.5", "8"}},
                       {"errors", {"doubles instead of halving"}},
                       {"references_image", false},
                       {"choice_reliant", false}}
                      .dump() +
                  "\n";
        corpus += json{{"id", "q3"},
                       {"question", "Pick the picture of a square."},
                       {"correct_answer", "A"},
                       {"distractors", {"B", "C", "D"}},
                       {"errors", {"confuses shapes"}},
                       {"references_image", true},
                       {"choice_reliant", false}}
                      .dump() +
                  "\n";
        dir.write("corpus.jsonl", corpus);

        json rules = json::array();
        rules.push_back({{"match", {{"user_contains", "Question: What is 6 times 7?"}}},
                         {"response",
                          {{"reasoning", "Solve first: the answer is 42 now. Adding gives 13 as "
                                         "a slip. Keep 13 plus 36 and 67 as the set."},
                           {"output", "Distractor1: 36\nDistractor2: 13\nDistractor3: 67"}}}});
        rules.push_back({{"match", {{"user_contains", "Question: Halve the number 10."}}},
                         {"response",
                          {{"reasoning", "Solve first: the answer is 5 now. Doubling gives 20 as "
                                         "a slip. Keep 20 plus 1/2 and 8 as the set."},
                           {"output", "Distractor1: 20\nDistractor2: 1/2\nDistractor3: 8"}}}});
        // judged pair: candidate 1/2 vs gold 0.5
        rules.push_back(
            {{"match",
              {{"user_contains", "<answer_1> 1/2 </answer_1>\n<answer_2> 0.5 </answer_2>"}}},
             {"response",
              {{"output", "<format> FALSE </format><equivalent> TRUE </equivalent>"}}}});
        rules.push_back({{"match", {{"user_contains", "TRACE START"}}},
                         {"response",
                          {{"output", "<INTER>: (none)\n<CORR>: the answer is\n"
                                      "<ERR_DESC>: (none)\n<INST>: as a slip\n<ERR_SIM>: (none)\n"
                                      "<PLAUS>: (none)\n<CURATE>: as the set\n<RECON>: (none)"}}}});
        rules.push_back(
            {{"match", {{"user_contains", "CHUNK START"}}},
             {"response",
              {{"output", "{chunk}"},
               {"replacements",
                json::array({{{"find", "now."}, {"replace", "now.<CORR>"}},
                             {{"find", "as a slip."}, {"replace", "as a slip.<INST>"}},
                             {{"find", "as the set."}, {"replace", "as the set.<CURATE>"}}})}}}});
        rules.push_back({{"match", {{"system_contains", "SOLVE_FIRST_LABEL"}}},
                         {"response",
                          {{"output", "SOLVE_FIRST_DISCUSSION: solves up front\n"
                                      "SOLVE_FIRST_LABEL: YES\n"
                                      "INJECT_FROM_SOLUTION_DISCUSSION: N/A\n"
                                      "INJECT_FROM_SOLUTION_LABEL: NO"}}}});
        rules.push_back(
            {{"match", {{"system_contains", "judging whether two answer choices"}}},
             {"response",
              {{"output", "<format> FALSE </format><equivalent> FALSE </equivalent>"}}}});
        json script;
        script["rules"] = rules;
        script["default"] = {{"echo_user", false}};
        dir.write("mock.json", script.dump());

        dir.write("backend.json", json{{"backend", "mock"},
                                       {"script", "mock.json"},
                                       {"cache_dir", "cache"},
                                       {"retry_base_ms", 1}}
                                      .dump());
        json config;
        config["corpus"] = "corpus.jsonl";
        config["backend"] = "backend.json";
        config["outdir"] = "out";
        config["seed"] = 3;
        config["campaign"] = {{"model_id", "m"}, {"variant", "reasoning"}};
        config["judge"] = {{"model_id", "j"}};
        config["annotation"] = {{"model_id", "a"}};
        config["analysis"] = {{"classify_solve_inject", true}};
        dir.write("run.json", config.dump());
    }

    RunConfig config() const { return load_run_config(dir.file("run.json")); }
    fs::path out(const std::string& rel) const { return fs::path(dir.file("out")) / rel; }
};

}  // namespace

TEST_CASE("run config loader applies defaults and resolves paths") {
    Fixture fx;
    RunConfig config = fx.config();
    CHECK(fs::path(config.corpus_path).is_absolute());
    CHECK(fs::path(config.outdir).is_absolute());
    CHECK(config.seed == 3);
    CHECK(config.max_in_flight == 4);
    CHECK(config.annotation.window == 30);
    CHECK(config.analysis.bins == 5);
    CHECK(config.analysis.threshold == doctest::Approx(0.15));
    CHECK(config.analysis.labeler_model == "a");  // falls back to the annotator
    CHECK(config.filter.drop_image_references);
}

TEST_CASE("pipeline stages chain end to end in process") {
    Fixture fx;
    RunConfig config = fx.config();

    cmd_ingest(config);
    std::string summary = read_file(fx.out("ingest/summary.json").string());
    CHECK(summary.find("\"loaded\": 3") != std::string::npos);
    CHECK(summary.find("\"kept\": 2") != std::string::npos);

    SUBCASE("ingest re-run is byte-identical") {
        std::string before = read_file(fx.out("ingest/corpus.jsonl").string());
        std::string manifest_before = read_file(fx.out("ingest/manifest.json").string());
        cmd_ingest(config);
        CHECK(read_file(fx.out("ingest/corpus.jsonl").string()) == before);
        CHECK(read_file(fx.out("ingest/manifest.json").string()) == manifest_before);
    }

    cmd_generate(config);
    size_t results = 0;
    for_each_jsonl(fx.out("generate/results.jsonl").string(), [&](size_t, const json& rec) {
        CHECK(rec.at("parse_ok") == true);
        CHECK(!rec.at("trace").is_null());
        ++results;
    });
    CHECK(results == 2);

    cmd_score(config);
    std::string metrics = read_file(fx.out("score/metrics.csv").string());
    // q1: all three exact; q2: two exact + one judged -> proportional match 1.0
    CHECK(metrics.find("m:reasoning,proportional_match,1,0,2") != std::string::npos);
    bool judged_seen = false;
    for_each_jsonl(fx.out("score/judgments.jsonl").string(), [&](size_t, const json& rec) {
        if (rec.at("method") == "judged" && rec.at("equivalent") == true) judged_seen = true;
    });
    CHECK(judged_seen);

    cmd_annotate(config);
    size_t annotated = 0;
    for_each_jsonl(fx.out("annotate/annotated.jsonl").string(), [&](size_t, const json& rec) {
        CHECK(rec.at("error").is_null());
        CHECK(rec.at("spans").size() == 3);
        ++annotated;
    });
    CHECK(annotated == 2);

    cmd_analyze(config);
    CHECK(fs::exists(fx.out("analyze/occurrences.csv")));
    CHECK(fs::exists(fx.out("analyze/transitions.csv")));
    std::string solve = read_file(fx.out("analyze/solve_inject_summary.json").string());
    CHECK(solve.find("\"solve_first_fraction\": 1.0") != std::string::npos);

    SUBCASE("validate against identical gold gives perfect agreement") {
        std::string gold;
        for_each_jsonl(fx.out("annotate/annotated.jsonl").string(),
                       [&](size_t, const json& rec) {
                           gold += json{{"id", rec.at("id")}, {"tagged", rec.at("tagged")}}.dump() +
                                   "\n";
                       });
        std::string gold_path = fx.dir.write("gold.jsonl", gold);
        cmd_validate(config, gold_path);
        std::string agreement = read_file(fx.out("validate/agreement.csv").string());
        CHECK(agreement.find("CORR,2,0,0,1,1") != std::string::npos);
        CHECK(agreement.find("MACRO,6,0,0,1,1") != std::string::npos);
    }

    SUBCASE("an extra predicted marker lowers that tag's precision") {
        // gold drops one INST marker, so the prediction carries an insertion
        std::string gold;
        bool first = true;
        for_each_jsonl(fx.out("annotate/annotated.jsonl").string(),
                       [&](size_t, const json& rec) {
                           std::string tagged = rec.at("tagged");
                           if (first) {
                               size_t at = tagged.find("<INST>");
                               REQUIRE(at != std::string::npos);
                               tagged.erase(at, 6);
                               first = false;
                           }
                           gold += json{{"id", rec.at("id")}, {"tagged", tagged}}.dump() + "\n";
                       });
        std::string gold_path = fx.dir.write("gold.jsonl", gold);
        cmd_validate(config, gold_path);
        std::string agreement = read_file(fx.out("validate/agreement.csv").string());
        CHECK(agreement.find("INST,1,1,0,0.5,1") != std::string::npos);
    }

    SUBCASE("gold over a different text is rejected") {
        std::string gold = json{{"id", "q1"}, {"tagged", "unrelated<CORR> text"}}.dump() + "\n";
        std::string gold_path = fx.dir.write("gold.jsonl", gold);
        CHECK_THROWS_AS(cmd_validate(config, gold_path), DataError);
    }

    SUBCASE("gold referencing an unknown id is rejected") {
        std::string gold = json{{"id", "qX"}, {"tagged", "whatever"}}.dump() + "\n";
        std::string gold_path = fx.dir.write("gold.jsonl", gold);
        CHECK_THROWS_WITH_AS(cmd_validate(config, gold_path), doctest::Contains("qX"), DataError);
    }
}

TEST_CASE("stages demand their prerequisites") {
    Fixture fx;
    RunConfig config = fx.config();
    CHECK_THROWS_AS(cmd_generate(config), DataError);   // nothing ingested yet
    CHECK_THROWS_AS(cmd_score(config), DataError);
    CHECK_THROWS_AS(cmd_annotate(config), DataError);
    CHECK_THROWS_AS(cmd_analyze(config), DataError);
}

TEST_CASE("missing corpus file surfaces as a data error naming the path") {
    Fixture fx;
    RunConfig config = fx.config();
    config.corpus_path = fx.dir.file("nope.jsonl");
    CHECK_THROWS_WITH_AS(cmd_ingest(config), doctest::Contains("nope.jsonl"), DataError);
}

TEST_CASE("annotation sampling honors per-stratum caps") {
    Fixture fx;
    RunConfig config = fx.config();
    config.annotation.sample_per_stratum = 1;
    cmd_ingest(config);
    cmd_generate(config);
    cmd_annotate(config);
    size_t annotated = 0;
    for_each_jsonl(fx.out("annotate/annotated.jsonl").string(),
                   [&](size_t, const json&) { ++annotated; });
    CHECK(annotated == 1);  // both traces share the one (model, variant) stratum
}
