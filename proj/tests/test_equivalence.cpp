#include <doctest.h>

#include <nlohmann/json.hpp>

#include <random>

#include "distrace/equivalence.hpp"
#include "distrace/errors.hpp"
#include "support/test_util.hpp"

using namespace distrace;
using nlohmann::json;

namespace {

McqProblem problem(const std::string& correct, const std::array<std::string, 3>& gold) {
    McqProblem p;
    p.id = "p1";
    p.question_text = "What is the value?";
    p.correct_answer = correct;
    p.gold_distractors = gold;
    return p;
}

CandidateMultiset multiset(const std::vector<std::string>& answers) {
    CandidateMultiset c;
    for (const auto& a : answers) c.add(a);
    return c;
}

/// Judge scripted with explicit pairs; anything else is false. Counts calls.
class ScriptedJudge : public Judge {
public:
    void allow(const std::string& a, const std::string& b) { pairs_.emplace_back(a, b); }
    bool equivalent(const McqProblem&, const std::string& a, const std::string& b) override {
        ++calls;
        for (const auto& [x, y] : pairs_)
            if ((x == a && y == b) || (x == b && y == a)) return true;
        return false;
    }
    int calls = 0;

private:
    std::vector<std::pair<std::string, std::string>> pairs_;
};

class FailingJudge : public Judge {
public:
    bool equivalent(const McqProblem&, const std::string&, const std::string&) override {
        throw BackendError("judge unavailable");
    }
};

}  // namespace

TEST_CASE("canonicalize strips math delimiters, whitespace and case") {
    CHECK(canonicalize("\\(10\\)") == "10");
    CHECK(canonicalize("  1/2 ") == "1/2");
    CHECK(canonicalize("10") == "10");
    CHECK(canonicalize("$ 4 $") == "4");
    CHECK(canonicalize("\\[x + 1\\]") == "x + 1");
    CHECK(canonicalize("Only   Bob") == "only bob");
    CHECK(canonicalize("a\t\nb") == "a b");
}

TEST_CASE("canonicalize is a fixpoint") {
    std::mt19937 rng(23);
    const std::string alphabet = "ab $\\()10/.x";
    for (int trial = 0; trial < 200; ++trial) {
        std::string s;
        size_t len = rng() % 12;
        for (size_t i = 0; i < len; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
        std::string once = canonicalize(s);
        CHECK(canonicalize(once) == once);
    }
}

TEST_CASE("exact_equivalent examples") {
    CHECK(exact_equivalent("10", "\\(10\\)"));
    CHECK(!exact_equivalent("3.1", "31/10"));  // deferred to the judge
    CHECK(exact_equivalent("same", "same"));
    CHECK(!exact_equivalent("10", "10.0"));  // no numeric evaluation
}

TEST_CASE("exact_equivalent is an equivalence relation") {
    std::vector<std::string> values = {"10",  "\\(10\\)", " 10 ", "$10$", "1/2",
                                       "1/2 ", "0.5",     "TEN",  "ten"};
    for (const auto& a : values) CHECK(exact_equivalent(a, a));
    for (const auto& a : values)
        for (const auto& b : values) CHECK(exact_equivalent(a, b) == exact_equivalent(b, a));
    for (const auto& a : values)
        for (const auto& b : values)
            for (const auto& c : values)
                if (exact_equivalent(a, b) && exact_equivalent(b, c))
                    CHECK(exact_equivalent(a, c));
}

TEST_CASE("parse_judgment reads the tag grammar") {
    EquivalenceVerdict v = parse_judgment("<format> FALSE </format><equivalent> TRUE </equivalent>");
    CHECK(!v.format_required);
    CHECK(v.equivalent);
    CHECK(v.method == EquivalenceMethod::kJudged);
    REQUIRE(v.raw_judgment.has_value());

    SUBCASE("tags in reversed order") {
        EquivalenceVerdict r =
            parse_judgment("<equivalent>FALSE</equivalent>\n<format>TRUE</format>");
        CHECK(r.format_required);
        CHECK(!r.equivalent);
    }
    SUBCASE("bracketed booleans and case drift") {
        EquivalenceVerdict r = parse_judgment("<format> [true] </format><equivalent>[False]</equivalent>");
        CHECK(r.format_required);
        CHECK(!r.equivalent);
    }
    SUBCASE("missing equivalent tag is a parse error") {
        CHECK_THROWS_AS(parse_judgment("<format> TRUE </format>"), DataError);
    }
    SUBCASE("non-boolean payload is a parse error") {
        CHECK_THROWS_AS(parse_judgment("<format> TRUE </format><equivalent> maybe </equivalent>"),
                        DataError);
    }
}

TEST_CASE("judge_equivalent renders the template and caches via the gateway") {
    test_util::TempDir dir("eq");
    json script;
    script["rules"] = json::array(
        {{{"match", {{"user_contains", "<answer_1> 0.5 </answer_1>"}}},
          {"response", {{"output", "<format> FALSE </format><equivalent> TRUE </equivalent>"}}}}});
    BackendConfig config;
    config.kind = "mock";
    config.script_path = dir.write("script.json", script.dump());
    config.cache_dir = dir.file("cache");
    auto gateway = make_gateway(config);
    PromptLibrary prompts = PromptLibrary::load(PromptLibrary::default_dir());

    McqProblem p = problem("7", {"0.5", "x", "y"});
    EquivalenceVerdict v = judge_equivalent(p, "0.5", "1/2", "judge-model", prompts, *gateway);
    CHECK(v.equivalent);
    CHECK(v.method == EquivalenceMethod::kJudged);
    judge_equivalent(p, "0.5", "1/2", "judge-model", prompts, *gateway);
    CHECK(gateway->stats().backend_calls == 1);
    CHECK(gateway->stats().cache_hits == 1);
}

TEST_CASE("match_candidates: exact tier only") {
    McqProblem p = problem("y", {"a", "b", "c"});
    ScriptedJudge judge;
    MatchOutcome outcome = match_candidates(multiset({"a", "b", "x"}), p, judge);
    CHECK(outcome.matched_count == 2);
    CHECK(outcome.repetitions == 0);
    CHECK(outcome.correct_hits == 0);
    REQUIRE(outcome.pairing.size() == 2);
    CHECK(outcome.pairing[0].first == "a");
    CHECK(outcome.pairing[0].second == "a");
    // x still consulted the judge against the remaining gold and the correct answer
    CHECK(judge.calls == 2);
}

TEST_CASE("match_candidates: correct-answer multiset") {
    McqProblem p = problem("y", {"a", "b", "c"});
    ScriptedJudge judge;
    MatchOutcome outcome = match_candidates(multiset({"y", "y", "y"}), p, judge);
    CHECK(outcome.correct_hits == 3);
    CHECK(outcome.matched_count == 0);
    CHECK(outcome.repetitions == 2);
    // exact tier resolves the correct answer, no judge calls at all
    CHECK(judge.calls == 0);
}

TEST_CASE("match_candidates: judged pairing") {
    McqProblem p = problem("7", {"0.5", "q", "r"});
    ScriptedJudge judge;
    judge.allow("1/2", "0.5");
    MatchOutcome outcome = match_candidates(multiset({"1/2"}), p, judge);
    CHECK(outcome.matched_count == 1);
    REQUIRE(outcome.pairing.size() == 1);
    CHECK(outcome.pairing[0].first == "1/2");
    CHECK(outcome.pairing[0].second == "0.5");
}

TEST_CASE("match_candidates never pairs one gold twice") {
    McqProblem p = problem("y", {"a", "b", "c"});
    ScriptedJudge judge;
    MatchOutcome outcome = match_candidates(multiset({"a", "a", "a"}), p, judge);
    CHECK(outcome.matched_count == 1);
    CHECK(outcome.repetitions == 2);

    std::mt19937 rng(7);
    const std::vector<std::string> pool = {"a", "b", "c", "y", "z"};
    for (int trial = 0; trial < 100; ++trial) {
        CandidateMultiset c;
        for (int i = 0; i < 3; ++i) c.add(pool[rng() % pool.size()]);
        MatchOutcome o = match_candidates(c, p, judge);
        std::set<std::string> golds, candidates;
        for (const auto& [cand, gold] : o.pairing) {
            CHECK(golds.insert(gold).second);
            CHECK(candidates.insert(cand).second);
        }
        CHECK(o.matched_count <= std::min(3, c.support_size()));
        CHECK(o.correct_hits <= c.total_multiplicity());
        CHECK(o.repetitions >= 0);
        CHECK(o.repetitions <= std::max(0, c.total_multiplicity() - 1));
    }
}

TEST_CASE("an always-false judge reduces matching to the exact tier") {
    McqProblem p = problem("y", {"a", "b", "c"});
    NeverEquivalentJudge never;
    std::mt19937 rng(13);
    const std::vector<std::string> pool = {"a", "b", "c", "y", "A ", "\\(b\\)", "zz"};
    for (int trial = 0; trial < 100; ++trial) {
        CandidateMultiset c;
        for (int i = 0; i < 3; ++i) c.add(pool[rng() % pool.size()]);
        MatchOutcome o = match_candidates(c, p, never);
        // brute force matched set under pure canonical string matching
        std::array<bool, 3> used{};
        int expected_matches = 0, expected_correct = 0;
        for (const auto& e : c.entries) {
            bool paired = false;
            for (int g = 0; g < 3; ++g) {
                if (!used[g] && exact_equivalent(e.answer, p.gold_distractors[g])) {
                    used[g] = true;
                    paired = true;
                    ++expected_matches;
                    break;
                }
            }
            if (!paired && exact_equivalent(e.answer, p.correct_answer))
                expected_correct += e.multiplicity;
        }
        CHECK(o.matched_count == expected_matches);
        CHECK(o.correct_hits == expected_correct);
    }
}

TEST_CASE("judge failures degrade pairs to unmatched with warnings") {
    McqProblem p = problem("y", {"a", "b", "c"});
    FailingJudge judge;
    MatchOutcome outcome = match_candidates(multiset({"a", "mystery"}), p, judge);
    CHECK(outcome.matched_count == 1);  // exact match unaffected
    CHECK(!outcome.warnings.empty());
}

TEST_CASE("judgment log records methods and verdicts") {
    McqProblem p = problem("7", {"0.5", "q", "r"});
    ScriptedJudge judge;
    judge.allow("1/2", "0.5");
    std::vector<JudgmentRecord> log;
    match_candidates(multiset({"1/2", "q"}), p, judge, &log);
    REQUIRE(!log.empty());
    bool saw_judged = false, saw_exact = false;
    for (const auto& r : log) {
        if (r.method == EquivalenceMethod::kJudged) saw_judged = true;
        if (r.method == EquivalenceMethod::kExact) saw_exact = true;
        CHECK(r.problem_id == "p1");
    }
    CHECK(saw_judged);
    CHECK(saw_exact);
}
