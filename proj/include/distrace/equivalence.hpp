#pragma once

#include <optional>
#include <string>
#include <vector>

#include "distrace/corpus.hpp"
#include "distrace/gateway.hpp"
#include "distrace/generation.hpp"
#include "distrace/prompts.hpp"

namespace distrace {

enum class EquivalenceMethod { kExact, kJudged };

std::string to_string(EquivalenceMethod m);

struct EquivalenceVerdict {
    bool format_required = false;
    bool equivalent = false;
    EquivalenceMethod method = EquivalenceMethod::kJudged;
    std::optional<std::string> raw_judgment;  // absent for method=exact
};

/// Trims, strips the math delimiters \( \) \[ \] $, collapses internal
/// whitespace runs, and case-folds. Deliberately no numeric evaluation:
/// "3.1" vs "31/10" is the judge's call.
std::string canonicalize(const std::string& s);

/// canonicalize(a) == canonicalize(b).
bool exact_equivalent(const std::string& a, const std::string& b);

/// Parses `<format>` / `<equivalent>` TRUE/FALSE tags, order-insensitive.
/// Throws DataError (carrying the raw text) when either tag is missing or
/// not a boolean.
EquivalenceVerdict parse_judgment(const std::string& raw);

/// Renders the equivalence template with the problem text and both answers
/// and parses the judgment. Judge calls use deterministic decoding and are
/// cached via the gateway.
EquivalenceVerdict judge_equivalent(const McqProblem& problem, const std::string& a,
                                    const std::string& b, const std::string& judge_model,
                                    const PromptLibrary& prompts, Gateway& gateway);

/// Semantic-equivalence callback used by match_candidates when the exact
/// tier comes back negative. Implementations throw on judge failure.
class Judge {
public:
    virtual ~Judge() = default;
    virtual bool equivalent(const McqProblem& problem, const std::string& a,
                            const std::string& b) = 0;
};

/// LLM-backed judge.
class LlmJudge : public Judge {
public:
    LlmJudge(std::string judge_model, const PromptLibrary& prompts, Gateway& gateway)
        : model_(std::move(judge_model)), prompts_(prompts), gateway_(gateway) {}
    bool equivalent(const McqProblem& problem, const std::string& a,
                    const std::string& b) override {
        return judge_equivalent(problem, a, b, model_, prompts_, gateway_).equivalent;
    }

private:
    std::string model_;
    const PromptLibrary& prompts_;
    Gateway& gateway_;
};

/// Judge that always answers false; reduces matching to the exact tier.
class NeverEquivalentJudge : public Judge {
public:
    bool equivalent(const McqProblem&, const std::string&, const std::string&) override {
        return false;
    }
};

struct JudgmentRecord {
    std::string problem_id;
    std::string a;
    std::string b;
    bool equivalent = false;
    EquivalenceMethod method = EquivalenceMethod::kExact;
};

struct MatchOutcome {
    std::vector<std::string> matched_gold;
    int matched_count = 0;
    int correct_hits = 0;
    int repetitions = 0;
    std::vector<std::pair<std::string, std::string>> pairing;  // (candidate, gold)
    std::vector<std::string> warnings;                         // degraded judge failures
};

/// Matches a candidate multiset against a problem's gold distractors and
/// correct answer. Distinct candidates are visited in first-appearance
/// order; for each, gold distractors are tested in corpus order at the
/// exact tier first, then via the judge; the first unmatched equivalent
/// gold is paired. A candidate that pairs with a gold (or equals the
/// correct answer at the exact tier) is not judged further. Judge failures
/// degrade that pair to unmatched with a warning.
MatchOutcome match_candidates(const CandidateMultiset& candidates, const McqProblem& problem,
                              Judge& judge, std::vector<JudgmentRecord>* log = nullptr);

}  // namespace distrace
