#include "distrace/equivalence.hpp"

#include <array>

#include "distrace/errors.hpp"
#include "distrace/text.hpp"

namespace distrace {

std::string to_string(EquivalenceMethod m) {
    return m == EquivalenceMethod::kExact ? "exact" : "judged";
}

std::string canonicalize(const std::string& s) {
    std::string stripped = trim(s);
    for (std::string_view delim : {"\\(", "\\)", "\\[", "\\]", "$"})
        stripped = replace_all(std::move(stripped), delim, "");
    std::string out;
    out.reserve(stripped.size());
    bool in_run = false;
    for (char c : stripped) {
        if (is_space(c)) {
            in_run = true;
            continue;
        }
        if (in_run && !out.empty()) out.push_back(' ');
        in_run = false;
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        out.push_back(c);
    }
    return out;
}

bool exact_equivalent(const std::string& a, const std::string& b) {
    return canonicalize(a) == canonicalize(b);
}

namespace {

/// Extracts the boolean between <tag> and </tag>, tolerating case,
/// whitespace, and [..] wrapping around TRUE/FALSE.
std::optional<bool> tag_boolean(const std::string& raw, const std::string& tag) {
    std::string open = "<" + tag + ">";
    std::string close = "</" + tag + ">";
    size_t a = ifind(raw, open);
    if (a == std::string::npos) return std::nullopt;
    a += open.size();
    size_t b = ifind(raw, close, a);
    if (b == std::string::npos) return std::nullopt;
    std::string value = trim(raw.substr(a, b - a));
    while (!value.empty() && (value.front() == '[' || value.front() == ']'))
        value.erase(value.begin());
    while (!value.empty() && (value.back() == '[' || value.back() == ']')) value.pop_back();
    value = trim(value);
    if (iequals(value, "TRUE")) return true;
    if (iequals(value, "FALSE")) return false;
    return std::nullopt;
}

}  // namespace

EquivalenceVerdict parse_judgment(const std::string& raw) {
    auto format = tag_boolean(raw, "format");
    auto equivalent = tag_boolean(raw, "equivalent");
    if (!format || !equivalent)
        throw DataError("unparseable equivalence judgment: " + raw);
    EquivalenceVerdict verdict;
    verdict.format_required = *format;
    verdict.equivalent = *equivalent;
    verdict.method = EquivalenceMethod::kJudged;
    verdict.raw_judgment = raw;
    return verdict;
}

EquivalenceVerdict judge_equivalent(const McqProblem& problem, const std::string& a,
                                    const std::string& b, const std::string& judge_model,
                                    const PromptLibrary& prompts, Gateway& gateway) {
    RenderedPrompt prompt = prompts.render("equivalence_judge",
                                           {{"problem_formulation", problem.question_text},
                                            {"answer_a", a},
                                            {"answer_b", b}});
    ChatRequest req;
    req.model_id = judge_model;
    req.system_text = prompt.system;
    req.user_text = prompt.user;
    req.mode = ChatMode::kDirect;
    req.decoding = {0.0, true};
    ChatResponse resp = gateway.complete(req);
    return parse_judgment(resp.output_text);
}

MatchOutcome match_candidates(const CandidateMultiset& candidates, const McqProblem& problem,
                              Judge& judge, std::vector<JudgmentRecord>* log) {
    MatchOutcome outcome;
    outcome.repetitions = candidates.total_multiplicity() - candidates.support_size();

    auto record = [&](const std::string& a, const std::string& b, bool eq,
                      EquivalenceMethod method) {
        if (log) log->push_back({problem.id, a, b, eq, method});
    };

    std::array<bool, 3> gold_used{false, false, false};
    for (const auto& entry : candidates.entries) {
        const std::string& c = entry.answer;
        int paired = -1;

        for (int g = 0; g < 3 && paired < 0; ++g) {
            if (gold_used[g]) continue;
            if (exact_equivalent(c, problem.gold_distractors[g])) {
                paired = g;
                record(c, problem.gold_distractors[g], true, EquivalenceMethod::kExact);
            }
        }
        if (paired < 0 && exact_equivalent(c, problem.correct_answer)) {
            outcome.correct_hits += entry.multiplicity;
            record(c, problem.correct_answer, true, EquivalenceMethod::kExact);
            continue;
        }
        for (int g = 0; g < 3 && paired < 0; ++g) {
            if (gold_used[g]) continue;
            try {
                bool eq = judge.equivalent(problem, c, problem.gold_distractors[g]);
                record(c, problem.gold_distractors[g], eq, EquivalenceMethod::kJudged);
                if (eq) paired = g;
            } catch (const std::exception& e) {
                outcome.warnings.push_back("judge failed for ('" + c + "', '" +
                                           problem.gold_distractors[g] + "'): " + e.what());
            }
        }
        if (paired >= 0) {
            gold_used[paired] = true;
            outcome.matched_gold.push_back(problem.gold_distractors[paired]);
            outcome.pairing.emplace_back(c, problem.gold_distractors[paired]);
            continue;
        }
        try {
            bool eq = judge.equivalent(problem, c, problem.correct_answer);
            record(c, problem.correct_answer, eq, EquivalenceMethod::kJudged);
            if (eq) outcome.correct_hits += entry.multiplicity;
        } catch (const std::exception& e) {
            outcome.warnings.push_back("judge failed for ('" + c + "', correct answer): " +
                                       e.what());
        }
    }
    outcome.matched_count = static_cast<int>(outcome.pairing.size());
    return outcome;
}

}  // namespace distrace
