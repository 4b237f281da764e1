#pragma once

#include <optional>
#include <string>
#include <vector>

#include "distrace/corpus.hpp"
#include "distrace/gateway.hpp"
#include "distrace/prompts.hpp"

namespace distrace {

enum class Variant { kDirect, kCot, kReasoning, kDirectReveal, kReasoningReveal, kStructured };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

/// Template name and chat mode implied by the variant.
std::string variant_template(Variant v);
ChatMode variant_mode(Variant v);

struct GenerationConfig {
    std::string model_id;
    Variant variant = Variant::kReasoning;
    Decoding decoding;
    int n_distractors = 3;
};

/// Generated distractors with multiplicities; entries keep first-appearance
/// order of the distinct answer strings.
struct CandidateMultiset {
    struct Entry {
        std::string answer;
        int multiplicity = 1;
    };
    std::vector<Entry> entries;

    int support_size() const { return static_cast<int>(entries.size()); }
    int total_multiplicity() const {
        int sum = 0;
        for (const auto& e : entries) sum += e.multiplicity;
        return sum;
    }
    void add(const std::string& answer) {
        for (auto& e : entries)
            if (e.answer == answer) {
                ++e.multiplicity;
                return;
            }
        entries.push_back({answer, 1});
    }
};

struct ParsedDistractors {
    CandidateMultiset candidates;
    bool parse_ok = true;
    std::vector<std::string> issues;  // missing label k, empty value after label
};

struct GenerationResult {
    std::string problem_id;
    GenerationConfig config;
    std::optional<std::string> trace;
    std::string raw_output;
    CandidateMultiset candidates;
    bool parse_ok = false;
    std::optional<std::string> error;  // gateway failure for this problem
};

/// Reads the value after each label `Distractor1:` .. `Distractor{n}:`.
/// Labels match case-insensitively and tolerate markup wrappers (e.g.
/// **Distractor1:**). When a `[Final Answer]` section exists, parsing is
/// restricted to it. Values end at end-of-line and are trimmed; duplicates
/// accumulate multiplicity.
ParsedDistractors parse_distractors(const std::string& raw_output, int n);

/// One request per problem through the prompt library; responses parsed by
/// parse_distractors. Per-problem gateway failures are recorded in the
/// result and the campaign continues.
std::vector<GenerationResult> run_campaign(const std::vector<McqProblem>& problems,
                                           const GenerationConfig& config,
                                           const PromptLibrary& prompts, Gateway& gateway,
                                           size_t max_in_flight = 4);

struct SimulatedError {
    std::string full_text;
    std::string final_answer;
};

/// Renders the error-simulation template; the final answer is the text after
/// the last `Incorrect Student Answer:` marker. Throws DataError when the
/// marker is absent (the full text is in the exception message context).
SimulatedError simulate_student_error(const McqProblem& problem, const std::string& error,
                                      const std::string& model_id, const PromptLibrary& prompts,
                                      Gateway& gateway);

struct StepSolution {
    std::vector<std::string> steps;
    std::string final_answer;
    bool contiguous_numbering = true;
};

/// Parses `[STEP-k]` sections in order plus `[FINAL ANSWER]`. Missing final
/// answer throws DataError; non-contiguous numbering only flags.
StepSolution solve_step_by_step(const McqProblem& problem, const std::string& model_id,
                                const PromptLibrary& prompts, Gateway& gateway);

/// Grammar parser behind solve_step_by_step, exposed for direct use on text.
StepSolution parse_step_solution(const std::string& text);

/// The trace analyzed downstream: the provider thinking channel for
/// reasoning variants, the `[Step-By-Step]` section of raw output for CoT.
std::optional<std::string> extract_trace(Variant variant, const ChatResponse& response);

}  // namespace distrace
