#include "distrace/generation.hpp"

#include <algorithm>

#include "distrace/errors.hpp"
#include "distrace/text.hpp"

namespace distrace {

std::string to_string(Variant v) {
    switch (v) {
        case Variant::kDirect: return "direct";
        case Variant::kCot: return "cot";
        case Variant::kReasoning: return "reasoning";
        case Variant::kDirectReveal: return "direct_reveal";
        case Variant::kReasoningReveal: return "reasoning_reveal";
        case Variant::kStructured: return "structured";
    }
    return "direct";
}

Variant variant_from_string(const std::string& s) {
    if (s == "direct") return Variant::kDirect;
    if (s == "cot") return Variant::kCot;
    if (s == "reasoning") return Variant::kReasoning;
    if (s == "direct_reveal") return Variant::kDirectReveal;
    if (s == "reasoning_reveal") return Variant::kReasoningReveal;
    if (s == "structured") return Variant::kStructured;
    throw ConfigError("unknown variant: " + s);
}

std::string variant_template(Variant v) {
    switch (v) {
        case Variant::kDirect:
        case Variant::kReasoning: return "distractor_direct";
        case Variant::kCot: return "distractor_cot";
        case Variant::kDirectReveal:
        case Variant::kReasoningReveal: return "distractor_direct_reveal";
        case Variant::kStructured: return "distractor_structured";
    }
    return "distractor_direct";
}

ChatMode variant_mode(Variant v) {
    switch (v) {
        case Variant::kDirect:
        case Variant::kDirectReveal: return ChatMode::kDirect;
        case Variant::kCot: return ChatMode::kCot;
        case Variant::kReasoning:
        case Variant::kReasoningReveal:
        case Variant::kStructured: return ChatMode::kReasoning;
    }
    return ChatMode::kDirect;
}

namespace {

bool is_markup(char c) { return c == '*' || c == '_' || c == '#' || c == '`'; }

/// Matches `Distractor{k}:` at pos, tolerating markup wrappers around the
/// label and between the label and the colon. Returns the index just past
/// the colon (and any closing markup), or npos.
size_t match_label(const std::string& text, size_t pos, const std::string& label) {
    size_t i = pos;
    if (!iequals(std::string_view(text).substr(i, label.size()), label))
        return std::string::npos;
    i += label.size();
    while (i < text.size() && is_markup(text[i])) ++i;
    if (i >= text.size() || text[i] != ':') return std::string::npos;
    ++i;
    while (i < text.size() && is_markup(text[i])) ++i;
    return i;
}

/// First occurrence of the label anywhere in [from, text.size()).
size_t find_label(const std::string& text, const std::string& label, size_t from,
                  size_t& value_start) {
    for (size_t i = from; i + label.size() <= text.size(); ++i) {
        size_t after = match_label(text, i, label);
        if (after != std::string::npos) {
            value_start = after;
            return i;
        }
    }
    return std::string::npos;
}

std::string line_value(const std::string& text, size_t value_start) {
    size_t eol = text.find('\n', value_start);
    std::string value = eol == std::string::npos ? text.substr(value_start)
                                                 : text.substr(value_start, eol - value_start);
    // Strip markup wrappers that close the label's emphasis (e.g. **Distractor1:** 0.4).
    std::string trimmed = trim(value);
    return trimmed;
}

constexpr const char* kFinalAnswerMarker = "[Final Answer]";
constexpr const char* kStepByStepMarker = "[Step-By-Step]";

}  // namespace

ParsedDistractors parse_distractors(const std::string& raw_output, int n) {
    ParsedDistractors result;
    size_t region_start = 0;
    size_t final_at = ifind(raw_output, kFinalAnswerMarker);
    if (final_at != std::string::npos)
        region_start = final_at + std::string(kFinalAnswerMarker).size();

    size_t cursor = region_start;
    for (int k = 1; k <= n; ++k) {
        std::string label = "Distractor" + std::to_string(k);
        size_t value_start = 0;
        size_t at = find_label(raw_output, label, cursor, value_start);
        if (at == std::string::npos) {
            // Labels may appear out of order; rescan the whole region.
            at = find_label(raw_output, label, region_start, value_start);
        }
        if (at == std::string::npos) {
            result.parse_ok = false;
            result.issues.push_back("missing label " + label + ":");
            continue;
        }
        std::string value = line_value(raw_output, value_start);
        if (value.empty()) {
            result.parse_ok = false;
            result.issues.push_back("empty value after " + label + ":");
            continue;
        }
        result.candidates.add(value);
        cursor = at + label.size();
    }
    return result;
}

std::optional<std::string> extract_trace(Variant variant, const ChatResponse& response) {
    switch (variant_mode(variant)) {
        case ChatMode::kReasoning: return response.reasoning_trace;
        case ChatMode::kCot: {
            size_t begin = ifind(response.output_text, kStepByStepMarker);
            if (begin == std::string::npos) return std::nullopt;
            begin += std::string(kStepByStepMarker).size();
            size_t end = ifind(response.output_text, kFinalAnswerMarker, begin);
            std::string section = end == std::string::npos
                                      ? response.output_text.substr(begin)
                                      : response.output_text.substr(begin, end - begin);
            return trim(section);
        }
        case ChatMode::kDirect: return std::nullopt;
    }
    return std::nullopt;
}

std::vector<GenerationResult> run_campaign(const std::vector<McqProblem>& problems,
                                           const GenerationConfig& config,
                                           const PromptLibrary& prompts, Gateway& gateway,
                                           size_t max_in_flight) {
    if (problems.empty()) throw DataError("run_campaign: empty corpus");
    const std::string template_name = variant_template(config.variant);

    std::vector<ChatRequest> requests;
    requests.reserve(problems.size());
    for (const auto& p : problems) {
        Bindings bindings{{"problem_formulation", p.question_text}};
        if (config.variant == Variant::kDirectReveal || config.variant == Variant::kReasoningReveal)
            bindings["correct_answer"] = p.correct_answer;
        if (config.variant == Variant::kStructured)
            bindings["n"] = std::to_string(config.n_distractors);
        RenderedPrompt prompt = prompts.render(template_name, bindings);
        ChatRequest req;
        req.model_id = config.model_id;
        req.system_text = prompt.system;
        req.user_text = prompt.user;
        req.mode = variant_mode(config.variant);
        req.decoding = config.decoding;
        requests.push_back(std::move(req));
    }

    BatchResult batch = gateway.batch_complete(requests, max_in_flight);

    std::vector<GenerationResult> results(problems.size());
    for (size_t i = 0; i < problems.size(); ++i) {
        GenerationResult& r = results[i];
        r.problem_id = problems[i].id;
        r.config = config;
        if (!batch.responses[i]) continue;
        const ChatResponse& resp = *batch.responses[i];
        r.raw_output = resp.output_text;
        r.trace = extract_trace(config.variant, resp);
        ParsedDistractors parsed = parse_distractors(resp.output_text, config.n_distractors);
        r.candidates = parsed.candidates;
        r.parse_ok = parsed.parse_ok;
    }
    for (const auto& failure : batch.failures) results[failure.index].error = failure.message;
    return results;
}

SimulatedError simulate_student_error(const McqProblem& problem, const std::string& error,
                                      const std::string& model_id, const PromptLibrary& prompts,
                                      Gateway& gateway) {
    if (error.empty()) throw DataError("simulate_student_error: empty error description");
    RenderedPrompt prompt = prompts.render(
        "error_simulation", {{"problem_formulation", problem.question_text}, {"error", error}});
    ChatRequest req;
    req.model_id = model_id;
    req.system_text = prompt.system;
    req.user_text = prompt.user;
    req.mode = ChatMode::kReasoning;
    ChatResponse resp = gateway.complete(req);

    static const std::string marker = "Incorrect Student Answer:";
    size_t at = resp.output_text.rfind(marker);
    if (at == std::string::npos)
        throw DataError("simulate_student_error: marker 'Incorrect Student Answer:' absent in: " +
                        resp.output_text);
    SimulatedError out;
    out.full_text = resp.output_text;
    out.final_answer = trim(resp.output_text.substr(at + marker.size()));
    return out;
}

StepSolution parse_step_solution(const std::string& text) {
    StepSolution solution;
    static const std::string final_marker = "[FINAL ANSWER]";
    std::vector<std::pair<size_t, int>> step_marks;  // (offset, k)
    for (size_t i = 0; i + 7 < text.size(); ++i) {
        if (text.compare(i, 6, "[STEP-") != 0) continue;
        size_t j = i + 6;
        int k = 0;
        bool any = false;
        while (j < text.size() && text[j] >= '0' && text[j] <= '9') {
            k = k * 10 + (text[j] - '0');
            ++j;
            any = true;
        }
        if (any && j < text.size() && text[j] == ']') step_marks.emplace_back(i, k);
    }
    size_t final_at = text.find(final_marker);
    if (final_at == std::string::npos)
        throw DataError("step solution: missing [FINAL ANSWER] section");

    for (size_t s = 0; s < step_marks.size(); ++s) {
        auto [offset, k] = step_marks[s];
        if (offset > final_at) break;
        size_t body = text.find(']', offset) + 1;
        size_t end = s + 1 < step_marks.size() ? std::min(step_marks[s + 1].first, final_at)
                                               : final_at;
        solution.steps.push_back(trim(text.substr(body, end - body)));
        if (k != static_cast<int>(s) + 1) solution.contiguous_numbering = false;
    }
    solution.final_answer = trim(text.substr(final_at + final_marker.size()));
    return solution;
}

StepSolution solve_step_by_step(const McqProblem& problem, const std::string& model_id,
                                const PromptLibrary& prompts, Gateway& gateway) {
    RenderedPrompt prompt =
        prompts.render("math_solver", {{"problem_formulation", problem.question_text},
                                       {"final_answer", problem.correct_answer}});
    ChatRequest req;
    req.model_id = model_id;
    req.system_text = prompt.system;
    req.user_text = prompt.user;
    req.mode = ChatMode::kDirect;
    ChatResponse resp = gateway.complete(req);
    return parse_step_solution(resp.output_text);
}

}  // namespace distrace
