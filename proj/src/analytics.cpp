#include "distrace/analytics.hpp"

#include <algorithm>
#include <cmath>

#include "distrace/errors.hpp"
#include "distrace/text.hpp"

namespace distrace {

std::vector<StrategyTag> tag_sequence(const AnnotatedTrace& trace) {
    std::vector<StrategyTag> tags;
    tags.reserve(trace.spans.size());
    for (const auto& span : trace.spans) tags.push_back(span.tag);
    return tags;
}

OccurrenceStats occurrence_stats(const std::vector<AnnotatedTrace>& traces, double confidence) {
    if (traces.empty()) throw DataError("occurrence_stats: no traces");
    OccurrenceStats stats;
    stats.n = traces.size();
    for (size_t t = 0; t < kTagCount; ++t) {
        std::vector<double> counts;
        counts.reserve(traces.size());
        for (const auto& trace : traces) {
            int c = 0;
            for (const auto& span : trace.spans)
                if (static_cast<size_t>(span.tag) == t) ++c;
            counts.push_back(static_cast<double>(c));
        }
        stats.per_tag[t] = mean_ci(counts, confidence);
    }
    return stats;
}

CoverageStats coverage_stats(const std::vector<AnnotatedTrace>& traces) {
    if (traces.empty()) throw DataError("coverage_stats: no traces");
    CoverageStats stats;
    stats.n = traces.size();
    for (const auto& trace : traces) {
        std::array<bool, kTagCount> present{};
        for (const auto& span : trace.spans) present[static_cast<size_t>(span.tag)] = true;
        for (size_t t = 0; t < kTagCount; ++t)
            if (present[t]) stats.fraction[t] += 1.0;
    }
    for (size_t t = 0; t < kTagCount; ++t) stats.fraction[t] /= static_cast<double>(traces.size());
    return stats;
}

TemporalHistogram temporal_histogram(const std::vector<AnnotatedTrace>& traces, size_t bins,
                                     TemporalPooling pooling) {
    if (bins == 0) throw DataError("temporal_histogram: bins must be positive");
    TemporalHistogram hist;
    hist.bins = bins;
    hist.tag_counts.assign(bins, {});
    hist.proportion.assign(bins, {});
    hist.empty_bin.assign(bins, true);

    auto bin_of = [&](size_t end_offset, size_t length) {
        size_t b = static_cast<size_t>(
            std::floor(static_cast<double>(bins) * static_cast<double>(end_offset) /
                       static_cast<double>(length)));
        return std::min(b, bins - 1);
    };

    // Per-trace proportion accumulators for the averaged reading.
    std::vector<std::array<double, kTagCount>> prop_sum(bins, std::array<double, kTagCount>{});
    std::vector<int64_t> prop_n(bins, 0);

    for (size_t i = 0; i < traces.size(); ++i) {
        const auto& trace = traces[i];
        if (trace.original_text.empty()) {
            if (!trace.spans.empty())
                hist.warnings.push_back("trace " + std::to_string(i) + " has zero length, skipped");
            continue;
        }
        std::vector<std::array<int64_t, kTagCount>> local(bins, std::array<int64_t, kTagCount>{});
        for (const auto& span : trace.spans) {
            size_t b = bin_of(span.end_offset, trace.original_text.size());
            ++hist.tag_counts[b][static_cast<size_t>(span.tag)];
            ++local[b][static_cast<size_t>(span.tag)];
        }
        if (pooling == TemporalPooling::kPerTraceAverage) {
            for (size_t b = 0; b < bins; ++b) {
                int64_t total = 0;
                for (auto c : local[b]) total += c;
                if (total == 0) continue;
                for (size_t t = 0; t < kTagCount; ++t)
                    prop_sum[b][t] += static_cast<double>(local[b][t]) / static_cast<double>(total);
                ++prop_n[b];
            }
        }
    }

    for (size_t b = 0; b < bins; ++b) {
        int64_t total = 0;
        for (auto c : hist.tag_counts[b]) total += c;
        hist.empty_bin[b] = total == 0;
        if (total == 0) continue;
        if (pooling == TemporalPooling::kPooled) {
            for (size_t t = 0; t < kTagCount; ++t)
                hist.proportion[b][t] =
                    static_cast<double>(hist.tag_counts[b][t]) / static_cast<double>(total);
        } else {
            for (size_t t = 0; t < kTagCount; ++t)
                hist.proportion[b][t] = prop_sum[b][t] / static_cast<double>(prop_n[b]);
        }
    }
    return hist;
}

TransitionModel transition_model(const std::vector<AnnotatedTrace>& traces, size_t max_len,
                                 SequenceReading reading) {
    if (max_len < 2) throw DataError("transition_model: max_len must be >= 2");
    TransitionModel model;
    model.max_len = max_len;
    const size_t steps = reading == SequenceReading::kPrefix ? max_len - 1 : 1;
    model.probability.assign(steps, {});
    model.counts.assign(steps, {});
    model.defined.assign(steps, {});
    model.node_share.assign(reading == SequenceReading::kPrefix ? max_len : 1, {});

    std::vector<std::array<int64_t, kTagCount>> occupancy(model.node_share.size(),
                                                          std::array<int64_t, kTagCount>{});

    for (const auto& trace : traces) {
        std::vector<StrategyTag> seq = tag_sequence(trace);
        if (reading == SequenceReading::kPrefix) {
            size_t len = std::min(seq.size(), max_len);
            for (size_t k = 0; k < len; ++k) ++occupancy[k][static_cast<size_t>(seq[k])];
            for (size_t k = 0; k + 1 < len; ++k)
                ++model.counts[k][static_cast<size_t>(seq[k])][static_cast<size_t>(seq[k + 1])];
        } else {
            for (size_t k = 0; k < seq.size(); ++k) ++occupancy[0][static_cast<size_t>(seq[k])];
            for (size_t k = 0; k + 1 < seq.size(); ++k)
                ++model.counts[0][static_cast<size_t>(seq[k])][static_cast<size_t>(seq[k + 1])];
        }
    }

    for (size_t k = 0; k < steps; ++k) {
        for (size_t s = 0; s < kTagCount; ++s) {
            int64_t row_total = 0;
            for (size_t t = 0; t < kTagCount; ++t) row_total += model.counts[k][s][t];
            model.defined[k][s] = row_total > 0;
            if (row_total == 0) continue;
            for (size_t t = 0; t < kTagCount; ++t)
                model.probability[k][s][t] =
                    static_cast<double>(model.counts[k][s][t]) / static_cast<double>(row_total);
        }
    }
    for (size_t k = 0; k < model.node_share.size(); ++k) {
        int64_t total = 0;
        for (auto c : occupancy[k]) total += c;
        if (total == 0) continue;
        for (size_t t = 0; t < kTagCount; ++t)
            model.node_share[k][t] = static_cast<double>(occupancy[k][t]) / static_cast<double>(total);
    }
    return model;
}

std::vector<TransitionEdge> dominant_edges(const TransitionModel& model, double threshold) {
    std::vector<TransitionEdge> edges;
    for (size_t k = 0; k < model.probability.size(); ++k) {
        for (size_t s = 0; s < kTagCount; ++s) {
            if (!model.defined[k][s]) continue;
            for (size_t t = 0; t < kTagCount; ++t) {
                double p = model.probability[k][s][t];
                if (p > threshold)
                    edges.push_back({k, static_cast<StrategyTag>(s), static_cast<StrategyTag>(t), p});
            }
        }
    }
    return edges;
}

namespace {

/// Top-k above-threshold outgoing targets of one row, as a tag bitmask.
uint32_t top_targets(const std::array<double, kTagCount>& row, double threshold, size_t top_k) {
    std::vector<std::pair<double, size_t>> candidates;
    for (size_t t = 0; t < kTagCount; ++t)
        if (row[t] > threshold) candidates.emplace_back(row[t], t);
    std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    if (candidates.size() > top_k) candidates.resize(top_k);
    uint32_t mask = 0;
    for (const auto& [p, t] : candidates) mask |= (1u << t);
    return mask;
}

}  // namespace

std::optional<double> model_agreement(const TransitionModel& m1, const TransitionModel& m2,
                                      double threshold, size_t top_k) {
    size_t steps = std::min(m1.probability.size(), m2.probability.size());
    double sum = 0.0;
    size_t pairs = 0;
    for (size_t k = 0; k < steps; ++k) {
        for (size_t s = 0; s < kTagCount; ++s) {
            if (!m1.defined[k][s] || !m2.defined[k][s]) continue;
            uint32_t s1 = top_targets(m1.probability[k][s], threshold, top_k);
            uint32_t s2 = top_targets(m2.probability[k][s], threshold, top_k);
            if (s1 == 0 || s2 == 0) continue;
            int inter = __builtin_popcount(s1 & s2);
            int smaller = std::min(__builtin_popcount(s1), __builtin_popcount(s2));
            sum += static_cast<double>(inter) / static_cast<double>(smaller);
            ++pairs;
        }
    }
    if (pairs == 0) return std::nullopt;
    return sum / static_cast<double>(pairs);
}

namespace {

std::optional<bool> parse_yes_no(const std::string& value) {
    std::string v = trim(value);
    if (iequals(v, "YES")) return true;
    if (iequals(v, "NO")) return false;
    return std::nullopt;
}

}  // namespace

SolveInjectLabel parse_solve_inject(const std::string& text) {
    SolveInjectLabel label;
    std::optional<bool> solve, inject;
    for (const std::string& raw : split_lines(text)) {
        std::string line = trim(raw);
        auto try_field = [&](const char* prefix, auto&& sink) {
            size_t at = ifind(line, prefix);
            if (at != 0 || line.size() <= std::string(prefix).size()) return false;
            sink(trim(line.substr(std::string(prefix).size())));
            return true;
        };
        try_field("SOLVE_FIRST_DISCUSSION:",
                  [&](const std::string& v) { label.solve_first_quote = v; }) ||
            try_field("SOLVE_FIRST_LABEL:", [&](const std::string& v) { solve = parse_yes_no(v); }) ||
            try_field("INJECT_FROM_SOLUTION_DISCUSSION:",
                      [&](const std::string& v) { label.inject_quote = v; }) ||
            try_field("INJECT_FROM_SOLUTION_LABEL:",
                      [&](const std::string& v) { inject = parse_yes_no(v); });
    }
    if (!solve) throw DataError("solve/inject labeling: SOLVE_FIRST_LABEL missing or not YES/NO");
    if (!inject)
        throw DataError("solve/inject labeling: INJECT_FROM_SOLUTION_LABEL missing or not YES/NO");
    label.solve_first = *solve;
    label.inject_from_solution = *inject;
    return label;
}

SolveInjectLabel classify_solve_inject(const std::string& trace, const std::string& model_id,
                                       const PromptLibrary& prompts, Gateway& gateway) {
    if (trace.empty()) throw DataError("classify_solve_inject: empty trace");
    RenderedPrompt prompt = prompts.render("solve_inject_labeling", {{"trace", trace}});
    ChatRequest req;
    req.model_id = model_id;
    req.system_text = prompt.system;
    req.user_text = prompt.user;
    req.mode = ChatMode::kDirect;
    req.decoding = {0.0, true};
    ChatResponse resp = gateway.complete(req);
    return parse_solve_inject(resp.output_text);
}

}  // namespace distrace
