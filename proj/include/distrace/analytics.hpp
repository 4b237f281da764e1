#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "distrace/agreement.hpp"
#include "distrace/annotation.hpp"
#include "distrace/gateway.hpp"
#include "distrace/metrics.hpp"
#include "distrace/prompts.hpp"

namespace distrace {

/// Tags in span order.
std::vector<StrategyTag> tag_sequence(const AnnotatedTrace& trace);

struct OccurrenceStats {
    std::array<MeanCi, kTagCount> per_tag;
    size_t n = 0;
};

OccurrenceStats occurrence_stats(const std::vector<AnnotatedTrace>& traces,
                                 double confidence = 0.95);

struct CoverageStats {
    std::array<double, kTagCount> fraction{};  // traces with >= 1 occurrence
    size_t n = 0;
};

CoverageStats coverage_stats(const std::vector<AnnotatedTrace>& traces);

/// Pooled occurrence counts per (temporal bin, tag) with per-bin proportions.
/// A tag occurrence lands in bin floor(bins * end_offset / length), clamped
/// to the last bin.
struct TemporalHistogram {
    size_t bins = 5;
    std::vector<std::array<int64_t, kTagCount>> tag_counts;   // [bin][tag]
    std::vector<std::array<double, kTagCount>> proportion;    // [bin][tag]
    std::vector<bool> empty_bin;
    std::vector<std::string> warnings;  // zero-length traces skipped
};

enum class TemporalPooling {
    kPooled,           // counts pooled across traces (default)
    kPerTraceAverage,  // per-trace proportions averaged over traces hitting the bin
};

TemporalHistogram temporal_histogram(const std::vector<AnnotatedTrace>& traces, size_t bins = 5,
                                     TemporalPooling pooling = TemporalPooling::kPooled);

/// Step-indexed transition tables over each trace's tag-sequence prefix of
/// length <= max_len: step k maps the tag at position k to the tag at
/// position k+1. Rows are normalized; node_share[k] is the tag occupancy at
/// position k among traces long enough to reach it.
struct TransitionModel {
    size_t max_len = 4;
    /// probability[step][source][target]; rows with no outgoing mass hold
    /// all zeros and defined[step][source] = false.
    std::vector<std::array<std::array<double, kTagCount>, kTagCount>> probability;
    std::vector<std::array<std::array<int64_t, kTagCount>, kTagCount>> counts;
    std::vector<std::array<bool, kTagCount>> defined;
    /// node_share[position][tag], positions 0..max_len-1.
    std::vector<std::array<double, kTagCount>> node_share;
};

enum class SequenceReading {
    kPrefix,         // positions 1..max_len of each trace (default)
    kSlidingWindow,  // one bigram table over all consecutive pairs
};

TransitionModel transition_model(const std::vector<AnnotatedTrace>& traces, size_t max_len = 4,
                                 SequenceReading reading = SequenceReading::kPrefix);

struct TransitionEdge {
    size_t step;
    StrategyTag source;
    StrategyTag target;
    double probability;
};

/// Edges carrying strictly more than `threshold` of their source's outgoing
/// mass (">15%": an edge at exactly the threshold is excluded).
std::vector<TransitionEdge> dominant_edges(const TransitionModel& model, double threshold = 0.15);

/// For each (step, source) present in both models, the overlap of the top-k
/// above-threshold target sets normalized by the smaller set size, averaged
/// over pairs where both sets are nonempty. Absent when no pair qualifies.
std::optional<double> model_agreement(const TransitionModel& m1, const TransitionModel& m2,
                                      double threshold = 0.15, size_t top_k = 3);

struct SolveInjectLabel {
    bool solve_first = false;
    bool inject_from_solution = false;
    std::string solve_first_quote;
    std::string inject_quote;
};

/// Parses the four-line labeling grammar (two DISCUSSION lines, two
/// YES/NO LABEL lines, case-insensitive).
SolveInjectLabel parse_solve_inject(const std::string& text);

/// Renders the solve-first labeling template over the raw trace text and
/// parses the result.
SolveInjectLabel classify_solve_inject(const std::string& trace, const std::string& model_id,
                                       const PromptLibrary& prompts, Gateway& gateway);

}  // namespace distrace
