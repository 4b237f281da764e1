#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "distrace/gateway.hpp"
#include "distrace/prompts.hpp"

namespace distrace {

/// The eight-strategy taxonomy. Closed set; parsers reject anything else.
enum class StrategyTag { kInter, kCorr, kErrDesc, kInst, kErrSim, kPlaus, kCurate, kRecon };

inline constexpr size_t kTagCount = 8;

const std::array<StrategyTag, kTagCount>& all_tags();
std::string to_string(StrategyTag tag);
std::optional<StrategyTag> tag_from_string(const std::string& name);

struct AnnotatedSpan {
    std::string text;  // substring of the original trace
    StrategyTag tag = StrategyTag::kInter;
    size_t start_offset = 0;
    size_t end_offset = 0;
};

struct AnnotatedTrace {
    std::string original_text;
    std::vector<AnnotatedSpan> spans;  // ordered, non-overlapping, tiled from 0
    std::vector<std::string> diagnostics;
};

/// Scan left to right; once the running segment exceeds 500 characters,
/// split at the next double line break (two newlines, optionally separated
/// by spaces/tabs; the break leads the next chunk); hard-split at exactly
/// 2000 characters when no break arrives. Concatenation equals the input.
std::vector<std::string> chunk_trace(const std::string& text);

struct ChunkPolicy {
    size_t soft_limit = 500;
    size_t hard_limit = 2000;
};

std::vector<std::string> chunk_trace(const std::string& text, const ChunkPolicy& policy);

/// Up to three representative snippets per tag; nullopt marks a tag the
/// extraction step reported as absent.
struct TagExamples {
    std::array<std::optional<std::vector<std::string>>, kTagCount> per_tag;
    std::vector<std::string> warnings;

    /// `<TAG>: example1; example2` lines for present tags only (absent tags
    /// are omitted from the downstream annotation prompt).
    std::string to_prompt_block() const;
};

/// Parses the `<TAG>: example1; example2` grammar, one line per tag;
/// `(none)` is the explicit none-marker. Unknown tag lines throw DataError;
/// missing tag lines map to none with a warning; more than three examples
/// truncate with a warning.
TagExamples parse_tag_examples(const std::string& block);

/// Removes every `<UPPERCASE_NAME>` marker; collects unknown (non-taxonomy)
/// marker names when a diagnostics sink is given.
std::string strip_markers(const std::string& tagged_text,
                          std::vector<std::string>* unknown_tags = nullptr);

/// Extracts `<TAG>` markers; each marker closes a span beginning after the
/// previous marker (or text start). The model's reproduction may differ
/// from the original in whitespace only; offsets are recovered by aligning
/// the non-whitespace character sequences, and a non-whitespace divergence
/// throws DataError reporting the diverging region. Unknown tags are
/// dropped into diagnostics.
AnnotatedTrace parse_annotations(const std::string& tagged_text, const std::string& original_text);

/// Inserts `<TAG>` markers into the original text at each span end.
std::string render_tagged(const AnnotatedTrace& trace);

/// Renders the example-extraction template against the trace and parses the
/// examples block.
TagExamples extract_examples(const std::string& trace, const std::string& model_id,
                             const PromptLibrary& prompts, Gateway& gateway);

/// Renders the chunk-annotation template (taxonomy description + grounded
/// examples + chunk) and returns the model's tagged reproduction.
std::string annotate_chunk(const std::string& chunk, const TagExamples& examples,
                           const std::string& model_id, const PromptLibrary& prompts,
                           Gateway& gateway);

/// Order-preserving concatenation, no separator.
std::string merge_chunks(const std::vector<std::string>& tagged_chunks);

/// extract_examples -> chunk_trace -> annotate_chunk per chunk (fanned out
/// through the gateway) -> merge_chunks -> parse_annotations. Per-chunk
/// fidelity violations throw DataError naming the chunk.
AnnotatedTrace annotate_trace(const std::string& trace, const std::string& model_id,
                              const PromptLibrary& prompts, Gateway& gateway,
                              size_t max_in_flight = 4);

}  // namespace distrace
