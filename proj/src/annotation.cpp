#include "distrace/annotation.hpp"

#include <algorithm>

#include "distrace/errors.hpp"
#include "distrace/text.hpp"

namespace distrace {

namespace {

const std::array<std::string, kTagCount> kTagNames = {
    "INTER", "CORR", "ERR_DESC", "INST", "ERR_SIM", "PLAUS", "CURATE", "RECON"};

}  // namespace

const std::array<StrategyTag, kTagCount>& all_tags() {
    static const std::array<StrategyTag, kTagCount> tags = {
        StrategyTag::kInter, StrategyTag::kCorr,   StrategyTag::kErrDesc, StrategyTag::kInst,
        StrategyTag::kErrSim, StrategyTag::kPlaus, StrategyTag::kCurate,  StrategyTag::kRecon};
    return tags;
}

std::string to_string(StrategyTag tag) { return kTagNames[static_cast<size_t>(tag)]; }

std::optional<StrategyTag> tag_from_string(const std::string& name) {
    for (size_t i = 0; i < kTagCount; ++i)
        if (kTagNames[i] == name) return static_cast<StrategyTag>(i);
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Chunking
// ---------------------------------------------------------------------------

namespace {

/// True when a double line break starts at position j: a newline, optional
/// spaces/tabs, then another newline.
bool double_break_at(const std::string& text, size_t j) {
    if (j >= text.size() || text[j] != '\n') return false;
    size_t k = j + 1;
    while (k < text.size() && (text[k] == ' ' || text[k] == '\t')) ++k;
    return k < text.size() && text[k] == '\n';
}

}  // namespace

std::vector<std::string> chunk_trace(const std::string& text, const ChunkPolicy& policy) {
    std::vector<std::string> chunks;
    const size_t n = text.size();
    size_t start = 0;
    while (start < n) {
        size_t split = std::string::npos;
        // A break-rule chunk must exceed the soft limit and stay within the
        // hard limit; the break itself leads the next chunk.
        size_t lo = start + policy.soft_limit + 1;
        size_t hi = std::min(start + policy.hard_limit, n - 1);
        for (size_t j = lo; j <= hi && j < n; ++j) {
            if (double_break_at(text, j)) {
                split = j;
                break;
            }
        }
        if (split != std::string::npos) {
            chunks.push_back(text.substr(start, split - start));
            start = split;
        } else if (n - start > policy.hard_limit) {
            chunks.push_back(text.substr(start, policy.hard_limit));
            start += policy.hard_limit;
        } else {
            chunks.push_back(text.substr(start));
            break;
        }
    }
    return chunks;
}

std::vector<std::string> chunk_trace(const std::string& text) {
    return chunk_trace(text, ChunkPolicy{});
}

// ---------------------------------------------------------------------------
// Tag markers
// ---------------------------------------------------------------------------

namespace {

/// Matches `<NAME>` at pos where NAME is uppercase letters, digits or
/// underscores starting with a letter; returns the name or empty.
std::string marker_at(const std::string& text, size_t pos, size_t& end) {
    if (pos >= text.size() || text[pos] != '<') return {};
    size_t i = pos + 1;
    if (i >= text.size() || !(text[i] >= 'A' && text[i] <= 'Z')) return {};
    while (i < text.size() &&
           ((text[i] >= 'A' && text[i] <= 'Z') || (text[i] >= '0' && text[i] <= '9') ||
            text[i] == '_'))
        ++i;
    if (i >= text.size() || text[i] != '>') return {};
    end = i + 1;
    return text.substr(pos + 1, i - pos - 1);
}

struct Marker {
    StrategyTag tag;
    size_t stripped_offset;  // characters of stripped text before the marker
};

struct StripResult {
    std::string stripped;
    std::vector<Marker> markers;
    std::vector<std::string> unknown;
};

StripResult strip_and_locate(const std::string& tagged) {
    StripResult result;
    result.stripped.reserve(tagged.size());
    for (size_t i = 0; i < tagged.size();) {
        size_t end = 0;
        std::string name = marker_at(tagged, i, end);
        if (name.empty()) {
            result.stripped.push_back(tagged[i]);
            ++i;
            continue;
        }
        if (auto tag = tag_from_string(name)) {
            result.markers.push_back({*tag, result.stripped.size()});
        } else {
            result.unknown.push_back(name);
        }
        i = end;
    }
    return result;
}

/// Longest diverging region of two non-whitespace character sequences,
/// reported as "...context..." snippets for the fidelity error message.
std::string divergence_report(const std::string& a, const std::string& b) {
    size_t prefix = 0;
    while (prefix < a.size() && prefix < b.size() && a[prefix] == b[prefix]) ++prefix;
    size_t suffix = 0;
    while (suffix < a.size() - prefix && suffix < b.size() - prefix &&
           a[a.size() - 1 - suffix] == b[b.size() - 1 - suffix])
        ++suffix;
    auto snippet = [&](const std::string& s) {
        size_t len = s.size() - prefix - suffix;
        std::string mid = s.substr(prefix, std::min<size_t>(len, 60));
        if (len > 60) mid += "...";
        return mid;
    };
    return "diverges at non-whitespace position " + std::to_string(prefix) + ": original '" +
           snippet(a) + "' vs reproduction '" + snippet(b) + "'";
}

}  // namespace

std::string strip_markers(const std::string& tagged_text, std::vector<std::string>* unknown_tags) {
    StripResult result = strip_and_locate(tagged_text);
    if (unknown_tags)
        unknown_tags->insert(unknown_tags->end(), result.unknown.begin(), result.unknown.end());
    return result.stripped;
}

AnnotatedTrace parse_annotations(const std::string& tagged_text,
                                 const std::string& original_text) {
    StripResult stripped = strip_and_locate(tagged_text);

    AnnotatedTrace trace;
    trace.original_text = original_text;
    for (const auto& name : stripped.unknown)
        trace.diagnostics.push_back("unknown tag <" + name + "> dropped");

    // Whitespace-insensitive alignment: the reproduction must match the
    // original in its non-whitespace characters.
    std::string orig_nw = strip_whitespace(original_text);
    std::string repr_nw = strip_whitespace(stripped.stripped);
    if (orig_nw != repr_nw)
        throw DataError("annotation fidelity violation: " +
                        divergence_report(orig_nw, repr_nw));

    // Map k = "non-whitespace characters before the marker" to the offset
    // just past the k-th non-whitespace character of the original.
    std::vector<size_t> nonws_end_offset;  // nonws_end_offset[k-1] = offset after k-th char
    nonws_end_offset.reserve(orig_nw.size());
    for (size_t i = 0; i < original_text.size(); ++i)
        if (!is_space(original_text[i])) nonws_end_offset.push_back(i + 1);

    // Non-whitespace prefix counts of the stripped reproduction.
    std::vector<size_t> prefix_counts(stripped.stripped.size() + 1, 0);
    for (size_t i = 0; i < stripped.stripped.size(); ++i)
        prefix_counts[i + 1] = prefix_counts[i] + (is_space(stripped.stripped[i]) ? 0 : 1);

    size_t prev_end = 0;
    for (const auto& marker : stripped.markers) {
        size_t k = prefix_counts[marker.stripped_offset];
        size_t end = k == 0 ? 0 : nonws_end_offset[k - 1];
        if (end <= prev_end) {
            trace.diagnostics.push_back("empty span for <" + to_string(marker.tag) +
                                        "> at offset " + std::to_string(end) + " dropped");
            continue;
        }
        AnnotatedSpan span;
        span.tag = marker.tag;
        span.start_offset = prev_end;
        span.end_offset = end;
        span.text = original_text.substr(prev_end, end - prev_end);
        trace.spans.push_back(std::move(span));
        prev_end = end;
    }
    return trace;
}

std::string render_tagged(const AnnotatedTrace& trace) {
    std::string out;
    out.reserve(trace.original_text.size() + trace.spans.size() * 8);
    size_t cursor = 0;
    for (const auto& span : trace.spans) {
        out += trace.original_text.substr(cursor, span.end_offset - cursor);
        out += "<" + to_string(span.tag) + ">";
        cursor = span.end_offset;
    }
    out += trace.original_text.substr(cursor);
    return out;
}

// ---------------------------------------------------------------------------
// Grounded examples
// ---------------------------------------------------------------------------

std::string TagExamples::to_prompt_block() const {
    std::string block;
    for (size_t i = 0; i < kTagCount; ++i) {
        if (!per_tag[i]) continue;
        block += "<" + to_string(static_cast<StrategyTag>(i)) + ">: ";
        const auto& examples = *per_tag[i];
        for (size_t j = 0; j < examples.size(); ++j) {
            if (j) block += "; ";
            block += examples[j];
        }
        block += "\n";
    }
    if (!block.empty()) block.pop_back();
    return block;
}

TagExamples parse_tag_examples(const std::string& block) {
    TagExamples examples;
    std::array<bool, kTagCount> seen{};
    for (const std::string& raw_line : split_lines(block)) {
        std::string line = trim(raw_line);
        if (line.empty()) continue;
        size_t end = 0;
        std::string name = marker_at(line, 0, end);
        if (name.empty() || end >= line.size() || line[end] != ':')
            continue;  // prose the model added around the block
        auto tag = tag_from_string(name);
        if (!tag) throw DataError("examples block: unknown tag <" + name + ">");
        size_t idx = static_cast<size_t>(*tag);
        if (seen[idx]) {
            examples.warnings.push_back("duplicate line for <" + name + "> ignored");
            continue;
        }
        seen[idx] = true;
        std::string payload = trim(line.substr(end + 1));
        if (payload == "(none)" || payload.empty()) continue;  // stays nullopt
        std::vector<std::string> items;
        size_t start = 0;
        while (start <= payload.size()) {
            size_t semi = payload.find(';', start);
            std::string item = trim(semi == std::string::npos
                                        ? payload.substr(start)
                                        : payload.substr(start, semi - start));
            if (!item.empty()) items.push_back(item);
            if (semi == std::string::npos) break;
            start = semi + 1;
        }
        if (items.size() > 3) {
            examples.warnings.push_back("more than 3 examples for <" + name + ">, truncated");
            items.resize(3);
        }
        if (!items.empty()) examples.per_tag[idx] = std::move(items);
    }
    for (size_t i = 0; i < kTagCount; ++i)
        if (!seen[i])
            examples.warnings.push_back("no line for <" + to_string(static_cast<StrategyTag>(i)) +
                                        ">, treated as none");
    return examples;
}

TagExamples extract_examples(const std::string& trace, const std::string& model_id,
                             const PromptLibrary& prompts, Gateway& gateway) {
    if (trace.empty()) throw DataError("extract_examples: empty trace");
    RenderedPrompt prompt = prompts.render(
        "example_extraction",
        {{"taxonomy_description", prompts.asset("taxonomy_description")}, {"trace", trace}});
    ChatRequest req;
    req.model_id = model_id;
    req.system_text = prompt.system;
    req.user_text = prompt.user;
    req.mode = ChatMode::kDirect;
    req.decoding = {0.0, true};
    ChatResponse resp = gateway.complete(req);
    return parse_tag_examples(resp.output_text);
}

std::string annotate_chunk(const std::string& chunk, const TagExamples& examples,
                           const std::string& model_id, const PromptLibrary& prompts,
                           Gateway& gateway) {
    RenderedPrompt prompt =
        prompts.render("chunk_annotation",
                       {{"taxonomy_description", prompts.asset("taxonomy_description")},
                        {"extracted_examples", examples.to_prompt_block()},
                        {"trace_chunk", chunk}});
    ChatRequest req;
    req.model_id = model_id;
    req.system_text = prompt.system;
    req.user_text = prompt.user;
    req.mode = ChatMode::kDirect;
    req.decoding = {0.0, true};
    return gateway.complete(req).output_text;
}

std::string merge_chunks(const std::vector<std::string>& tagged_chunks) {
    std::string merged;
    for (const auto& c : tagged_chunks) merged += c;
    return merged;
}

AnnotatedTrace annotate_trace(const std::string& trace, const std::string& model_id,
                              const PromptLibrary& prompts, Gateway& gateway,
                              size_t max_in_flight) {
    if (trace.empty()) return AnnotatedTrace{};

    TagExamples examples = extract_examples(trace, model_id, prompts, gateway);
    std::vector<std::string> chunks = chunk_trace(trace);

    std::vector<ChatRequest> requests;
    requests.reserve(chunks.size());
    const std::string taxonomy = prompts.asset("taxonomy_description");
    const std::string example_block = examples.to_prompt_block();
    for (const auto& chunk : chunks) {
        RenderedPrompt prompt = prompts.render("chunk_annotation",
                                               {{"taxonomy_description", taxonomy},
                                                {"extracted_examples", example_block},
                                                {"trace_chunk", chunk}});
        ChatRequest req;
        req.model_id = model_id;
        req.system_text = prompt.system;
        req.user_text = prompt.user;
        req.mode = ChatMode::kDirect;
        req.decoding = {0.0, true};
        requests.push_back(std::move(req));
    }
    BatchResult batch = gateway.batch_complete(requests, max_in_flight);
    if (!batch.all_ok()) {
        std::string msg = "annotation failed for chunk(s)";
        for (const auto& f : batch.failures)
            msg += " " + std::to_string(f.index) + " (" + f.message + ")";
        throw BackendError(msg);
    }

    std::vector<std::string> tagged_chunks;
    tagged_chunks.reserve(chunks.size());
    for (size_t i = 0; i < chunks.size(); ++i) {
        const std::string& tagged = batch.responses[i]->output_text;
        std::string reproduction = strip_whitespace(strip_markers(tagged));
        if (reproduction != strip_whitespace(chunks[i]))
            throw DataError("annotation fidelity violation in chunk " + std::to_string(i));
        tagged_chunks.push_back(tagged);
    }

    AnnotatedTrace annotated = parse_annotations(merge_chunks(tagged_chunks), trace);
    for (const auto& w : examples.warnings) annotated.diagnostics.push_back("examples: " + w);
    return annotated;
}

}  // namespace distrace
