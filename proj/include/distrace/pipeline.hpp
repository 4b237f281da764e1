#pragma once

#include <cstdint>
#include <string>

#include "distrace/corpus.hpp"
#include "distrace/gateway.hpp"
#include "distrace/generation.hpp"

namespace distrace {

/// Pipeline configuration file. Relative paths resolve against the config
/// file's directory; the seed feeds every sampling decision and is recorded
/// in each stage manifest.
struct RunConfig {
    std::string config_path;
    std::string corpus_path;
    std::string backend_path;
    std::string outdir;
    std::string prompt_dir;  // empty: DISTRACE_PROMPT_DIR or build default
    uint64_t seed = 0;
    size_t max_in_flight = 4;

    FilterCriteria filter;

    struct Campaign {
        std::string model_id;
        Variant variant = Variant::kReasoning;
        Decoding decoding{0.0, true};
        int n_distractors = 3;
    } campaign;

    struct JudgeConfig {
        std::string model_id;
    } judge;

    struct AnnotationConfig {
        std::string model_id;
        size_t window = 30;
        size_t sample_per_stratum = 0;  // 0 = annotate everything
    } annotation;

    struct AnalysisConfig {
        size_t bins = 5;
        double threshold = 0.15;
        size_t top_k = 3;
        double confidence = 0.95;
        bool classify_solve_inject = false;
        std::string labeler_model;  // defaults to the annotation model
        bool per_trace_temporal = false;
        bool sliding_window_transitions = false;
    } analysis;
};

RunConfig load_run_config(const std::string& path);

/// Stage entry points. Outputs land under <outdir>/<stage>/ with a
/// manifest.json recording the seed and the digests of all inputs and
/// outputs. Each throws ConfigError/DataError/BackendError; on success the
/// stage is rerunnable byte-identically against a warm cache.
void cmd_ingest(const RunConfig& config);
void cmd_generate(const RunConfig& config);
void cmd_score(const RunConfig& config);
void cmd_annotate(const RunConfig& config);
void cmd_validate(const RunConfig& config, const std::string& gold_path);
void cmd_analyze(const RunConfig& config);

}  // namespace distrace
