#include "distrace/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "distrace/agreement.hpp"
#include "distrace/analytics.hpp"
#include "distrace/annotation.hpp"
#include "distrace/digest.hpp"
#include "distrace/equivalence.hpp"
#include "distrace/errors.hpp"
#include "distrace/io.hpp"
#include "distrace/metrics.hpp"
#include "distrace/prompts.hpp"
#include "distrace/text.hpp"

namespace distrace {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string fmt_optional(const std::optional<double>& v) {
    return v ? fmt_double(*v) : std::string();
}

fs::path stage_dir(const RunConfig& config, const std::string& stage) {
    fs::path dir = fs::path(config.outdir) / stage;
    fs::create_directories(dir);
    return dir;
}

/// Stage manifest: seed, config digest, input file digests, output digests.
class Manifest {
public:
    Manifest(const RunConfig& config, std::string stage)
        : stage_(std::move(stage)), seed_(config.seed) {
        config_digest_ = sha256_file(config.config_path);
    }
    void add_input(const std::string& path) { inputs_[path] = sha256_file(path); }
    void add_output(const fs::path& path) {
        outputs_[path.filename().string()] = sha256_file(path.string());
    }
    void write(const fs::path& dir) const {
        json obj;
        obj["stage"] = stage_;
        obj["seed"] = seed_;
        obj["config_digest"] = config_digest_;
        obj["inputs"] = inputs_;
        obj["outputs"] = outputs_;
        write_file((dir / "manifest.json").string(), obj.dump(2) + "\n");
    }

private:
    std::string stage_;
    uint64_t seed_;
    std::string config_digest_;
    std::map<std::string, std::string> inputs_;
    std::map<std::string, std::string> outputs_;
};

PromptLibrary load_prompts(const RunConfig& config) {
    return PromptLibrary::load(config.prompt_dir.empty() ? PromptLibrary::default_dir()
                                                         : config.prompt_dir);
}

std::unique_ptr<Gateway> open_gateway(const RunConfig& config) {
    if (config.backend_path.empty()) throw ConfigError("config: no backend file configured");
    return make_gateway(load_backend_config(config.backend_path));
}

std::string group_of(const std::string& model_id, Variant variant) {
    return model_id + ":" + to_string(variant);
}

fs::path require_file(const fs::path& path, const std::string& what) {
    if (!fs::exists(path)) throw DataError(what + " not found: " + path.string());
    return path;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    json obj;
    try {
        obj = json::parse(read_file(path));
    } catch (const std::exception& e) {
        throw ConfigError(std::string("run config: ") + e.what());
    }
    RunConfig config;
    config.config_path = path;
    config.corpus_path = obj.value("corpus", "");
    config.backend_path = obj.value("backend", "");
    config.outdir = obj.value("outdir", "out");
    config.prompt_dir = obj.value("prompt_dir", "");
    config.seed = obj.value("seed", 0ull);
    config.max_in_flight = obj.value("max_in_flight", 4u);

    if (obj.contains("filter")) {
        const json& f = obj["filter"];
        config.filter.drop_image_references = f.value("drop_image_references", true);
        config.filter.drop_choice_reliant = f.value("drop_choice_reliant", true);
        config.filter.require_error_descriptions = f.value("require_error_descriptions", true);
    }
    if (obj.contains("campaign")) {
        const json& c = obj["campaign"];
        config.campaign.model_id = c.value("model_id", "");
        config.campaign.variant = variant_from_string(c.value("variant", "reasoning"));
        config.campaign.decoding.temperature = c.value("temperature", 0.0);
        config.campaign.decoding.deterministic = c.value("deterministic", true);
        config.campaign.n_distractors = c.value("n_distractors", 3);
    }
    if (obj.contains("judge")) config.judge.model_id = obj["judge"].value("model_id", "");
    if (obj.contains("annotation")) {
        const json& a = obj["annotation"];
        config.annotation.model_id = a.value("model_id", "");
        config.annotation.window = a.value("window", 30u);
        config.annotation.sample_per_stratum = a.value("sample_per_stratum", 0u);
    }
    if (obj.contains("analysis")) {
        const json& a = obj["analysis"];
        config.analysis.bins = a.value("bins", 5u);
        config.analysis.threshold = a.value("threshold", 0.15);
        config.analysis.top_k = a.value("top_k", 3u);
        config.analysis.confidence = a.value("confidence", 0.95);
        config.analysis.classify_solve_inject = a.value("classify_solve_inject", false);
        config.analysis.labeler_model = a.value("labeler_model", "");
        config.analysis.per_trace_temporal = a.value("per_trace_temporal", false);
        config.analysis.sliding_window_transitions = a.value("sliding_window_transitions", false);
    }
    if (config.analysis.labeler_model.empty())
        config.analysis.labeler_model = config.annotation.model_id;

    fs::path base = fs::path(path).parent_path();
    auto resolve = [&](std::string& p) {
        if (!p.empty() && fs::path(p).is_relative()) p = (base / p).string();
    };
    resolve(config.corpus_path);
    resolve(config.backend_path);
    resolve(config.outdir);
    resolve(config.prompt_dir);
    return config;
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

void cmd_ingest(const RunConfig& config) {
    if (config.corpus_path.empty()) throw ConfigError("config: no corpus configured");
    require_file(config.corpus_path, "corpus");
    std::vector<McqProblem> loaded = load_corpus(config.corpus_path);
    std::vector<McqProblem> kept = filter_corpus(loaded, config.filter);

    fs::path dir = stage_dir(config, "ingest");
    fs::path corpus_out = dir / "corpus.jsonl";
    write_corpus(corpus_out.string(), kept);

    json summary;
    summary["loaded"] = loaded.size();
    summary["kept"] = kept.size();
    summary["dropped"] = loaded.size() - kept.size();
    write_file((dir / "summary.json").string(), summary.dump(2) + "\n");

    Manifest manifest(config, "ingest");
    manifest.add_input(config.corpus_path);
    manifest.add_output(corpus_out);
    manifest.add_output(dir / "summary.json");
    manifest.write(dir);

    std::printf("ingest: loaded %zu, kept %zu\n", loaded.size(), kept.size());
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

namespace {

json candidates_to_json(const CandidateMultiset& candidates) {
    json arr = json::array();
    for (const auto& e : candidates.entries)
        arr.push_back({{"answer", e.answer}, {"multiplicity", e.multiplicity}});
    return arr;
}

CandidateMultiset candidates_from_json(const json& arr) {
    CandidateMultiset c;
    for (const auto& e : arr)
        c.entries.push_back({e.at("answer").get<std::string>(), e.at("multiplicity").get<int>()});
    return c;
}

}  // namespace

void cmd_generate(const RunConfig& config) {
    fs::path corpus_file =
        require_file(fs::path(config.outdir) / "ingest" / "corpus.jsonl", "ingested corpus");
    std::vector<McqProblem> problems = load_corpus(corpus_file.string());

    PromptLibrary prompts = load_prompts(config);
    std::unique_ptr<Gateway> gateway = open_gateway(config);

    GenerationConfig gen;
    gen.model_id = config.campaign.model_id;
    gen.variant = config.campaign.variant;
    gen.decoding = config.campaign.decoding;
    gen.n_distractors = config.campaign.n_distractors;

    std::vector<GenerationResult> results =
        run_campaign(problems, gen, prompts, *gateway, config.max_in_flight);

    std::string group = group_of(gen.model_id, gen.variant);
    std::vector<json> records;
    size_t failures = 0;
    for (const auto& r : results) {
        json rec;
        rec["problem_id"] = r.problem_id;
        rec["model_id"] = gen.model_id;
        rec["variant"] = to_string(gen.variant);
        rec["group"] = group;
        if (r.trace)
            rec["trace"] = *r.trace;
        else
            rec["trace"] = nullptr;
        rec["raw_output"] = r.raw_output;
        rec["candidates"] = candidates_to_json(r.candidates);
        rec["parse_ok"] = r.parse_ok;
        if (r.error) {
            rec["error"] = *r.error;
            ++failures;
        } else {
            rec["error"] = nullptr;
        }
        records.push_back(std::move(rec));
    }

    fs::path dir = stage_dir(config, "generate");
    fs::path results_file = dir / "results.jsonl";
    write_jsonl(results_file.string(), records);

    Manifest manifest(config, "generate");
    manifest.add_input(corpus_file.string());
    manifest.add_output(results_file);
    manifest.write(dir);

    GatewayStats stats = gateway->stats();
    std::printf("generate: %zu results (%zu failed), backend_calls=%lld cache_hits=%lld\n",
                results.size(), failures, static_cast<long long>(stats.backend_calls),
                static_cast<long long>(stats.cache_hits));
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

void cmd_score(const RunConfig& config) {
    fs::path corpus_file =
        require_file(fs::path(config.outdir) / "ingest" / "corpus.jsonl", "ingested corpus");
    fs::path results_file =
        require_file(fs::path(config.outdir) / "generate" / "results.jsonl", "campaign results");

    std::vector<McqProblem> problems = load_corpus(corpus_file.string());
    std::map<std::string, const McqProblem*> by_id;
    for (const auto& p : problems) by_id[p.id] = &p;

    PromptLibrary prompts = load_prompts(config);
    std::unique_ptr<Gateway> gateway = open_gateway(config);
    LlmJudge judge(config.judge.model_id, prompts, *gateway);

    std::map<std::string, std::vector<std::pair<MatchOutcome, CandidateMultiset>>> per_group;
    std::vector<JudgmentRecord> judgment_log;
    std::vector<json> outcome_records;
    size_t skipped = 0;

    for_each_jsonl(results_file.string(), [&](size_t, const json& rec) {
        if (!rec.at("error").is_null()) {
            ++skipped;
            return;
        }
        std::string id = rec.at("problem_id").get<std::string>();
        auto it = by_id.find(id);
        if (it == by_id.end()) throw DataError("results reference unknown problem id: " + id);
        CandidateMultiset candidates = candidates_from_json(rec.at("candidates"));
        MatchOutcome outcome = match_candidates(candidates, *it->second, judge, &judgment_log);
        for (const auto& w : outcome.warnings)
            std::fprintf(stderr, "warning: %s: %s\n", id.c_str(), w.c_str());

        std::string group = rec.at("group").get<std::string>();
        json orec;
        orec["problem_id"] = id;
        orec["group"] = group;
        orec["matched_count"] = outcome.matched_count;
        orec["correct_hits"] = outcome.correct_hits;
        orec["repetitions"] = outcome.repetitions;
        json pairs = json::array();
        for (const auto& [c, g] : outcome.pairing) pairs.push_back({c, g});
        orec["pairing"] = pairs;
        outcome_records.push_back(std::move(orec));

        per_group[group].emplace_back(std::move(outcome), std::move(candidates));
    });

    fs::path dir = stage_dir(config, "score");

    std::string csv = "group,metric,mean,half_width,n\n";
    for (const auto& [group, outcomes] : per_group) {
        MetricsReport report = campaign_report(outcomes, config.analysis.confidence);
        auto row = [&](const char* metric, const MeanCi& ci) {
            csv += group;
            csv += ",";
            csv += metric;
            csv += ",";
            csv += fmt_double(ci.mean);
            csv += ",";
            csv += fmt_optional(ci.half_width);
            csv += ",";
            csv += std::to_string(report.n);
            csv += "\n";
        };
        row("proportional_match", report.proportional_match);
        row("correct_count", report.correct_count);
        row("repetition_count", report.repetition_count);
    }
    fs::path metrics_file = dir / "metrics.csv";
    write_file(metrics_file.string(), csv);

    std::vector<json> judgment_records;
    for (const auto& j : judgment_log) {
        judgment_records.push_back({{"problem_id", j.problem_id},
                                    {"a", j.a},
                                    {"b", j.b},
                                    {"equivalent", j.equivalent},
                                    {"method", to_string(j.method)}});
    }
    fs::path judgments_file = dir / "judgments.jsonl";
    write_jsonl(judgments_file.string(), judgment_records);
    fs::path outcomes_file = dir / "outcomes.jsonl";
    write_jsonl(outcomes_file.string(), outcome_records);

    Manifest manifest(config, "score");
    manifest.add_input(corpus_file.string());
    manifest.add_input(results_file.string());
    manifest.add_output(metrics_file);
    manifest.add_output(judgments_file);
    manifest.add_output(outcomes_file);
    manifest.write(dir);

    std::printf("score: %zu problems scored, %zu skipped (campaign failures)\n",
                outcome_records.size(), skipped);
}

// ---------------------------------------------------------------------------
// annotate
// ---------------------------------------------------------------------------

namespace {

json spans_to_json(const AnnotatedTrace& trace) {
    json arr = json::array();
    for (const auto& span : trace.spans)
        arr.push_back({{"tag", to_string(span.tag)},
                       {"start", span.start_offset},
                       {"end", span.end_offset}});
    return arr;
}

AnnotatedTrace trace_from_record(const json& rec) {
    AnnotatedTrace trace;
    trace.original_text = rec.at("original").get<std::string>();
    for (const auto& s : rec.at("spans")) {
        AnnotatedSpan span;
        auto tag = tag_from_string(s.at("tag").get<std::string>());
        if (!tag) throw DataError("annotated record: unknown tag " + s.at("tag").dump());
        span.tag = *tag;
        span.start_offset = s.at("start").get<size_t>();
        span.end_offset = s.at("end").get<size_t>();
        span.text = trace.original_text.substr(span.start_offset,
                                               span.end_offset - span.start_offset);
        trace.spans.push_back(std::move(span));
    }
    return trace;
}

struct TraceRow {
    std::string id;
    std::string group;
    std::string text;
};

}  // namespace

void cmd_annotate(const RunConfig& config) {
    fs::path results_file =
        require_file(fs::path(config.outdir) / "generate" / "results.jsonl", "campaign results");

    PromptLibrary prompts = load_prompts(config);
    std::unique_ptr<Gateway> gateway = open_gateway(config);

    std::vector<TraceRow> rows;
    size_t skipped_empty = 0;
    for_each_jsonl(results_file.string(), [&](size_t, const json& rec) {
        if (!rec.at("error").is_null()) return;
        if (rec.at("trace").is_null() || rec.at("trace").get<std::string>().empty()) {
            ++skipped_empty;
            return;
        }
        rows.push_back({rec.at("problem_id").get<std::string>(),
                        rec.at("group").get<std::string>(), rec.at("trace").get<std::string>()});
    });

    if (config.annotation.sample_per_stratum > 0) {
        auto sampled = stratified_sample<TraceRow>(
            rows, [](const TraceRow& r) { return r.group; }, config.annotation.sample_per_stratum,
            config.seed);
        for (const auto& [label, size] : sampled.shortfalls)
            std::fprintf(stderr, "note: stratum %s has only %zu traces\n", label.c_str(), size);
        rows = std::move(sampled.records);
    }

    std::vector<json> records;
    size_t failed = 0;
    for (const auto& row : rows) {
        json rec;
        rec["id"] = row.id;
        rec["group"] = row.group;
        rec["original"] = row.text;
        try {
            AnnotatedTrace annotated = annotate_trace(row.text, config.annotation.model_id,
                                                      prompts, *gateway, config.max_in_flight);
            rec["tagged"] = render_tagged(annotated);
            rec["spans"] = spans_to_json(annotated);
            rec["diagnostics"] = annotated.diagnostics;
            rec["error"] = nullptr;
        } catch (const std::exception& e) {
            rec["tagged"] = nullptr;
            rec["spans"] = json::array();
            rec["diagnostics"] = json::array();
            rec["error"] = e.what();
            ++failed;
            std::fprintf(stderr, "warning: trace %s: %s\n", row.id.c_str(), e.what());
        }
        records.push_back(std::move(rec));
    }

    fs::path dir = stage_dir(config, "annotate");
    fs::path annotated_file = dir / "annotated.jsonl";
    write_jsonl(annotated_file.string(), records);

    json summary;
    summary["annotated"] = records.size() - failed;
    summary["failed"] = failed;
    summary["skipped_empty"] = skipped_empty;
    write_file((dir / "summary.json").string(), summary.dump(2) + "\n");

    Manifest manifest(config, "annotate");
    manifest.add_input(results_file.string());
    manifest.add_output(annotated_file);
    manifest.add_output(dir / "summary.json");
    manifest.write(dir);

    std::printf("annotate: %zu traces annotated, %zu failed, %zu empty skipped\n",
                records.size() - failed, failed, skipped_empty);
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

void cmd_validate(const RunConfig& config, const std::string& gold_path) {
    fs::path annotated_file =
        require_file(fs::path(config.outdir) / "annotate" / "annotated.jsonl",
                     "annotated traces");
    require_file(gold_path, "gold annotations");

    std::map<std::string, AnnotatedTrace> predicted;
    for_each_jsonl(annotated_file.string(), [&](size_t, const json& rec) {
        if (!rec.at("error").is_null()) return;
        predicted[rec.at("id").get<std::string>()] = trace_from_record(rec);
    });

    TagAlignment total;
    size_t compared = 0;
    for_each_jsonl(gold_path, [&](size_t lineno, const json& rec) {
        std::string id = rec.at("id").get<std::string>();
        auto it = predicted.find(id);
        if (it == predicted.end())
            throw DataError("gold annotations " + gold_path + ":" + std::to_string(lineno) +
                            ": no predicted annotation for id " + id);
        std::string tagged = rec.at("tagged").get<std::string>();
        AnnotatedTrace gold = parse_annotations(tagged, it->second.original_text);
        TagAlignment alignment = align_annotations(it->second, gold, config.annotation.window);
        for (size_t t = 0; t < kTagCount; ++t) {
            total.per_tag[t].matched += alignment.per_tag[t].matched;
            total.per_tag[t].inserted += alignment.per_tag[t].inserted;
            total.per_tag[t].deleted += alignment.per_tag[t].deleted;
        }
        ++compared;
    });
    if (compared == 0) throw DataError("gold annotations: no records");

    TagPrf prf = tag_prf(total);
    std::string csv = "tag,matched,inserted,deleted,precision,recall\n";
    for (size_t t = 0; t < kTagCount; ++t) {
        const auto& c = total.per_tag[t];
        csv += to_string(static_cast<StrategyTag>(t)) + "," + std::to_string(c.matched) + "," +
               std::to_string(c.inserted) + "," + std::to_string(c.deleted) + "," +
               fmt_optional(prf.per_tag[t].precision) + "," + fmt_optional(prf.per_tag[t].recall) +
               "\n";
    }
    auto totals = total.totals();
    csv += "MACRO," + std::to_string(totals.matched) + "," + std::to_string(totals.inserted) +
           "," + std::to_string(totals.deleted) + "," + fmt_optional(prf.macro.precision) + "," +
           fmt_optional(prf.macro.recall) + "\n";

    fs::path dir = stage_dir(config, "validate");
    fs::path agreement_file = dir / "agreement.csv";
    write_file(agreement_file.string(), csv);

    Manifest manifest(config, "validate");
    manifest.add_input(annotated_file.string());
    manifest.add_input(gold_path);
    manifest.add_output(agreement_file);
    manifest.write(dir);

    std::printf("validate: %zu traces compared\n", compared);
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

void cmd_analyze(const RunConfig& config) {
    fs::path annotated_file =
        require_file(fs::path(config.outdir) / "annotate" / "annotated.jsonl",
                     "annotated traces");

    std::map<std::string, std::vector<AnnotatedTrace>> groups;
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> raw_traces;
    for_each_jsonl(annotated_file.string(), [&](size_t, const json& rec) {
        if (!rec.at("error").is_null()) return;
        std::string group = rec.at("group").get<std::string>();
        AnnotatedTrace trace = trace_from_record(rec);
        raw_traces[group].emplace_back(rec.at("id").get<std::string>(), trace.original_text);
        groups[group].push_back(std::move(trace));
    });
    if (groups.empty()) throw DataError("analyze: no annotated traces");

    fs::path dir = stage_dir(config, "analyze");
    const auto& analysis = config.analysis;

    std::string occ_csv = "group,tag,mean,half_width,n\n";
    std::string cov_csv = "group,tag,fraction\n";
    std::string temporal_csv = "group,bin,tag,count,proportion\n";
    std::string transitions_csv = "group,step,source,target,count,probability\n";
    std::string node_csv = "group,position,tag,share\n";
    std::vector<json> sankey;

    std::map<std::string, TransitionModel> models;
    for (const auto& [group, traces] : groups) {
        OccurrenceStats occ = occurrence_stats(traces, analysis.confidence);
        for (size_t t = 0; t < kTagCount; ++t) {
            occ_csv += group + "," + to_string(static_cast<StrategyTag>(t)) + "," +
                       fmt_double(occ.per_tag[t].mean) + "," +
                       fmt_optional(occ.per_tag[t].half_width) + "," + std::to_string(occ.n) +
                       "\n";
        }
        CoverageStats cov = coverage_stats(traces);
        for (size_t t = 0; t < kTagCount; ++t)
            cov_csv += group + "," + to_string(static_cast<StrategyTag>(t)) + "," +
                       fmt_double(cov.fraction[t]) + "\n";

        TemporalHistogram hist = temporal_histogram(
            traces, analysis.bins,
            analysis.per_trace_temporal ? TemporalPooling::kPerTraceAverage
                                        : TemporalPooling::kPooled);
        for (const auto& w : hist.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
        for (size_t b = 0; b < hist.bins; ++b)
            for (size_t t = 0; t < kTagCount; ++t)
                temporal_csv += group + "," + std::to_string(b) + "," +
                                to_string(static_cast<StrategyTag>(t)) + "," +
                                std::to_string(hist.tag_counts[b][t]) + "," +
                                fmt_double(hist.proportion[b][t]) + "\n";

        TransitionModel model = transition_model(
            traces, 4,
            analysis.sliding_window_transitions ? SequenceReading::kSlidingWindow
                                                : SequenceReading::kPrefix);
        for (size_t k = 0; k < model.probability.size(); ++k)
            for (size_t s = 0; s < kTagCount; ++s) {
                if (!model.defined[k][s]) continue;
                for (size_t t = 0; t < kTagCount; ++t)
                    transitions_csv += group + "," + std::to_string(k + 1) + "," +
                                       to_string(static_cast<StrategyTag>(s)) + "," +
                                       to_string(static_cast<StrategyTag>(t)) + "," +
                                       std::to_string(model.counts[k][s][t]) + "," +
                                       fmt_double(model.probability[k][s][t]) + "\n";
            }
        for (size_t k = 0; k < model.node_share.size(); ++k)
            for (size_t t = 0; t < kTagCount; ++t)
                node_csv += group + "," + std::to_string(k + 1) + "," +
                            to_string(static_cast<StrategyTag>(t)) + "," +
                            fmt_double(model.node_share[k][t]) + "\n";

        for (size_t k = 0; k < model.probability.size(); ++k)
            for (size_t s = 0; s < kTagCount; ++s) {
                if (!model.defined[k][s]) continue;
                for (size_t t = 0; t < kTagCount; ++t) {
                    double p = model.probability[k][s][t];
                    if (p <= 0.0) continue;
                    sankey.push_back({{"group", group},
                                      {"step", k + 1},
                                      {"source", to_string(static_cast<StrategyTag>(s))},
                                      {"target", to_string(static_cast<StrategyTag>(t))},
                                      {"probability", p},
                                      {"kept", p > analysis.threshold}});
                }
            }
        models.emplace(group, std::move(model));
    }

    std::string agreement_csv = "group_a,group_b,score\n";
    for (auto a = models.begin(); a != models.end(); ++a) {
        auto b = a;
        for (++b; b != models.end(); ++b) {
            auto score =
                model_agreement(a->second, b->second, analysis.threshold, analysis.top_k);
            agreement_csv +=
                a->first + "," + b->first + "," + (score ? fmt_double(*score) : std::string()) +
                "\n";
        }
    }

    write_file((dir / "occurrences.csv").string(), occ_csv);
    write_file((dir / "coverage.csv").string(), cov_csv);
    write_file((dir / "temporal.csv").string(), temporal_csv);
    write_file((dir / "transitions.csv").string(), transitions_csv);
    write_file((dir / "node_share.csv").string(), node_csv);
    write_jsonl((dir / "sankey.jsonl").string(), sankey);
    write_file((dir / "agreement.csv").string(), agreement_csv);

    Manifest manifest(config, "analyze");
    manifest.add_input(annotated_file.string());
    manifest.add_output(dir / "occurrences.csv");
    manifest.add_output(dir / "coverage.csv");
    manifest.add_output(dir / "temporal.csv");
    manifest.add_output(dir / "transitions.csv");
    manifest.add_output(dir / "node_share.csv");
    manifest.add_output(dir / "sankey.jsonl");
    manifest.add_output(dir / "agreement.csv");

    if (analysis.classify_solve_inject) {
        PromptLibrary prompts = load_prompts(config);
        std::unique_ptr<Gateway> gateway = open_gateway(config);
        std::vector<json> labels;
        std::map<std::string, std::pair<int, int>> tally;  // group -> (solve_first, inject)
        std::map<std::string, int> counts;
        for (const auto& [group, traces] : raw_traces) {
            for (const auto& [id, text] : traces) {
                SolveInjectLabel label =
                    classify_solve_inject(text, analysis.labeler_model, prompts, *gateway);
                labels.push_back({{"id", id},
                                  {"group", group},
                                  {"solve_first", label.solve_first},
                                  {"inject_from_solution", label.inject_from_solution},
                                  {"solve_first_quote", label.solve_first_quote},
                                  {"inject_quote", label.inject_quote}});
                ++counts[group];
                if (label.solve_first) {
                    ++tally[group].first;
                    if (label.inject_from_solution) ++tally[group].second;
                }
            }
        }
        write_jsonl((dir / "solve_inject.jsonl").string(), labels);
        json summary;
        for (const auto& [group, n] : counts) {
            json g;
            g["n"] = n;
            g["solve_first_fraction"] = n > 0 ? static_cast<double>(tally[group].first) / n : 0.0;
            g["inject_given_solve_first_fraction"] =
                tally[group].first > 0
                    ? static_cast<double>(tally[group].second) / tally[group].first
                    : 0.0;
            summary[group] = g;
        }
        write_file((dir / "solve_inject_summary.json").string(), summary.dump(2) + "\n");
        manifest.add_output(dir / "solve_inject.jsonl");
        manifest.add_output(dir / "solve_inject_summary.json");
    }

    manifest.write(dir);
    std::printf("analyze: %zu group(s)\n", groups.size());
}

}  // namespace distrace
