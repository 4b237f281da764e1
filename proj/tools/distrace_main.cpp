#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

#include "distrace/errors.hpp"
#include "distrace/pipeline.hpp"

namespace {

struct CliArgs {
    std::string config_path;
    std::string corpus_override;
    std::string outdir_override;
    std::string backend_override;
    std::string prompt_dir_override;
    std::string model_override;
    std::string variant_override;
    std::string gold_path;
    int64_t seed_override = -1;
};

distrace::RunConfig resolve_config(const CliArgs& args) {
    distrace::RunConfig config = distrace::load_run_config(args.config_path);
    if (!args.corpus_override.empty()) config.corpus_path = args.corpus_override;
    if (!args.outdir_override.empty()) config.outdir = args.outdir_override;
    if (!args.backend_override.empty()) config.backend_path = args.backend_override;
    if (!args.prompt_dir_override.empty()) config.prompt_dir = args.prompt_dir_override;
    if (!args.model_override.empty()) config.campaign.model_id = args.model_override;
    if (!args.variant_override.empty())
        config.campaign.variant = distrace::variant_from_string(args.variant_override);
    if (args.seed_override >= 0) config.seed = static_cast<uint64_t>(args.seed_override);
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"distrace: distractor-generation campaigns and reasoning-trace analytics"};
    app.require_subcommand(1);

    CliArgs args;
    app.add_option("--config", args.config_path, "run config file")->required();
    app.add_option("--corpus", args.corpus_override, "override corpus path");
    app.add_option("--outdir", args.outdir_override, "override output directory");
    app.add_option("--backend", args.backend_override, "override backend config path");
    app.add_option("--prompts", args.prompt_dir_override, "override prompt asset directory");
    app.add_option("--seed", args.seed_override, "override seed");

    auto* ingest = app.add_subcommand("ingest", "load, validate and filter the corpus");
    auto* generate = app.add_subcommand("generate", "run the distractor-generation campaign");
    generate->add_option("--model", args.model_override, "override campaign model id");
    generate->add_option("--variant", args.variant_override,
                         "override variant (direct|cot|reasoning|direct_reveal|"
                         "reasoning_reveal|structured)");
    auto* score = app.add_subcommand("score", "judge candidates and compute metrics");
    auto* annotate = app.add_subcommand("annotate", "annotate reasoning traces with the taxonomy");
    auto* validate = app.add_subcommand("validate", "score annotations against gold annotations");
    validate->add_option("--gold", args.gold_path, "gold annotations (jsonl)")->required();
    auto* analyze = app.add_subcommand("analyze", "compute trace analytics and exports");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        distrace::RunConfig config = resolve_config(args);
        if (ingest->parsed()) distrace::cmd_ingest(config);
        if (generate->parsed()) distrace::cmd_generate(config);
        if (score->parsed()) distrace::cmd_score(config);
        if (annotate->parsed()) distrace::cmd_annotate(config);
        if (validate->parsed()) distrace::cmd_validate(config, args.gold_path);
        if (analyze->parsed()) distrace::cmd_analyze(config);
        return 0;
    } catch (const distrace::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const distrace::BackendError& e) {
        std::fprintf(stderr, "backend error: %s\n", e.what());
        return 3;
    } catch (const distrace::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
