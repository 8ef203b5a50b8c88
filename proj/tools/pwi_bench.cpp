#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pwi/error.hpp"
#include "pwi/pipeline.hpp"
#include "pwi/report.hpp"

namespace {

int exit_code(pwi::ErrorKind kind) { return static_cast<int>(kind); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Picture-word interference benchmark for vision-language encoders", "pwi-bench"};
    app.set_version_flag("--version", std::string(pwi::kToolVersion));
    app.require_subcommand(1);

    std::string config_path;
    pwi::ConfigOverrides overrides;
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string provider;
    double gamma = 0.0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Run configuration (JSON)")->required();
        sub->add_option("--seed", seed, "Seed for the synthetic provider");
        sub->add_option("--out", out_dir, "Output directory");
        sub->add_option("--provider", provider, "synthetic or cmd:\"<command line>\"");
        sub->add_option("--gamma", gamma, "Synthetic word weight in [0, 1]")->check(CLI::Range(0.0, 1.0));
        sub->add_flag("--no-cache", overrides.no_cache, "Do not persist the embedding cache");
        sub->add_flag("--timestamps", overrides.timestamps, "Stamp artifacts with the generation time");
    };
    auto* generate = app.add_subcommand("generate", "Render stimuli only");
    auto* run = app.add_subcommand("run", "Full pipeline");
    auto* rsa = app.add_subcommand("rsa", "RDM analyses only");
    auto* sweep = app.add_subcommand("sweep", "Prompt template sweep");
    auto* validate = app.add_subcommand("validate", "Check the config, manifest and word lists");
    for (auto* sub : {generate, run, rsa, sweep, validate}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_code(pwi::ErrorKind::Config);
    }

    auto* sub = app.get_subcommands().front();
    if (sub->count("--seed")) overrides.seed = seed;
    if (sub->count("--out")) overrides.output_dir = out_dir;
    if (sub->count("--provider")) overrides.provider = provider;
    if (sub->count("--gamma")) overrides.gamma = gamma;

    try {
        const auto config = pwi::load_run_config(config_path, overrides);
        if (sub == generate) {
            pwi::run_generate(config, std::cerr);
        } else if (sub == validate) {
            pwi::run_validate(config, std::cout);
        } else {
            const auto summary = sub == run     ? pwi::run_pipeline(config, std::cerr)
                                 : sub == rsa   ? pwi::run_rsa(config, std::cerr)
                                                : pwi::run_sweep(config, std::cerr);
            for (const auto& [code, rate] : summary.rates) std::cout << code << "\t" << pwi::format_percent(rate) << "\n";
            std::cout << "report: " << summary.report_dir.string() << "\n";
        }
    } catch (const pwi::Error& e) {
        std::cerr << "pwi-bench: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "pwi-bench: " << e.what() << "\n";
        return exit_code(pwi::ErrorKind::Data);
    }
    return 0;
}
