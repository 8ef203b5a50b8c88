#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pwi/corpus.hpp"
#include "pwi/metrics.hpp"
#include "pwi/stimulus.hpp"

namespace pwi {

struct ProviderSpec {
    enum class Kind { Synthetic, External } kind = Kind::Synthetic;
    // synthetic
    std::optional<std::vector<std::string>> vocabulary;  // default: every label and word in the run
    std::optional<std::uint64_t> seed;                   // default: RunConfig::seed
    double gamma = 0.0;
    std::size_t dim = 64;
    // external
    std::string command;
    std::size_t batch_size = 32;
    std::int64_t timeout_ms = 120000;
};

struct RunConfig {
    std::filesystem::path manifest;
    std::vector<std::filesystem::path> word_lists;
    std::vector<TaskLevel> tasks{TaskLevel::Superordinate, TaskLevel::Basic};
    std::string prompt = "default";
    std::vector<std::string> sweep_prompts;  // empty: every available template
    std::optional<std::filesystem::path> prompt_file;
    ProviderSpec provider;
    RenderConfig render;
    double logit_scale = 100.0;
    std::optional<std::filesystem::path> word_vectors;
    bool include_own_label = true;
    std::filesystem::path output_dir = "out";
    std::uint64_t seed = 0;
    bool cache = true;
    bool timestamps = false;
    bool write_stimuli = false;
    std::vector<std::string> rsa_words;
    std::size_t workers = 0;  // 0: hardware concurrency

    /// SHA-256 of the canonical config JSON, excluding output_dir, cache,
    /// timestamps and workers (they do not change results).
    std::string digest;
};

/// Command-line overrides; flags win over the file.
struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> output_dir;
    std::optional<std::string> provider;  // "synthetic" or "cmd:<command line>"
    std::optional<double> gamma;
    bool no_cache = false;
    bool timestamps = false;
};

/// Validates the whole config before returning; relative paths resolve
/// against base_dir. Throws ConfigError.
RunConfig parse_run_config(nlohmann::json j, const std::filesystem::path& base_dir,
                           const ConfigOverrides& overrides = {});
RunConfig load_run_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

struct RunSummary {
    std::filesystem::path report_dir;
    std::size_t records = 0;
    std::map<std::string, double> rates;  // by condition code
};

/// Full pipeline: classify, build pair records, compute metrics, write report/.
RunSummary run_pipeline(const RunConfig& config, std::ostream& log);
/// Prompt sweep: one rate row per template into report/table2.csv.
RunSummary run_sweep(const RunConfig& config, std::ostream& log);
/// RDMs for the no-word set and each configured fixed word.
RunSummary run_rsa(const RunConfig& config, std::ostream& log);
/// Renders stimuli into <output_dir>/stimuli.
std::size_t run_generate(const RunConfig& config, std::ostream& log);
/// Loads and cross-checks every input without running a provider.
void run_validate(const RunConfig& config, std::ostream& log);

}  // namespace pwi
