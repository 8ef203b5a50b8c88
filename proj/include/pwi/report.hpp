#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pwi/corpus.hpp"
#include "pwi/metrics.hpp"

namespace pwi {

inline constexpr std::string_view kToolVersion = "pwi-bench 1.0.0";

/// Provenance stamped verbatim on top of every artifact.
struct RunMetadata {
    std::string config_digest;
    std::string provider_name;
    std::size_t provider_dim = 0;
    std::uint64_t seed = 0;
    std::string prng_id;
    std::string word_vectors_id;  // "<file name>@sha256:<digest>" or "none"
    std::vector<std::string> prompt_ids;
    std::string tool_version{kToolVersion};
    std::optional<std::string> generated_at;  // only with --timestamps

    /// Compact single-line JSON with a fixed key order.
    std::string to_json_line() const;
};

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);
/// Exactly two decimals.
std::string format_percent(double v);

struct ConditionTable {
    std::string grid_csv;  // rows = word category, columns = prediction task
    std::string flat_csv;  // condition,rate_percent,rate_raw
    std::string text;      // aligned human-readable layout
};

/// Needs all four of S/S, B/S, S/B, B/B; pseudoword cells are optional.
ConditionTable emit_condition_table(const std::map<ConditionCode, double>& rates, const RunMetadata& meta);

struct PromptRow {
    std::string prompt_id;
    std::map<ConditionCode, double> rates;
};

/// One row per prompt, in input order; every row must carry the same conditions.
std::string emit_prompt_table(std::span<const PromptRow> rows, const RunMetadata& meta);

/// Plot-ready JSON for one similarity split.
std::string emit_distribution_data(const SimilaritySplit& split, const std::string& label, const RunMetadata& meta);

struct PairSimilarities {
    std::optional<double> semantic;
    double spelling = 0.0;
};

std::string emit_pairs_csv(std::span<const PairRecord> records, std::span<const PairSimilarities> sims,
                           const RunMetadata& meta);

/// Prefixes `# meta <json>` to a CSV body.
std::string with_csv_header(const RunMetadata& meta, const std::string& body);

/// Atomic write of one artifact file into `dir`.
void write_artifact(const std::filesystem::path& dir, const std::string& name, const std::string& contents);

}  // namespace pwi
