#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pwi/corpus.hpp"

namespace pwi {

/// One word-superimposed trial compared against its no-word baseline.
struct PairRecord {
    std::string image_id;
    ConditionCode condition;
    std::string prompt_id;
    std::string word;
    std::string orig_label;
    std::string new_label;
    bool switched = false;
    double orig_prob = 0.0;
    double new_prob = 0.0;
};

/// Builds a record with `switched` derived from the normalized labels.
PairRecord make_pair_record(std::string image_id, ConditionCode condition, std::string prompt_id, std::string word,
                            std::string orig_label, std::string new_label, double orig_prob, double new_prob);

/// Percentage of switched records among those with the given condition.
/// Throws DataError(NoRecords) if there are none.
double switching_rate(std::span<const PairRecord> records, const ConditionCode& condition);

/// Jaro-Winkler similarity, prefix scale 0.1, prefix capped at 4 characters.
double jaro(std::string_view a, std::string_view b);
double jaro_winkler(std::string_view a, std::string_view b);

/// Pretrained word vectors in whitespace-separated text format.
class WordVectorStore {
public:
    static WordVectorStore parse(std::string_view text);
    static WordVectorStore load(const std::filesystem::path& path);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return vectors_.size(); }
    /// Tokens seen more than once; the first occurrence is kept.
    std::size_t duplicate_count() const { return duplicates_; }

    const std::vector<double>* find(std::string_view token) const;
    /// exact -> lowercase -> spaces as underscores -> mean of per-token vectors.
    std::optional<std::vector<double>> lookup(std::string_view s) const;

    void insert(std::string token, std::vector<double> v);

private:
    std::size_t dim_ = 0;
    std::size_t duplicates_ = 0;
    std::unordered_map<std::string, std::vector<double>> vectors_;
};

/// Cosine of the two lookups; nullopt when either side is missing.
std::optional<double> semantic_similarity(const WordVectorStore& store, std::string_view a, std::string_view b);

enum class SimilarityMetric { Semantic, Spelling };
std::string_view to_string(SimilarityMetric m);

/// Even-length median is the mean of the middle two; nullopt when empty.
std::optional<double> median(std::vector<double> values);

struct SimilaritySplit {
    std::vector<double> switched_values;
    std::vector<double> unswitched_values;
    std::optional<double> switched_median;
    std::optional<double> unswitched_median;
    std::size_t missing_count = 0;

    std::size_t total() const { return switched_values.size() + unswitched_values.size() + missing_count; }
};

/// similarity(orig_label, word) per record, partitioned by `switched`.
/// `store` is required for the semantic metric.
SimilaritySplit split_by_switch(std::span<const PairRecord> records, SimilarityMetric metric,
                                const WordVectorStore* store = nullptr);

struct Relatedness {
    std::vector<double> values;
    std::size_t missing_count = 0;
};

/// semantic_similarity(new_label, word) over the switched records only.
Relatedness switched_label_relatedness(std::span<const PairRecord> records, const WordVectorStore& store);

}  // namespace pwi
