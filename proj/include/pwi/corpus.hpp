#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pwi {

struct ImageRecord {
    std::string id;
    std::filesystem::path path;
    std::string basic_label;
    std::string superordinate_label;

    bool operator==(const ImageRecord&) const = default;
};

/// basic label -> superordinate label, keyed by normalized basic label.
class LabelTaxonomy {
public:
    /// Throws DataError(TaxonomyConflict) when a basic label already has a
    /// different parent.
    void add(std::string_view basic, std::string_view superordinate);

    std::optional<std::string> parent_of(std::string_view basic) const;

    /// Sorted, normalized.
    std::vector<std::string> basic_labels() const;
    std::vector<std::string> superordinate_labels() const;

    std::size_t size() const { return parent_.size(); }
    const std::map<std::string, std::string>& mapping() const { return parent_; }

private:
    std::map<std::string, std::string> parent_;
};

struct Manifest {
    std::vector<ImageRecord> images;
    LabelTaxonomy taxonomy;
    std::filesystem::path base_dir;  // relative image paths resolve against this

    std::filesystem::path resolve(const ImageRecord& img) const {
        return img.path.is_relative() ? base_dir / img.path : img.path;
    }
};

enum class WordCategory { Superordinate, Basic, Pseudoword };
enum class TaskLevel { Superordinate, Basic };

std::string_view to_string(WordCategory c);
std::string_view to_string(TaskLevel t);
WordCategory parse_word_category(std::string_view s);
TaskLevel parse_task_level(std::string_view s);

struct WordList {
    WordCategory category = WordCategory::Basic;
    std::vector<std::string> words;
};

/// (prediction task, superimposed word category); canonical code "S/B" etc.
struct ConditionCode {
    TaskLevel task = TaskLevel::Superordinate;
    WordCategory word_category = WordCategory::Superordinate;

    std::string code() const;
    static ConditionCode parse(std::string_view code);

    auto operator<=>(const ConditionCode&) const = default;
};

/// The four cells of the label-switching table, in its row-major order.
inline constexpr ConditionCode kTableConditions[] = {
    {TaskLevel::Superordinate, WordCategory::Superordinate},
    {TaskLevel::Basic, WordCategory::Superordinate},
    {TaskLevel::Superordinate, WordCategory::Basic},
    {TaskLevel::Basic, WordCategory::Basic},
};

struct StimulusSpec {
    std::string image_id;
    std::optional<std::string> word;  // absent = no-word control
    ConditionCode condition;

    bool operator==(const StimulusSpec&) const = default;
};

Manifest parse_manifest(std::string_view csv_text);
Manifest load_manifest(const std::filesystem::path& path);
std::string format_manifest(const std::vector<ImageRecord>& images);
void save_manifest(const std::filesystem::path& path, const std::vector<ImageRecord>& images);

WordList parse_word_list(std::string_view json_text);
WordList load_word_list(const std::filesystem::path& path);

/// Image x word product. With include_own_label=false a word equal to the
/// image's own label at the word's level is skipped (pseudowords never are).
std::vector<StimulusSpec> plan_trials(const std::vector<ImageRecord>& images, const WordList& words,
                                      TaskLevel task, bool include_own_label = true);

std::string stimulus_file_name(const StimulusSpec& spec);

}  // namespace pwi
