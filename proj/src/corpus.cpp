#include "pwi/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "pwi/csv.hpp"
#include "pwi/error.hpp"
#include "pwi/io.hpp"
#include "pwi/text.hpp"

namespace pwi {

void LabelTaxonomy::add(std::string_view basic, std::string_view superordinate) {
    auto b = normalize_label(basic);
    auto s = normalize_label(superordinate);
    auto [it, inserted] = parent_.emplace(b, s);
    if (!inserted && it->second != s)
        throw DataError(Errc::TaxonomyConflict,
                        "basic label '" + b + "' has two superordinate parents: '" + it->second + "' and '" + s + "'");
}

std::optional<std::string> LabelTaxonomy::parent_of(std::string_view basic) const {
    auto it = parent_.find(normalize_label(basic));
    if (it == parent_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> LabelTaxonomy::basic_labels() const {
    std::vector<std::string> out;
    out.reserve(parent_.size());
    for (const auto& [b, _] : parent_) out.push_back(b);
    return out;
}

std::vector<std::string> LabelTaxonomy::superordinate_labels() const {
    std::set<std::string> s;
    for (const auto& [_, p] : parent_) s.insert(p);
    return {s.begin(), s.end()};
}

std::string_view to_string(WordCategory c) {
    switch (c) {
        case WordCategory::Superordinate: return "superordinate";
        case WordCategory::Basic: return "basic";
        case WordCategory::Pseudoword: return "pseudoword";
    }
    return "?";
}

std::string_view to_string(TaskLevel t) {
    return t == TaskLevel::Superordinate ? "superordinate" : "basic";
}

WordCategory parse_word_category(std::string_view s) {
    auto n = normalize_label(s);
    if (n == "superordinate") return WordCategory::Superordinate;
    if (n == "basic") return WordCategory::Basic;
    if (n == "pseudoword") return WordCategory::Pseudoword;
    throw ConfigError(Errc::InvalidConfig, "unknown word category '" + std::string(s) + "'");
}

TaskLevel parse_task_level(std::string_view s) {
    auto n = normalize_label(s);
    if (n == "superordinate") return TaskLevel::Superordinate;
    if (n == "basic") return TaskLevel::Basic;
    throw ConfigError(Errc::InvalidConfig, "unknown task level '" + std::string(s) + "'");
}

std::string ConditionCode::code() const {
    std::string out;
    out.push_back(task == TaskLevel::Superordinate ? 'S' : 'B');
    out.push_back('/');
    switch (word_category) {
        case WordCategory::Superordinate: out.push_back('S'); break;
        case WordCategory::Basic: out.push_back('B'); break;
        case WordCategory::Pseudoword: out.push_back('P'); break;
    }
    return out;
}

ConditionCode ConditionCode::parse(std::string_view code) {
    if (code.size() != 3 || (code[1] != '/' && code[1] != '-'))
        throw ConfigError(Errc::InvalidConfig, "bad condition code '" + std::string(code) + "'");
    ConditionCode c;
    switch (code[0]) {
        case 'S': c.task = TaskLevel::Superordinate; break;
        case 'B': c.task = TaskLevel::Basic; break;
        default: throw ConfigError(Errc::InvalidConfig, "bad condition code '" + std::string(code) + "'");
    }
    switch (code[2]) {
        case 'S': c.word_category = WordCategory::Superordinate; break;
        case 'B': c.word_category = WordCategory::Basic; break;
        case 'P': c.word_category = WordCategory::Pseudoword; break;
        default: throw ConfigError(Errc::InvalidConfig, "bad condition code '" + std::string(code) + "'");
    }
    return c;
}

Manifest parse_manifest(std::string_view csv_text) {
    const auto rows = csv::parse(csv_text, /*skip_comments=*/false);
    if (rows.empty()) throw DataError(Errc::EmptyManifest, "manifest is empty");

    const csv::Row expected{"id", "path", "basic_label", "superordinate_label"};
    csv::Row header;
    for (const auto& h : rows[0]) header.push_back(trim(h));
    if (header != expected)
        throw DataError(Errc::ParseError, "manifest header must be 'id,path,basic_label,superordinate_label'");
    if (rows.size() == 1) throw DataError(Errc::EmptyManifest, "manifest has no image rows");

    Manifest m;
    std::unordered_set<std::string> ids;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != 4)
            throw DataError(Errc::ParseError, "manifest row " + std::to_string(r + 1) + ": expected 4 fields, got " +
                                                  std::to_string(row.size()));
        ImageRecord rec{row[0], row[1], row[2], row[3]};
        if (rec.id.empty()) throw DataError(Errc::ParseError, "manifest row " + std::to_string(r + 1) + ": empty id");
        if (normalize_label(rec.basic_label).empty() || normalize_label(rec.superordinate_label).empty())
            throw DataError(Errc::ParseError, "manifest row " + std::to_string(r + 1) + ": empty label");
        if (!ids.insert(rec.id).second) throw DataError(Errc::DuplicateId, "DuplicateId(\"" + rec.id + "\")");
        m.taxonomy.add(rec.basic_label, rec.superordinate_label);
        m.images.push_back(std::move(rec));
    }
    return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
    auto m = parse_manifest(read_file(path));
    m.base_dir = path.parent_path();
    return m;
}

std::string format_manifest(const std::vector<ImageRecord>& images) {
    std::string out = csv::format_row({"id", "path", "basic_label", "superordinate_label"});
    for (const auto& img : images)
        out += csv::format_row({img.id, img.path.string(), img.basic_label, img.superordinate_label});
    return out;
}

void save_manifest(const std::filesystem::path& path, const std::vector<ImageRecord>& images) {
    write_file_atomic(path, format_manifest(images));
}

WordList parse_word_list(std::string_view json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(Errc::ParseError, std::string("word list: ") + e.what());
    }
    if (!j.is_object() || !j.contains("category") || !j.contains("words") || !j["words"].is_array())
        throw DataError(Errc::ParseError, "word list must be {\"category\": ..., \"words\": [...]}");

    WordList wl;
    wl.category = parse_word_category(j["category"].get<std::string>());
    std::unordered_set<std::string> seen;
    for (const auto& w : j["words"]) {
        if (!w.is_string()) throw DataError(Errc::ParseError, "word list entries must be strings");
        auto word = w.get<std::string>();
        auto n = normalize_label(word);
        if (n.empty()) throw DataError(Errc::EmptyWord, "word list contains an empty word");
        if (!seen.insert(n).second) throw DataError(Errc::DuplicateWord, "duplicate word '" + n + "' in word list");
        wl.words.push_back(std::move(word));
    }
    if (wl.words.empty()) throw DataError(Errc::EmptyPlan, "word list is empty");
    return wl;
}

WordList load_word_list(const std::filesystem::path& path) { return parse_word_list(read_file(path)); }

std::vector<StimulusSpec> plan_trials(const std::vector<ImageRecord>& images, const WordList& words,
                                      TaskLevel task, bool include_own_label) {
    if (words.words.empty()) throw DataError(Errc::EmptyPlan, "word list is empty");
    const ConditionCode cond{task, words.category};
    std::vector<StimulusSpec> out;
    out.reserve(images.size() * words.words.size());
    for (const auto& img : images) {
        const std::string own = words.category == WordCategory::Superordinate ? normalize_label(img.superordinate_label)
                                : words.category == WordCategory::Basic       ? normalize_label(img.basic_label)
                                                                              : std::string();
        for (const auto& w : words.words) {
            if (!include_own_label && !own.empty() && normalize_label(w) == own) continue;
            out.push_back({img.id, w, cond});
        }
    }
    if (out.empty()) throw DataError(Errc::EmptyPlan, "trial plan is empty after own-label filtering");
    return out;
}

std::string stimulus_file_name(const StimulusSpec& spec) {
    std::string word = spec.word ? normalize_label(*spec.word) : "NOWORD";
    for (auto& c : word)
        if (c == ' ' || c == '/') c = '_';
    auto code = spec.condition.code();
    code[1] = '-';
    return spec.image_id + "__" + word + "__" + code + ".png";
}

}  // namespace pwi
