#include "pwi/report.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "pwi/csv.hpp"
#include "pwi/error.hpp"
#include "pwi/io.hpp"

namespace pwi {

using nlohmann::ordered_json;

std::string RunMetadata::to_json_line() const {
    ordered_json j;
    j["tool_version"] = tool_version;
    j["config_digest"] = config_digest;
    j["provider"] = {{"name", provider_name}, {"dim", provider_dim}};
    j["seed"] = seed;
    j["prng"] = prng_id;
    j["word_vectors"] = word_vectors_id;
    j["prompt_ids"] = prompt_ids;
    if (generated_at) j["generated_at"] = *generated_at;
    return j.dump();
}

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), r.ptr);
}

std::string format_percent(double v) {
    std::array<char, 64> buf{};
    std::snprintf(buf.data(), buf.size(), "%.2f", v);
    return buf.data();
}

std::string with_csv_header(const RunMetadata& meta, const std::string& body) {
    return "# meta " + meta.to_json_line() + "\n" + body;
}

namespace {

std::string cell(const std::map<ConditionCode, double>& rates, TaskLevel task, WordCategory word) {
    auto it = rates.find({task, word});
    return it == rates.end() ? std::string() : format_percent(it->second);
}

}  // namespace

ConditionTable emit_condition_table(const std::map<ConditionCode, double>& rates, const RunMetadata& meta) {
    for (const auto& c : kTableConditions)
        if (!rates.count(c)) throw DataError(Errc::MissingCell, "MissingCell(\"" + c.code() + "\")");

    const bool has_pseudo = rates.count({TaskLevel::Superordinate, WordCategory::Pseudoword}) ||
                            rates.count({TaskLevel::Basic, WordCategory::Pseudoword});
    struct RowSpec {
        const char* name;
        WordCategory word;
    };
    std::vector<RowSpec> row_specs{{"Superordinate word", WordCategory::Superordinate},
                                   {"Basic word", WordCategory::Basic}};
    if (has_pseudo) row_specs.push_back({"Pseudoword", WordCategory::Pseudoword});

    ConditionTable t;
    std::string grid = csv::format_row({"word_category", "Superordinate prediction", "Basic prediction"});
    for (const auto& r : row_specs)
        grid += csv::format_row({r.name, cell(rates, TaskLevel::Superordinate, r.word), cell(rates, TaskLevel::Basic, r.word)});
    t.grid_csv = with_csv_header(meta, grid);

    std::string flat = csv::format_row({"condition", "rate_percent", "rate_raw"});
    for (const auto& [c, v] : rates) flat += csv::format_row({c.code(), format_percent(v), format_double(v)});
    t.flat_csv = with_csv_header(meta, flat);

    auto text_cell = [&](TaskLevel task, WordCategory word) {
        auto it = rates.find({task, word});
        if (it == rates.end()) return std::string("-");
        return "(" + ConditionCode{task, word}.code() + ") " + format_percent(it->second) + " %";
    };
    std::array<char, 256> line{};
    std::string text = "# meta " + meta.to_json_line() + "\n";
    std::snprintf(line.data(), line.size(), "%-20s | %-24s | %-24s\n", "", "Superordinate prediction", "Basic prediction");
    text += line.data();
    for (const auto& r : row_specs) {
        std::snprintf(line.data(), line.size(), "%-20s | %-24s | %-24s\n", r.name,
                      text_cell(TaskLevel::Superordinate, r.word).c_str(), text_cell(TaskLevel::Basic, r.word).c_str());
        text += line.data();
    }
    t.text = text;
    return t;
}

std::string emit_prompt_table(std::span<const PromptRow> rows, const RunMetadata& meta) {
    std::set<ConditionCode> columns;
    if (!rows.empty())
        for (const auto& [c, _] : rows.front().rates) columns.insert(c);
    for (const auto& r : rows) {
        std::set<ConditionCode> mine;
        for (const auto& [c, _] : r.rates) mine.insert(c);
        if (mine != columns)
            throw DataError(Errc::RaggedRows, "prompt row '" + r.prompt_id + "' has different condition columns");
    }
    // Table order first, pseudoword columns after.
    std::vector<ConditionCode> ordered;
    for (const auto& c : kTableConditions)
        if (columns.count(c)) ordered.push_back(c);
    for (const auto& c : columns)
        if (c.word_category == WordCategory::Pseudoword) ordered.push_back(c);

    csv::Row header{"prompt_id"};
    for (const auto& c : ordered) header.push_back(c.code());
    std::string body = csv::format_row(header);
    for (const auto& r : rows) {
        csv::Row row{r.prompt_id};
        for (const auto& c : ordered) row.push_back(format_percent(r.rates.at(c)));
        body += csv::format_row(row);
    }
    return with_csv_header(meta, body);
}

std::string emit_distribution_data(const SimilaritySplit& split, const std::string& label, const RunMetadata& meta) {
    ordered_json j;
    j["meta"] = ordered_json::parse(meta.to_json_line());
    j["label"] = label;
    j["switched"] = {{"count", split.switched_values.size()},
                     {"median", split.switched_median ? ordered_json(*split.switched_median) : ordered_json(nullptr)},
                     {"values", split.switched_values}};
    j["unswitched"] = {
        {"count", split.unswitched_values.size()},
        {"median", split.unswitched_median ? ordered_json(*split.unswitched_median) : ordered_json(nullptr)},
        {"values", split.unswitched_values}};
    j["missing_count"] = split.missing_count;
    j["total"] = split.total();
    return j.dump(2) + "\n";
}

std::string emit_pairs_csv(std::span<const PairRecord> records, std::span<const PairSimilarities> sims,
                           const RunMetadata& meta) {
    if (sims.size() != records.size()) throw DataError(Errc::RaggedRows, "pairs and similarities differ in length");
    std::string body = csv::format_row({"image_id", "condition", "prompt_id", "word", "orig_label", "new_label",
                                        "switched", "orig_prob", "new_prob", "semantic_sim", "spelling_sim"});
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        body += csv::format_row({r.image_id, r.condition.code(), r.prompt_id, r.word, r.orig_label, r.new_label,
                                 r.switched ? "true" : "false", format_double(r.orig_prob), format_double(r.new_prob),
                                 sims[i].semantic ? format_double(*sims[i].semantic) : std::string(),
                                 format_double(sims[i].spelling)});
    }
    return with_csv_header(meta, body);
}

void write_artifact(const std::filesystem::path& dir, const std::string& name, const std::string& contents) {
    write_file_atomic(dir / name, contents);
}

}  // namespace pwi
