#include <doctest.h>

#include <json.hpp>

#include "pwi/csv.hpp"
#include "pwi/error.hpp"
#include "pwi/report.hpp"
#include "support.hpp"

using namespace pwi;

namespace {

RunMetadata meta() {
    RunMetadata m;
    m.config_digest = "abc";
    m.provider_name = "synthetic";
    m.provider_dim = 64;
    m.seed = 7;
    m.prng_id = "prng";
    m.word_vectors_id = "none";
    m.prompt_ids = {"default"};
    return m;
}

std::map<ConditionCode, double> rates(double ss, double bs, double sb, double bb) {
    return {{ConditionCode::parse("S/S"), ss},
            {ConditionCode::parse("B/S"), bs},
            {ConditionCode::parse("S/B"), sb},
            {ConditionCode::parse("B/B"), bb}};
}

}  // namespace

TEST_CASE("number formatting") {
    CHECK(format_percent(92.77) == "92.77");
    CHECK(format_percent(0.0) == "0.00");
    CHECK(format_percent(100.0) == "100.00");
    CHECK(format_double(0.1) == "0.1");
    CHECK(std::stod(format_double(1.0 / 3)) == 1.0 / 3);
}

TEST_CASE("metadata line has a fixed key order and omits timestamps by default") {
    auto m = meta();
    const auto line = m.to_json_line();
    CHECK(line.rfind(R"({"tool_version":"pwi-bench 1.0.0","config_digest":"abc")", 0) == 0);
    CHECK(line.find("generated_at") == std::string::npos);
    m.generated_at = "2024-01-01T00:00:00Z";
    CHECK(m.to_json_line().find("generated_at") != std::string::npos);
}

TEST_CASE("condition table grid layout") {
    const auto t = emit_condition_table(rates(92.77, 41.24, 28.29, 73.97), meta());
    const auto rows = csv::parse(t.grid_csv);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == csv::Row{"word_category", "Superordinate prediction", "Basic prediction"});
    CHECK(rows[1] == csv::Row{"Superordinate word", "92.77", "41.24"});
    CHECK(rows[2] == csv::Row{"Basic word", "28.29", "73.97"});
    CHECK(t.grid_csv.rfind("# meta {", 0) == 0);
    CHECK(t.text.find("(S/S) 92.77 %") != std::string::npos);
    CHECK(t.text.find("(B/S) 41.24 %") != std::string::npos);

    const auto flat = csv::parse(t.flat_csv);
    CHECK(flat.size() == 5);

    const auto zeros = csv::parse(emit_condition_table(rates(0, 0, 0, 0), meta()).grid_csv);
    CHECK(zeros[1] == csv::Row{"Superordinate word", "0.00", "0.00"});
}

TEST_CASE("condition table with a pseudoword row and a missing cell") {
    auto r = rates(1, 2, 3, 4);
    r[ConditionCode::parse("S/P")] = 5;
    const auto rows = csv::parse(emit_condition_table(r, meta()).grid_csv);
    REQUIRE(rows.size() == 4);
    CHECK(rows[3] == csv::Row{"Pseudoword", "5.00", ""});

    auto missing = rates(1, 2, 3, 4);
    missing.erase(ConditionCode::parse("B/B"));
    try {
        emit_condition_table(missing, meta());
        FAIL("expected MissingCell");
    } catch (const DataError& e) {
        CHECK(e.code() == Errc::MissingCell);
        CHECK(std::string(e.what()) == "MissingCell(\"B/B\")");
    }
}

TEST_CASE("prompt table") {
    std::vector<PromptRow> rows;
    for (int i = 0; i < 7; ++i) rows.push_back({"p" + std::to_string(i), rates(i, i, i, i)});
    rows.back().rates = rates(34.34, 35.33, 31.04, 34.92);
    const auto parsed = csv::parse(emit_prompt_table(rows, meta()));
    REQUIRE(parsed.size() == 8);
    CHECK(parsed[0] == csv::Row{"prompt_id", "S/S", "B/S", "S/B", "B/B"});
    CHECK(parsed[7] == csv::Row{"p6", "34.34", "35.33", "31.04", "34.92"});
    CHECK(csv::parse(emit_prompt_table(std::vector<PromptRow>{rows[0]}, meta())).size() == 2);

    rows[2].rates.erase(ConditionCode::parse("S/S"));
    CHECK_THROWS_AS(emit_prompt_table(rows, meta()), DataError);
}

TEST_CASE("distribution data") {
    const auto text = emit_distribution_data({}, "x", meta());
    CHECK(text.rfind("{\n  \"meta\": {", 0) == 0);
    const auto empty = nlohmann::json::parse(text);
    CHECK(empty["switched"]["values"].empty());
    CHECK(empty["switched"]["median"].is_null());
    CHECK(empty["total"] == 0);

    SimilaritySplit s;
    s.switched_values = {0.2, 0.4};
    s.unswitched_values = {0.3};
    s.switched_median = 0.30000000000000004;
    s.unswitched_median = 0.3;
    s.missing_count = 2;
    const auto j = nlohmann::json::parse(emit_distribution_data(s, "semantic S/S", meta()));
    CHECK(j["switched"]["median"].get<double>() == doctest::Approx(0.3));
    CHECK(j["unswitched"]["median"].get<double>() == 0.3);
    CHECK(j["total"] == j["switched"]["count"].get<int>() + j["unswitched"]["count"].get<int>() + j["missing_count"].get<int>());
}

TEST_CASE("pairs csv") {
    const std::vector<PairRecord> recs{make_pair_record("img,1", ConditionCode::parse("S/B"), "default", "cat", "animal",
                                                        "animal", 0.5, 0.25)};
    const std::vector<PairSimilarities> sims{{std::nullopt, 0.75}};
    const auto rows = csv::parse(emit_pairs_csv(recs, sims, meta()));
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] == csv::Row{"image_id", "condition", "prompt_id", "word", "orig_label", "new_label", "switched",
                              "orig_prob", "new_prob", "semantic_sim", "spelling_sim"});
    CHECK(rows[1] == csv::Row{"img,1", "S/B", "default", "cat", "animal", "animal", "false", "0.5", "0.25", "", "0.75"});
    CHECK_THROWS_AS(emit_pairs_csv(recs, {}, meta()), DataError);
}

TEST_CASE("artifacts are written atomically") {
    test::TempDir dir;
    write_artifact(dir / "report", "a.csv", "x\n");
    CHECK(read_file(dir / "report" / "a.csv") == "x\n");
    write_artifact(dir / "report", "a.csv", "y\n");
    CHECK(read_file(dir / "report" / "a.csv") == "y\n");
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir / "report")) ++files;
    CHECK(files == 1);
}
