#include "pwi/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "pwi/error.hpp"
#include "pwi/io.hpp"
#include "pwi/text.hpp"

namespace pwi {

PairRecord make_pair_record(std::string image_id, ConditionCode condition, std::string prompt_id, std::string word,
                            std::string orig_label, std::string new_label, double orig_prob, double new_prob) {
    PairRecord r{std::move(image_id), condition, std::move(prompt_id), std::move(word), std::move(orig_label),
                 std::move(new_label), false, orig_prob, new_prob};
    r.switched = normalize_label(r.orig_label) != normalize_label(r.new_label);
    return r;
}

double switching_rate(std::span<const PairRecord> records, const ConditionCode& condition) {
    std::size_t total = 0, switched = 0;
    for (const auto& r : records) {
        if (r.condition != condition) continue;
        ++total;
        if (r.switched) ++switched;
    }
    if (total == 0) throw DataError(Errc::NoRecords, "no records for condition " + condition.code());
    return 100.0 * static_cast<double>(switched) / static_cast<double>(total);
}

double jaro(std::string_view a, std::string_view b) {
    if (a.empty() && b.empty()) return 1.0;
    if (a.empty() || b.empty()) return 0.0;
    if (a == b) return 1.0;

    const std::size_t window = std::max<std::size_t>(std::max(a.size(), b.size()) / 2, 1) - 1;
    std::vector<bool> a_matched(a.size(), false), b_matched(b.size(), false);
    std::size_t matches = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const std::size_t lo = i > window ? i - window : 0;
        const std::size_t hi = std::min(b.size(), i + window + 1);
        for (std::size_t j = lo; j < hi; ++j) {
            if (b_matched[j] || a[i] != b[j]) continue;
            a_matched[i] = b_matched[j] = true;
            ++matches;
            break;
        }
    }
    if (matches == 0) return 0.0;

    // Half the number of matched characters that appear in a different order.
    std::size_t out_of_order = 0;
    for (std::size_t i = 0, j = 0; i < a.size(); ++i) {
        if (!a_matched[i]) continue;
        while (!b_matched[j]) ++j;
        if (a[i] != b[j]) ++out_of_order;
        ++j;
    }
    const double m = static_cast<double>(matches);
    const double t = static_cast<double>(out_of_order / 2);
    return (m / static_cast<double>(a.size()) + m / static_cast<double>(b.size()) + (m - t) / m) / 3.0;
}

double jaro_winkler(std::string_view a, std::string_view b) {
    const double j = jaro(a, b);
    std::size_t prefix = 0;
    while (prefix < 4 && prefix < a.size() && prefix < b.size() && a[prefix] == b[prefix]) ++prefix;
    return j + static_cast<double>(prefix) * 0.1 * (1.0 - j);
}

// --- word vectors ------------------------------------------------------------

void WordVectorStore::insert(std::string token, std::vector<double> v) {
    if (dim_ == 0) dim_ = v.size();
    if (v.size() != dim_)
        throw DataError(Errc::DimensionMismatch, "word vector for '" + token + "' has dim " + std::to_string(v.size()) +
                                                     ", store has " + std::to_string(dim_));
    if (!vectors_.emplace(std::move(token), std::move(v)).second) ++duplicates_;
}

WordVectorStore WordVectorStore::parse(std::string_view text) {
    WordVectorStore store;
    std::size_t line_no = 0;
    std::size_t expected_dim = 0;
    std::size_t pos = 0;
    bool first_content_line = true;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        const auto fields = split_whitespace(line);
        if (fields.empty()) continue;

        auto fail = [&](const std::string& why) {
            throw DataError(Errc::ParseError, "word vectors line " + std::to_string(line_no) + ": " + why);
        };

        if (first_content_line) {
            first_content_line = false;
            // Optional "<count> <dim>" header.
            std::size_t count = 0, dim = 0;
            if (fields.size() == 2) {
                const auto& c = fields[0];
                const auto& d = fields[1];
                auto rc = std::from_chars(c.data(), c.data() + c.size(), count);
                auto rd = std::from_chars(d.data(), d.data() + d.size(), dim);
                if (rc.ec == std::errc() && rc.ptr == c.data() + c.size() && rd.ec == std::errc() &&
                    rd.ptr == d.data() + d.size()) {
                    if (dim == 0) fail("header declares dim 0");
                    expected_dim = dim;
                    store.dim_ = dim;
                    continue;
                }
            }
        }

        if (fields.size() < 2) fail("expected a token followed by values");
        std::vector<double> v;
        v.reserve(fields.size() - 1);
        for (std::size_t i = 1; i < fields.size(); ++i) {
            const auto& f = fields[i];
            double x = 0.0;
            auto r = std::from_chars(f.data(), f.data() + f.size(), x);
            if (r.ec != std::errc() || r.ptr != f.data() + f.size() || !std::isfinite(x))
                fail("bad value '" + f + "'");
            v.push_back(x);
        }
        if (expected_dim == 0) expected_dim = v.size();
        if (v.size() != expected_dim)
            fail("expected " + std::to_string(expected_dim) + " values, got " + std::to_string(v.size()));
        store.insert(fields[0], std::move(v));
    }
    if (store.vectors_.empty()) throw DataError(Errc::ParseError, "word vector file has no vectors");
    return store;
}

WordVectorStore WordVectorStore::load(const std::filesystem::path& path) { return parse(read_file(path)); }

const std::vector<double>* WordVectorStore::find(std::string_view token) const {
    auto it = vectors_.find(std::string(token));
    return it == vectors_.end() ? nullptr : &it->second;
}

namespace {
std::string lowercase(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}
}  // namespace

std::optional<std::vector<double>> WordVectorStore::lookup(std::string_view s) const {
    if (auto* v = find(s)) return *v;
    const auto lower = lowercase(s);
    if (auto* v = find(lower)) return *v;
    const auto collapsed = normalize_label(s);
    auto underscored = collapsed;
    std::replace(underscored.begin(), underscored.end(), ' ', '_');
    if (auto* v = find(underscored)) return *v;

    const auto tokens = split_whitespace(s);
    if (tokens.size() < 2) return std::nullopt;
    std::vector<double> mean(dim_, 0.0);
    for (const auto& tok : tokens) {
        const auto* v = find(tok);
        if (!v) v = find(lowercase(tok));
        if (!v) return std::nullopt;
        for (std::size_t i = 0; i < dim_; ++i) mean[i] += (*v)[i];
    }
    for (auto& x : mean) x /= static_cast<double>(tokens.size());
    return mean;
}

std::optional<double> semantic_similarity(const WordVectorStore& store, std::string_view a, std::string_view b) {
    const auto va = store.lookup(a);
    const auto vb = store.lookup(b);
    if (!va || !vb) return std::nullopt;
    double d = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < va->size(); ++i) {
        d += (*va)[i] * (*vb)[i];
        na += (*va)[i] * (*va)[i];
        nb += (*vb)[i] * (*vb)[i];
    }
    if (na == 0.0 || nb == 0.0) return std::nullopt;
    return std::clamp(d / std::sqrt(na * nb), -1.0, 1.0);
}

// --- distributions -----------------------------------------------------------

std::string_view to_string(SimilarityMetric m) { return m == SimilarityMetric::Semantic ? "semantic" : "spelling"; }

std::optional<double> median(std::vector<double> values) {
    if (values.empty()) return std::nullopt;
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

SimilaritySplit split_by_switch(std::span<const PairRecord> records, SimilarityMetric metric,
                                const WordVectorStore* store) {
    if (metric == SimilarityMetric::Semantic && !store)
        throw ConfigError(Errc::InvalidConfig, "semantic similarity needs a word-vector file");
    SimilaritySplit split;
    for (const auto& r : records) {
        std::optional<double> value;
        if (metric == SimilarityMetric::Semantic)
            value = semantic_similarity(*store, r.orig_label, r.word);
        else
            value = jaro_winkler(normalize_label(r.orig_label), normalize_label(r.word));
        if (!value) {
            ++split.missing_count;
            continue;
        }
        (r.switched ? split.switched_values : split.unswitched_values).push_back(*value);
    }
    split.switched_median = median(split.switched_values);
    split.unswitched_median = median(split.unswitched_values);
    return split;
}

Relatedness switched_label_relatedness(std::span<const PairRecord> records, const WordVectorStore& store) {
    Relatedness out;
    for (const auto& r : records) {
        if (!r.switched) continue;
        if (auto v = semantic_similarity(store, r.new_label, r.word))
            out.values.push_back(*v);
        else
            ++out.missing_count;
    }
    return out;
}

}  // namespace pwi
