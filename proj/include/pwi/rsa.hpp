#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pwi/provider.hpp"

namespace pwi {

/// Representational dissimilarity matrix: dense, row-major, symmetric, zero
/// diagonal, entries 1 - cosine in [0, 2].
class Rdm {
public:
    Rdm() = default;
    Rdm(std::vector<std::string> ids, std::vector<double> values);

    std::size_t size() const { return ids_.size(); }
    double at(std::size_t i, std::size_t j) const { return values_[i * ids_.size() + j]; }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::vector<double>& values() const { return values_; }

    /// Strict upper triangle, row by row.
    std::vector<double> upper_triangle() const;

    const std::optional<std::map<std::string, std::string>>& category_of() const { return category_of_; }
    void set_categories(std::map<std::string, std::string> category_of) { category_of_ = std::move(category_of); }

    bool operator==(const Rdm&) const = default;

private:
    std::vector<std::string> ids_;
    std::vector<double> values_;
    std::optional<std::map<std::string, std::string>> category_of_;
};

/// values[i][j] = 1 - cos(e_i, e_j), computed once per unordered pair and
/// mirrored; diagonal exactly 0. Rows are filled in parallel.
Rdm compute_rdm(std::span<const EmbeddingVector> embeddings, std::span<const std::string> ids);

/// Spearman rank correlation of the strict upper triangles (average ranks for ties).
double compare_rdms(const Rdm& a, const Rdm& b);

/// Pearson correlation of average ranks; exposed for reuse and testing.
double spearman(std::span<const double> x, std::span<const double> y);
std::vector<double> average_ranks(std::span<const double> x);

/// Mean between-category minus mean within-category dissimilarity.
double cluster_index(const Rdm& rdm);

double mean_offdiag(const Rdm& rdm);

/// CSV: header `id,<id_1>,...,<id_n>` then one row per item.
std::string format_rdm_csv(const Rdm& rdm);
/// Verifies squareness, id agreement and exact symmetry.
Rdm parse_rdm_csv(std::string_view text);

}  // namespace pwi
