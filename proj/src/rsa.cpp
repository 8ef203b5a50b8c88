#include "pwi/rsa.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <thread>

#include "pwi/csv.hpp"
#include "pwi/error.hpp"
#include "pwi/report.hpp"

namespace pwi {

Rdm::Rdm(std::vector<std::string> ids, std::vector<double> values) : ids_(std::move(ids)), values_(std::move(values)) {
    if (values_.size() != ids_.size() * ids_.size())
        throw DataError(Errc::DimensionMismatch, "RDM values do not form an n x n matrix");
}

std::vector<double> Rdm::upper_triangle() const {
    const auto n = size();
    std::vector<double> out;
    out.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) out.push_back(at(i, j));
    return out;
}

Rdm compute_rdm(std::span<const EmbeddingVector> embeddings, std::span<const std::string> ids) {
    const auto n = embeddings.size();
    if (n < 2) throw DataError(Errc::TooFewItems, "an RDM needs at least 2 embeddings");
    if (ids.size() != n) throw DataError(Errc::MismatchedIds, "RDM ids and embeddings differ in length");
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (embeddings[i].dim() != embeddings[0].dim())
            throw DataError(Errc::DimensionMismatch, "embedding '" + ids[i] + "' has a different dimension");
        norms[i] = embeddings[i].norm();
        if (norms[i] == 0.0) throw DataError(Errc::ZeroNorm, "embedding '" + ids[i] + "' has zero norm");
    }

    std::vector<double> values(n * n, 0.0);
    // Each (i, j>i) entry is written by exactly one worker; the result does not
    // depend on the schedule.
    auto fill_rows = [&](std::size_t first, std::size_t stride) {
        for (std::size_t i = first; i < n; i += stride)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double c = dot(embeddings[i], embeddings[j]) / (norms[i] * norms[j]);
                const double d = std::clamp(1.0 - c, 0.0, 2.0);
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
    };
    const std::size_t workers = std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), n / 64 + 1);
    if (workers <= 1) {
        fill_rows(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(fill_rows, w, workers);
    }
    return Rdm({ids.begin(), ids.end()}, std::move(values));
}

std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DataError(Errc::DimensionMismatch, "spearman inputs differ in length");
    if (x.size() < 3) throw DataError(Errc::TooFewItems, "spearman needs at least 3 values");
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double n = static_cast<double>(rx.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        const double dx = rx[i] - mx, dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw DataError(Errc::ZeroVariance, "spearman of a constant sequence is undefined");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double compare_rdms(const Rdm& a, const Rdm& b) {
    if (a.ids() != b.ids()) throw DataError(Errc::MismatchedIds, "RDMs must share the same ordered ids");
    if (a.size() < 3) throw DataError(Errc::TooFewItems, "comparing RDMs needs n >= 3");
    const auto ua = a.upper_triangle();
    const auto ub = b.upper_triangle();
    return spearman(ua, ub);
}

double cluster_index(const Rdm& rdm) {
    const auto& cats = rdm.category_of();
    if (!cats) throw DataError(Errc::NoWithinPairs, "cluster_index needs item categories");
    std::vector<const std::string*> cat(rdm.size());
    std::map<std::string, int> distinct;
    for (std::size_t i = 0; i < rdm.size(); ++i) {
        auto it = cats->find(rdm.ids()[i]);
        if (it == cats->end()) throw DataError(Errc::NoWithinPairs, "no category for item '" + rdm.ids()[i] + "'");
        cat[i] = &it->second;
        ++distinct[it->second];
    }
    if (distinct.size() < 2) throw DataError(Errc::NoWithinPairs, "cluster_index needs at least 2 categories");
    double within = 0.0, between = 0.0;
    std::size_t nw = 0, nb = 0;
    for (std::size_t i = 0; i < rdm.size(); ++i)
        for (std::size_t j = i + 1; j < rdm.size(); ++j) {
            if (*cat[i] == *cat[j]) {
                within += rdm.at(i, j);
                ++nw;
            } else {
                between += rdm.at(i, j);
                ++nb;
            }
        }
    if (nw == 0) throw DataError(Errc::NoWithinPairs, "every category has a single member");
    return between / static_cast<double>(nb) - within / static_cast<double>(nw);
}

double mean_offdiag(const Rdm& rdm) {
    if (rdm.size() < 2) throw DataError(Errc::TooFewItems, "mean_offdiag needs n >= 2");
    const auto u = rdm.upper_triangle();
    return std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(u.size());
}

std::string format_rdm_csv(const Rdm& rdm) {
    csv::Row header{"id"};
    header.insert(header.end(), rdm.ids().begin(), rdm.ids().end());
    std::string out = csv::format_row(header);
    for (std::size_t i = 0; i < rdm.size(); ++i) {
        csv::Row row{rdm.ids()[i]};
        for (std::size_t j = 0; j < rdm.size(); ++j) row.push_back(format_double(rdm.at(i, j)));
        out += csv::format_row(row);
    }
    return out;
}

Rdm parse_rdm_csv(std::string_view text) {
    const auto rows = csv::parse(text);
    if (rows.empty() || rows[0].empty() || rows[0][0] != "id") throw DataError(Errc::ParseError, "RDM csv needs an id header");
    std::vector<std::string> ids(rows[0].begin() + 1, rows[0].end());
    const auto n = ids.size();
    if (rows.size() != n + 1) throw DataError(Errc::ParseError, "RDM csv is not square");
    std::vector<double> values(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = rows[i + 1];
        if (row.size() != n + 1 || row[0] != ids[i])
            throw DataError(Errc::MismatchedIds, "RDM csv row " + std::to_string(i + 1) + " does not match the header");
        for (std::size_t j = 0; j < n; ++j) {
            const auto& f = row[j + 1];
            double v = 0.0;
            auto r = std::from_chars(f.data(), f.data() + f.size(), v);
            if (r.ec != std::errc() || r.ptr != f.data() + f.size())
                throw DataError(Errc::ParseError, "RDM csv: bad value '" + f + "'");
            values[i * n + j] = v;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (values[i * n + i] != 0.0) throw DataError(Errc::ParseError, "RDM csv has a nonzero diagonal");
        for (std::size_t j = i + 1; j < n; ++j)
            if (values[i * n + j] != values[j * n + i]) throw DataError(Errc::ParseError, "RDM csv is not symmetric");
    }
    return Rdm(std::move(ids), std::move(values));
}

}  // namespace pwi
