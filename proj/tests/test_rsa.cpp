#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "pwi/error.hpp"
#include "pwi/rsa.hpp"

using namespace pwi;

namespace {

std::vector<std::string> ids_for(std::size_t n) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("i" + std::to_string(i));
    return ids;
}

Rdm from_upper(std::size_t n, const std::vector<double>& upper) {
    std::vector<double> v(n * n, 0.0);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) v[i * n + j] = v[j * n + i] = upper[k++];
    return Rdm(ids_for(n), v);
}

}  // namespace

TEST_CASE("rdm of three planar vectors") {
    const std::vector<EmbeddingVector> e{{{1, 0}}, {{0, 1}}, {{-1, 0}}};
    const auto ids = ids_for(3);
    const auto r = compute_rdm(e, ids);
    CHECK(r.values() == std::vector<double>{0, 1, 2, 1, 0, 1, 2, 1, 0});
    CHECK(mean_offdiag(r) == doctest::Approx(4.0 / 3).epsilon(1e-15));
}

TEST_CASE("identical embeddings give an all-zero rdm") {
    const std::vector<EmbeddingVector> e(5, EmbeddingVector{{0.3, -2, 1}});
    const auto r = compute_rdm(e, ids_for(5));
    for (double v : r.values()) CHECK(v == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(mean_offdiag(from_upper(4, std::vector<double>(6, 0.0))) == 0.0);
}

TEST_CASE("rdm errors") {
    const std::vector<EmbeddingVector> one{{{1, 0}}};
    CHECK_THROWS_AS(compute_rdm(one, ids_for(1)), DataError);
    const std::vector<EmbeddingVector> mixed{{{1, 0}}, {{1, 0, 0}}};
    CHECK_THROWS_AS(compute_rdm(mixed, ids_for(2)), DataError);
    const std::vector<EmbeddingVector> zero{{{1, 0}}, {{0, 0}}};
    CHECK_THROWS_AS(compute_rdm(zero, ids_for(2)), DataError);
    CHECK_THROWS_AS(compute_rdm(std::vector<EmbeddingVector>{{{1, 0}}, {{0, 1}}}, ids_for(3)), DataError);
}

TEST_CASE("large rdm filled in parallel is symmetric and matches direct computation") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n;
    std::vector<EmbeddingVector> e(156, EmbeddingVector{std::vector<double>(16)});
    for (auto& v : e)
        for (auto& x : v.values) x = n(rng);
    const auto r = compute_rdm(e, ids_for(156));
    CHECK(r.size() == 156);
    for (std::size_t i = 0; i < 156; ++i) {
        CHECK(r.at(i, i) == 0.0);
        for (std::size_t j = 0; j < 156; j += 13) {
            CHECK(r.at(i, j) == r.at(j, i));
            if (i != j) CHECK(r.at(i, j) == doctest::Approx(1 - cosine(e[i], e[j])).epsilon(1e-12));
        }
    }
}

TEST_CASE("spearman on rdms") {
    const auto a = from_upper(4, {0.1, 0.5, 0.3, 0.9, 0.2, 0.7});
    CHECK(compare_rdms(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    const auto rev = from_upper(4, {0.9, 0.5, 0.7, 0.1, 0.8, 0.3});
    CHECK(compare_rdms(a, rev) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK_THROWS_AS(compare_rdms(a, from_upper(3, {1, 2, 3})), DataError);
    CHECK_THROWS_AS(compare_rdms(from_upper(2, {1}), from_upper(2, {1})), DataError);
    try {
        compare_rdms(a, from_upper(4, std::vector<double>(6, 0.5)));
        FAIL("expected ZeroVariance");
    } catch (const DataError& e) {
        CHECK(e.code() == Errc::ZeroVariance);
    }
}

TEST_CASE("spearman matches the brute-force oracle with ties") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(45), y(45);
        for (auto& v : x) v = static_cast<double>(rng() % 7) / 3.0;
        for (auto& v : y) v = static_cast<double>(rng() % 1000) / 999.0;
        CHECK(spearman(x, y) == doctest::Approx(oracle::spearman(x, y)).epsilon(1e-12));
    }
    const std::vector<double> tied{1, 2, 2, 3};
    CHECK(average_ranks(tied) == std::vector<double>{1, 2.5, 2.5, 4});
}

TEST_CASE("cluster index") {
    // Items 0,1 in A; 2,3 in B.
    auto r = from_upper(4, {0.2, 0.8, 0.8, 0.8, 0.8, 0.2});
    r.set_categories({{"i0", "A"}, {"i1", "A"}, {"i2", "B"}, {"i3", "B"}});
    CHECK(cluster_index(r) == doctest::Approx(0.6).epsilon(1e-15));

    auto flat = from_upper(4, std::vector<double>(6, 0.4));
    flat.set_categories({{"i0", "A"}, {"i1", "A"}, {"i2", "B"}, {"i3", "B"}});
    CHECK(cluster_index(flat) == 0.0);

    auto singletons = from_upper(3, {1, 1, 1});
    singletons.set_categories({{"i0", "A"}, {"i1", "B"}, {"i2", "C"}});
    CHECK_THROWS_AS(cluster_index(singletons), DataError);
    CHECK_THROWS_AS(cluster_index(from_upper(3, {1, 1, 1})), DataError);
}

TEST_CASE("category vectors plus noise cluster") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n;
    std::vector<EmbeddingVector> cats(3, EmbeddingVector{std::vector<double>(32)});
    for (auto& c : cats)
        for (auto& x : c.values) x = n(rng);
    std::vector<EmbeddingVector> items;
    std::map<std::string, std::string> category_of;
    const auto ids = ids_for(18);
    for (std::size_t i = 0; i < 18; ++i) {
        EmbeddingVector v = cats[i % 3];
        for (auto& x : v.values) x += 0.3 * n(rng);
        items.push_back(v);
        category_of[ids[i]] = std::to_string(i % 3);
    }
    auto r = compute_rdm(items, ids);
    r.set_categories(category_of);
    CHECK(cluster_index(r) > 0.0);
}

TEST_CASE("rdm csv round-trip and validation") {
    const auto r = from_upper(3, {0.1, 1.0 / 3, 2.0});
    const auto text = format_rdm_csv(r);
    CHECK(text.substr(0, 12) == "id,i0,i1,i2\n");
    CHECK(parse_rdm_csv("# meta {}\n" + text) == r);
    CHECK_THROWS_AS(parse_rdm_csv("id,a,b\na,0,1\nb,2,0\n"), DataError);
    CHECK_THROWS_AS(parse_rdm_csv("id,a,b\na,1,1\nb,1,0\n"), DataError);
    CHECK_THROWS_AS(parse_rdm_csv("id,a,b\na,0,1\n"), DataError);
    CHECK_THROWS_AS(parse_rdm_csv("id,a,b\na,0,1\nc,1,0\n"), DataError);
}
