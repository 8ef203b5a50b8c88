#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pwi/error.hpp"
#include "pwi/zeroshot.hpp"

using namespace pwi;

namespace {

EmbeddingVector random_vector(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> n;
    EmbeddingVector v{std::vector<double>(dim)};
    for (auto& x : v.values) x = n(rng);
    return v;
}

}  // namespace

TEST_CASE("prompt instantiation") {
    CHECK(instantiate_prompt(builtin_template("default"), "dog") == "a photo of a dog");
    CHECK(instantiate_prompt(builtin_template("variable-word-and-picture"), "cat", std::string("electric")) ==
          "a photo of the word electric written in a red font over a picture of a cat");
    const PromptTemplate t{"t", "a {X} and {Y}", PromptFocus::Variable};
    CHECK(instantiate_prompt(t, "{Y}", std::string("{X}")) == "a {Y} and {X}");
    CHECK(instantiate_prompt(builtin_template("default"), "{X}") == "a photo of a {X}");
    CHECK_THROWS_AS(instantiate_prompt(t, "dog"), ConfigError);
    CHECK_THROWS_AS(instantiate_prompt(builtin_template("default"), "dog", std::string("cat")), ConfigError);
}

TEST_CASE("built-in templates match the prompt sweep list") {
    const auto& all = builtin_templates();
    REQUIRE(all.size() == 8);
    const std::vector<std::string> patterns{
        "a photo of a {X}",
        "a red word label over a picture of a {X}",
        "a word is printed in a red font over a picture of a {X}",
        "a photo of a word written in a red font over a picture of a {X}",
        "a text that says {X}",
        "a word of a {X} is printed in a red font over a picture",
        "a photo of the word {X} written in a red font over a picture",
        "a photo of the word {Y} written in a red font over a picture of a {X}",
    };
    for (std::size_t i = 0; i < all.size(); ++i) {
        CHECK(all[i].pattern == patterns[i]);
        CHECK_NOTHROW(all[i].validate());
    }
    CHECK(std::count_if(all.begin(), all.end(), [](const auto& t) { return t.focus == PromptFocus::ImageContent; }) == 3);
    CHECK(std::count_if(all.begin(), all.end(), [](const auto& t) { return t.focus == PromptFocus::SuperimposedWord; }) == 3);
    CHECK_THROWS_AS(builtin_template("nope"), ConfigError);
}

TEST_CASE("template validation and loading") {
    CHECK_THROWS_AS((PromptTemplate{"a", "no placeholder", PromptFocus::Default}.validate()), ConfigError);
    CHECK_THROWS_AS((PromptTemplate{"a", "{X} {X}", PromptFocus::Default}.validate()), ConfigError);
    CHECK_THROWS_AS((PromptTemplate{"a", "{X} {Y}", PromptFocus::Default}.validate()), ConfigError);
    CHECK_THROWS_AS((PromptTemplate{"a", "{X}", PromptFocus::Variable}.validate()), ConfigError);
    const auto ts = parse_templates(R"([{"id":"mine","pattern":"an image of {X}","focus":"image_content"}])");
    REQUIRE(ts.size() == 1);
    CHECK(ts[0].focus == PromptFocus::ImageContent);
    CHECK_THROWS_AS(parse_templates(R"([{"id":"bad","pattern":"x","focus":"default"}])"), ConfigError);
}

TEST_CASE("softmax closed forms") {
    const std::vector<double> two{0.0, std::log(2.0)};
    const auto p = softmax(two);
    CHECK(p[0] == doctest::Approx(1.0 / 3).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(2.0 / 3).epsilon(1e-15));
    const std::vector<double> big{1000.0, 1000.0};
    CHECK(softmax(big)[0] == 0.5);
}

TEST_CASE("classify: one matching label among orthogonal ones") {
    std::vector<EmbeddingVector> labels{{{1, 0, 0, 0}}, {{0, 1, 0, 0}}, {{0, 0, 1, 0}}};
    const std::vector<std::string> names{"a", "b", "c"};
    const auto r = classify(EmbeddingVector{{0, 0, 1, 0}}, labels, names);
    CHECK(r.predicted_index == 2);
    CHECK(r.predicted == "c");
    CHECK(r.probabilities[2] > 0.99);
}

TEST_CASE("classify: cosines (0, ln 2 / scale) give probabilities (1/3, 2/3)") {
    const double c = std::log(2.0) / kDefaultLogitScale;
    const std::vector<EmbeddingVector> labels{{{0, 1}}, {{c, std::sqrt(1 - c * c)}}};
    const auto r = classify(EmbeddingVector{{1, 0}}, labels, std::vector<std::string>{"x", "y"});
    CHECK(r.cosines[0] == 0.0);
    CHECK(r.probabilities[0] == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(r.probabilities[1] == doctest::Approx(2.0 / 3).epsilon(1e-12));
    CHECK(r.predicted == "y");
}

TEST_CASE("classify: identical labels tie to index 0 with uniform probabilities") {
    std::vector<EmbeddingVector> labels(4, EmbeddingVector{{1, 2, 3}});
    const std::vector<std::string> names{"a", "b", "c", "d"};
    const auto r = classify(EmbeddingVector{{3, 1, 0}}, labels, names);
    CHECK(r.predicted_index == 0);
    for (double p : r.probabilities) CHECK(p == doctest::Approx(0.25));
}

TEST_CASE("classify errors") {
    const std::vector<std::string> names{"a"};
    CHECK_THROWS_AS(classify(EmbeddingVector{{1, 0}}, std::vector<EmbeddingVector>{{{1, 0, 0}}}, names), DataError);
    CHECK_THROWS_AS(classify(EmbeddingVector{{0, 0}}, std::vector<EmbeddingVector>{{{1, 0}}}, names), DataError);
    CHECK_THROWS(classify(EmbeddingVector{{1, 0}}, std::vector<EmbeddingVector>{{{1, 0}}, {{0, 1}}}, names));
}

TEST_CASE("classification properties: scale invariance, permutation equivariance, probabilities") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 2 + rng() % 6;
        std::vector<EmbeddingVector> labels;
        std::vector<std::string> names;
        for (std::size_t i = 0; i < k; ++i) {
            labels.push_back(random_vector(rng, 16));
            names.push_back("l" + std::to_string(i));
        }
        auto img = random_vector(rng, 16);
        const auto r = classify(img, labels, names);
        CHECK(std::accumulate(r.probabilities.begin(), r.probabilities.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
        for (std::size_t i = 0; i < k; ++i) CHECK(r.probabilities[i] <= r.probabilities[r.predicted_index]);

        // Positive rescaling of logit scale and of any vector keeps the argmax.
        auto scaled = labels;
        for (auto& v : scaled) {
            const double s = 0.5 + static_cast<double>(rng() % 100) / 10.0;
            for (auto& x : v.values) x *= s;
        }
        for (auto& x : img.values) x *= 7.0;
        CHECK(classify(img, scaled, names, 3.0).predicted_index == r.predicted_index);

        // Permuting labels permutes outputs.
        std::vector<std::size_t> perm(k);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<EmbeddingVector> pl;
        std::vector<std::string> pn;
        for (auto i : perm) {
            pl.push_back(labels[i]);
            pn.push_back(names[i]);
        }
        const auto rp = classify(img, pl, pn);
        CHECK(rp.predicted == r.predicted);
        for (std::size_t i = 0; i < k; ++i) CHECK(rp.probabilities[i] == doctest::Approx(r.probabilities[perm[i]]).epsilon(1e-12));
    }
}
