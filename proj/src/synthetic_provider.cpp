#include <cmath>
#include <numbers>
#include <random>

#include "pwi/error.hpp"
#include "pwi/provider.hpp"
#include "pwi/text.hpp"

namespace pwi {

double EmbeddingVector::norm() const { return std::sqrt(dot(*this, *this)); }

bool EmbeddingVector::all_finite() const {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim())
        throw DataError(Errc::DimensionMismatch,
                        "dimension mismatch: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
    double s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) s += a.values[i] * b.values[i];
    return s;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    const double d = dot(a, b);
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) throw DataError(Errc::ZeroNorm, "cosine of a zero-norm vector");
    return d / (na * nb);
}

EmbeddingVector normalized(const EmbeddingVector& v) {
    const double n = v.norm();
    if (n == 0.0) throw DataError(Errc::ZeroNorm, "cannot normalize a zero vector");
    EmbeddingVector out = v;
    for (auto& x : out.values) x /= n;
    return out;
}

namespace {

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Strips surrounding punctuation so "dog." still matches "dog".
std::vector<std::string> prompt_tokens(std::string_view text) {
    std::vector<std::string> out;
    for (auto tok : split_whitespace(normalize_label(text))) {
        auto b = tok.find_first_not_of(".,;:!?\"'()[]");
        auto e = tok.find_last_not_of(".,;:!?\"'()[]");
        if (b == std::string::npos) continue;
        out.push_back(tok.substr(b, e - b + 1));
    }
    return out;
}

}  // namespace

EmbeddingVector synthetic_vector(std::uint64_t seed, std::string_view label, std::size_t dim) {
    std::mt19937_64 rng(splitmix64(seed ^ fnv1a64(normalize_label(label))));
    constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
    EmbeddingVector v;
    v.values.reserve(dim);
    // Box-Muller on explicit 53-bit uniforms: std::normal_distribution is not
    // portable across standard libraries.
    while (v.values.size() < dim) {
        const double u1 = static_cast<double>((rng() >> 11) + 1) * kScale;  // (0, 1]
        const double u2 = static_cast<double>(rng() >> 11) * kScale;        // [0, 1)
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * std::numbers::pi * u2;
        v.values.push_back(r * std::cos(t));
        if (v.values.size() < dim) v.values.push_back(r * std::sin(t));
    }
    return normalized(v);
}

SyntheticProvider::SyntheticProvider(SyntheticProviderConfig config) : config_(std::move(config)) {
    if (config_.vocabulary.empty()) throw ConfigError(Errc::InvalidConfig, "synthetic vocabulary is empty");
    if (!(config_.gamma >= 0.0 && config_.gamma <= 1.0))
        throw ConfigError(Errc::InvalidConfig, "synthetic gamma must be in [0, 1]");
    if (config_.dim < 2) throw ConfigError(Errc::InvalidConfig, "synthetic dim must be at least 2");
    for (const auto& label : config_.vocabulary) {
        auto n = normalize_label(label);
        if (n.empty()) throw ConfigError(Errc::InvalidConfig, "synthetic vocabulary contains an empty label");
        if (vectors_.count(n))
            throw ConfigError(Errc::InvalidConfig, "synthetic vocabulary has duplicate label '" + n + "'");
        vectors_.emplace(n, synthetic_vector(config_.seed, n, config_.dim));
        token_index_.emplace_back(split_whitespace(n), n);
    }
}

ProviderInfo SyntheticProvider::handshake() {
    return {"synthetic", config_.dim, {Modality::Image, Modality::Text}};
}

const EmbeddingVector& SyntheticProvider::vector_of(std::string_view label) const {
    auto it = vectors_.find(normalize_label(label));
    if (it == vectors_.end())
        throw ProviderError(Errc::OutOfVocabulary, "label '" + std::string(label) + "' is not in the synthetic vocabulary");
    return it->second;
}

EmbeddingVector SyntheticProvider::image_embedding(std::string_view content,
                                                   const std::optional<std::string>& word) const {
    const auto& vc = vector_of(content);
    if (!word) return vc;
    const auto& vw = vector_of(*word);
    const double g = config_.gamma;
    // Endpoints are returned verbatim so the analytic limits hold bit-exactly.
    if (g == 0.0) return vc;
    if (g == 1.0) return vw;
    EmbeddingVector mix;
    mix.values.resize(config_.dim);
    for (std::size_t i = 0; i < config_.dim; ++i) mix.values[i] = (1.0 - g) * vc.values[i] + g * vw.values[i];
    return normalized(mix);
}

EmbeddingVector SyntheticProvider::text_embedding(std::string_view text) const {
    const auto tokens = prompt_tokens(text);
    EmbeddingVector sum;
    sum.values.assign(config_.dim, 0.0);
    std::size_t matches = 0;
    const EmbeddingVector* last = nullptr;
    for (const auto& [needle, label] : token_index_) {
        if (needle.empty() || needle.size() > tokens.size()) continue;
        bool found = false;
        for (std::size_t i = 0; !found && i + needle.size() <= tokens.size(); ++i)
            found = std::equal(needle.begin(), needle.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i));
        if (!found) continue;
        ++matches;
        const auto& v = vectors_.at(label);
        last = &v;
        for (std::size_t d = 0; d < config_.dim; ++d) sum.values[d] += v.values[d];
    }
    if (matches == 0)
        throw ProviderError(Errc::OutOfVocabulary, "text '" + std::string(text) + "' contains no vocabulary word");
    if (matches == 1) return *last;
    return normalized(sum);
}

std::vector<EmbeddingVector> SyntheticProvider::embed_texts(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        try {
            out.push_back(text_embedding(texts[i]));
        } catch (const ProviderError& e) {
            throw ProviderError(e.code(), "batch index " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

std::vector<EmbeddingVector> SyntheticProvider::embed_images(std::span<const ImagePayload> images) {
    std::vector<EmbeddingVector> out;
    out.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto* meta = std::get_if<StimulusMeta>(&images[i]);
        if (!meta)
            throw ProviderError(Errc::UnsupportedPayload,
                                "batch index " + std::to_string(i) + ": synthetic provider needs stimulus metadata");
        try {
            out.push_back(image_embedding(meta->content, meta->word));
        } catch (const ProviderError& e) {
            throw ProviderError(e.code(), "batch index " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace pwi
