#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pwi {

/// Raw provider output; not necessarily unit norm. All consumers use cosine.
struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }
    double norm() const;
    bool all_finite() const;
    bool operator==(const EmbeddingVector&) const = default;
};

double dot(const EmbeddingVector& a, const EmbeddingVector& b);
/// Throws DataError on dimension mismatch or zero norm.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);
EmbeddingVector normalized(const EmbeddingVector& v);

enum class Modality { Image, Text };

struct ProviderInfo {
    std::string name;
    std::size_t dim = 0;
    std::set<Modality> modalities;

    bool operator==(const ProviderInfo&) const = default;
};

struct EncodedImage {
    std::vector<std::uint8_t> png;
};

/// Stimulus metadata in place of pixels; only the synthetic provider takes it.
struct StimulusMeta {
    std::string content;
    std::optional<std::string> word;
};

using ImagePayload = std::variant<EncodedImage, StimulusMeta>;

class Provider {
public:
    virtual ~Provider() = default;

    virtual ProviderInfo handshake() = 0;
    virtual std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts) = 0;
    virtual std::vector<EmbeddingVector> embed_images(std::span<const ImagePayload> images) = 0;
    /// True when image payloads must be encoded pixels.
    virtual bool wants_pixels() const = 0;
};

// ---------------------------------------------------------------------------
// Synthetic provider

/// PRNG identifier recorded in report headers.
inline constexpr std::string_view kSyntheticPrngId = "mt19937_64/splitmix64(seed^fnv1a64(label))/box-muller v1";

/// Unit vector with standard-normal components keyed by (seed, normalized label).
EmbeddingVector synthetic_vector(std::uint64_t seed, std::string_view label, std::size_t dim = 64);

struct SyntheticProviderConfig {
    std::vector<std::string> vocabulary;
    std::uint64_t seed = 0;
    double gamma = 0.0;  // language-bias mixing weight
    std::size_t dim = 64;
};

class SyntheticProvider final : public Provider {
public:
    explicit SyntheticProvider(SyntheticProviderConfig config);

    ProviderInfo handshake() override;
    std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts) override;
    std::vector<EmbeddingVector> embed_images(std::span<const ImagePayload> images) override;
    bool wants_pixels() const override { return false; }

    /// normalize((1 - gamma) v_content + gamma v_word), or v_content without a word.
    EmbeddingVector image_embedding(std::string_view content, const std::optional<std::string>& word) const;
    /// Normalized sum of the vectors of every vocabulary entry occurring as a
    /// token run in the text.
    EmbeddingVector text_embedding(std::string_view text) const;

    const SyntheticProviderConfig& config() const { return config_; }
    const EmbeddingVector& vector_of(std::string_view label) const;

private:
    SyntheticProviderConfig config_;
    std::map<std::string, EmbeddingVector> vectors_;               // normalized label -> vector
    std::vector<std::pair<std::vector<std::string>, std::string>> token_index_;  // tokens -> label
};

// ---------------------------------------------------------------------------
// External provider over JSON lines

struct SubprocessOptions {
    std::size_t batch_size = 32;
    std::chrono::milliseconds timeout{120000};
};

/// Talks the JSON-lines protocol with a child process started via /bin/sh -c.
class SubprocessProvider final : public Provider {
public:
    explicit SubprocessProvider(std::string command, SubprocessOptions options = {});
    ~SubprocessProvider() override;
    SubprocessProvider(const SubprocessProvider&) = delete;
    SubprocessProvider& operator=(const SubprocessProvider&) = delete;

    ProviderInfo handshake() override;
    std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts) override;
    std::vector<EmbeddingVector> embed_images(std::span<const ImagePayload> images) override;
    bool wants_pixels() const override { return true; }

    /// Sends {"op":"close"} and reaps the child. Idempotent.
    void close();

private:
    class Channel;
    std::vector<EmbeddingVector> request_embeddings(const std::string& op, const std::string& field,
                                                    std::vector<std::string> encoded_items, std::size_t offset);

    std::string command_;
    SubprocessOptions options_;
    std::unique_ptr<Channel> channel_;
    std::optional<ProviderInfo> info_;
    std::int64_t next_id_ = 1;
};

// ---------------------------------------------------------------------------
// Content-addressed embedding cache

/// Deduplicates requests by content digest and optionally persists vectors to
/// a JSON file. Every distinct item reaches the inner provider at most once.
class EmbeddingCache {
public:
    EmbeddingCache(Provider& inner, std::string provider_name, std::optional<std::filesystem::path> store = {});

    std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts);
    std::vector<EmbeddingVector> embed_images(std::span<const ImagePayload> images);

    /// Writes the persistent store, if any.
    void flush() const;

    std::size_t text_requests() const { return text_requests_; }
    std::size_t image_requests() const { return image_requests_; }
    std::size_t items_sent() const { return items_sent_; }

    static std::string digest(std::string_view text);
    static std::string digest(const ImagePayload& image);

private:
    template <class T, class Fn>
    std::vector<EmbeddingVector> lookup(std::span<const T> items, Fn&& fetch, std::size_t& counter);

    Provider& inner_;
    std::string name_;
    std::optional<std::filesystem::path> store_;
    std::map<std::string, EmbeddingVector> entries_;
    std::size_t text_requests_ = 0;
    std::size_t image_requests_ = 0;
    std::size_t items_sent_ = 0;
};

}  // namespace pwi
