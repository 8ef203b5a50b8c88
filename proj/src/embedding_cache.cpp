#include <set>

#include <json.hpp>

#include "pwi/error.hpp"
#include "pwi/io.hpp"
#include "pwi/provider.hpp"

namespace pwi {

EmbeddingCache::EmbeddingCache(Provider& inner, std::string provider_name, std::optional<std::filesystem::path> store)
    : inner_(inner), name_(std::move(provider_name)), store_(std::move(store)) {
    if (!store_ || !std::filesystem::exists(*store_)) return;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(*store_));
    } catch (const nlohmann::json::exception&) {
        return;  // unreadable cache is rebuilt
    }
    if (!j.is_object() || j.value("provider", "") != name_ || !j.contains("entries")) return;
    for (const auto& [key, vec] : j["entries"].items()) entries_.emplace(key, EmbeddingVector{vec.get<std::vector<double>>()});
}

std::string EmbeddingCache::digest(std::string_view text) {
    std::string buf = "text\n";
    buf += text;
    return sha256_hex(buf);
}

std::string EmbeddingCache::digest(const ImagePayload& image) {
    if (const auto* png = std::get_if<EncodedImage>(&image))
        return sha256_hex("png\n" + std::string(png->png.begin(), png->png.end()));
    const auto& meta = std::get<StimulusMeta>(image);
    std::string buf = "meta\n" + meta.content + "\n";
    buf += meta.word ? "1" + *meta.word : std::string("0");
    return sha256_hex(buf);
}

template <class T, class Fn>
std::vector<EmbeddingVector> EmbeddingCache::lookup(std::span<const T> items, Fn&& fetch, std::size_t& counter) {
    std::vector<std::string> keys;
    keys.reserve(items.size());
    std::vector<T> misses;
    std::vector<std::string> miss_keys;
    std::set<std::string> pending;
    for (const auto& item : items) {
        auto key = name_ + ":" + digest(item);
        if (!entries_.count(key) && pending.insert(key).second) {
            misses.push_back(item);
            miss_keys.push_back(key);
        }
        keys.push_back(std::move(key));
    }
    if (!misses.empty()) {
        ++counter;
        items_sent_ += misses.size();
        auto fetched = fetch(std::span<const T>(misses));
        if (fetched.size() != misses.size())
            throw ProviderError(Errc::ProtocolViolation, "provider returned the wrong number of embeddings");
        for (std::size_t i = 0; i < misses.size(); ++i) entries_.emplace(miss_keys[i], std::move(fetched[i]));
    }
    std::vector<EmbeddingVector> out;
    out.reserve(items.size());
    for (const auto& key : keys) out.push_back(entries_.at(key));
    return out;
}

std::vector<EmbeddingVector> EmbeddingCache::embed_texts(std::span<const std::string> texts) {
    return lookup(texts, [&](std::span<const std::string> m) { return inner_.embed_texts(m); }, text_requests_);
}

std::vector<EmbeddingVector> EmbeddingCache::embed_images(std::span<const ImagePayload> images) {
    return lookup(images, [&](std::span<const ImagePayload> m) { return inner_.embed_images(m); }, image_requests_);
}

void EmbeddingCache::flush() const {
    if (!store_) return;
    nlohmann::json j;
    j["provider"] = name_;
    j["entries"] = nlohmann::json::object();
    for (const auto& [key, vec] : entries_) j["entries"][key] = vec.values;
    write_file_atomic(*store_, j.dump());
}

}  // namespace pwi
