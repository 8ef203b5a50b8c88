#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pwi/corpus.hpp"
#include "pwi/io.hpp"
#include "pwi/stimulus.hpp"

namespace pwi::test {

class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "pwi-test-XXXXXX").string();
        path_ = mkdtemp(tmpl.data());
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline RgbImage solid_image(int w, int h, std::array<std::uint8_t, 3> rgb) {
    RgbImage img{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3)};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.set(x, y, rgb);
    return img;
}

struct CorpusShape {
    std::vector<std::pair<std::string, std::vector<std::string>>> taxonomy{
        {"animal", {"dog", "cat"}},      {"vehicle", {"car", "bus"}},   {"furniture", {"chair", "table"}},
        {"food", {"apple", "bread"}},    {"tool", {"hammer", "saw"}}};
    int images_per_basic = 5;
    std::vector<std::string> superordinate_words{"animal", "vehicle", "furniture", "food",     "tool",
                                                 "plant",  "building", "clothing", "weapon", "toy"};
    std::vector<std::string> basic_words{"dog", "cat", "car", "bus", "chair", "table", "apple", "bread", "hammer", "saw"};
    int image_size = 64;
};

/// Writes images, manifest and word lists; returns the manifest path.
inline std::filesystem::path write_corpus(const std::filesystem::path& dir, const CorpusShape& shape = {}) {
    std::filesystem::create_directories(dir / "images");
    std::vector<ImageRecord> records;
    int n = 0;
    for (const auto& [super, basics] : shape.taxonomy)
        for (const auto& basic : basics)
            for (int k = 0; k < shape.images_per_basic; ++k, ++n) {
                const auto id = basic + "_" + std::to_string(k);
                const std::array<std::uint8_t, 3> rgb{static_cast<std::uint8_t>(40 + 3 * n),
                                                      static_cast<std::uint8_t>(200 - 2 * n),
                                                      static_cast<std::uint8_t>(90 + n)};
                write_file_atomic(dir / "images" / (id + ".png"),
                                  encode_png(solid_image(shape.image_size, shape.image_size, rgb)));
                records.push_back({id, "images/" + id + ".png", basic, super});
            }
    save_manifest(dir / "manifest.csv", records);
    nlohmann::json s{{"category", "superordinate"}, {"words", shape.superordinate_words}};
    nlohmann::json b{{"category", "basic"}, {"words", shape.basic_words}};
    write_file_atomic(dir / "words_super.json", s.dump());
    write_file_atomic(dir / "words_basic.json", b.dump());
    return dir / "manifest.csv";
}

/// Minimal run config over a corpus written by write_corpus.
inline nlohmann::json base_config(double gamma = 0.0, bool include_own_label = true) {
    return {{"manifest", "manifest.csv"},
            {"word_lists", {"words_super.json", "words_basic.json"}},
            {"provider", {{"type", "synthetic"}, {"gamma", gamma}}},
            {"include_own_label", include_own_label},
            {"seed", 7},
            {"output_dir", "out"}};
}

inline std::filesystem::path write_config(const std::filesystem::path& dir, const nlohmann::json& config,
                                          const std::string& name = "run.json") {
    write_file_atomic(dir / name, config.dump(2));
    return dir / name;
}

}  // namespace pwi::test
