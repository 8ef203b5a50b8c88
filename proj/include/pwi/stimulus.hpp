#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pwi {

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    std::array<std::uint8_t, 3> at(int x, int y) const {
        const auto* p = &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
        return {p[0], p[1], p[2]};
    }
    void set(int x, int y, std::array<std::uint8_t, 3> rgb) {
        auto* p = &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
        p[0] = rgb[0];
        p[1] = rgb[1];
        p[2] = rgb[2];
    }
    bool operator==(const RgbImage&) const = default;
};

/// Decodes any PNG libpng understands, converted to 8-bit RGB (alpha dropped).
RgbImage decode_png(const std::vector<std::uint8_t>& bytes);
/// Deterministic encoding: fixed zlib level, no time or text chunks.
std::vector<std::uint8_t> encode_png(const RgbImage& image);

/// Plain-text binary bitmap font (.pwf): one mask per printable ASCII glyph,
/// all glyphs sharing one cell height.
class BitmapFont {
public:
    struct Glyph {
        int advance = 0;
        std::vector<std::uint8_t> mask;  // cell_height x advance, 1 = ink
    };

    static std::shared_ptr<const BitmapFont> load(const std::filesystem::path& path);
    static BitmapFont parse(std::string_view text);

    int cell_height() const { return cell_height_; }
    const std::string& family() const { return family_; }
    /// Falls back to '?' for characters the font lacks.
    const Glyph& glyph(char c) const;

private:
    int cell_height_ = 0;
    std::string family_;
    std::map<int, Glyph> glyphs_;
};

enum class Anchor { Center, TopCenter, BottomCenter };

struct RenderConfig {
    std::filesystem::path font_file;
    std::array<int, 3> color{255, 0, 0};
    double rel_height = 0.10;
    Anchor anchor = Anchor::Center;
    int dx = 0;
    int dy = 0;

    /// Throws ConfigError on out-of-range values.
    void validate() const;
};

Anchor parse_anchor(std::string_view s);
std::string_view to_string(Anchor a);

/// Path of the font shipped in assets/fonts.
std::filesystem::path default_font_path();

struct GlyphBox {
    int x = 0, y = 0, width = 0, height = 0;
    bool contains(int px, int py) const { return px >= x && px < x + width && py >= y && py < y + height; }
};

struct RenderResult {
    RgbImage image;
    GlyphBox box;
};

/// Prints `word` in a solid color over `image`. Glyph height is
/// floor(rel_height * H), shrunk until the word fits the image width. Source
/// glyph coverage is computed exactly in integer arithmetic and thresholded
/// at one half, so no pixel is blended.
RenderResult render_word(const RgbImage& image, std::string_view word, const BitmapFont& font,
                         const RenderConfig& config);

/// Byte-level entry point: absent word returns the input bytes unchanged.
std::vector<std::uint8_t> render(const std::vector<std::uint8_t>& image_png, const std::optional<std::string>& word,
                                 const RenderConfig& config);

}  // namespace pwi
