#include "pwi/stimulus.hpp"

#include <algorithm>
#include <mutex>
#include <sstream>

#include "pwi/error.hpp"
#include "pwi/io.hpp"
#include "pwi/text.hpp"

#ifndef PWI_FONT_DIR
#define PWI_FONT_DIR "assets/fonts"
#endif

namespace pwi {

BitmapFont BitmapFont::parse(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    auto fail = [](const std::string& why) { throw DataError(Errc::ParseError, "font: " + why); };

    if (!std::getline(in, line) || line != "PWIFONT 1") fail("missing 'PWIFONT 1' header");
    BitmapFont font;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "family") {
            std::getline(ls >> std::ws, font.family_);
        } else if (key == "cell_height") {
            ls >> font.cell_height_;
        } else if (key == "baseline") {
            // informational
        } else if (key == "glyph") {
            if (font.cell_height_ <= 0) fail("glyph before cell_height");
            int code = 0;
            Glyph g;
            if (!(ls >> code >> g.advance) || g.advance < 0) fail("bad glyph line '" + line + "'");
            g.mask.assign(static_cast<std::size_t>(font.cell_height_) * g.advance, 0);
            for (int y = 0; y < font.cell_height_; ++y) {
                if (!std::getline(in, line)) fail("truncated glyph " + std::to_string(code));
                if (g.advance == 0) continue;
                if (static_cast<int>(line.size()) != g.advance)
                    fail("glyph " + std::to_string(code) + " row " + std::to_string(y) + " has wrong width");
                for (int x = 0; x < g.advance; ++x)
                    g.mask[static_cast<std::size_t>(y) * g.advance + x] = line[x] == '#' ? 1 : 0;
            }
            font.glyphs_[code] = std::move(g);
        } else {
            fail("unknown key '" + key + "'");
        }
    }
    if (font.cell_height_ <= 0 || !font.glyphs_.count('?')) fail("incomplete font");
    return font;
}

std::shared_ptr<const BitmapFont> BitmapFont::load(const std::filesystem::path& path) {
    // Fonts are immutable once parsed; share one instance per path.
    static std::mutex mu;
    static std::map<std::filesystem::path, std::shared_ptr<const BitmapFont>> cache;
    std::lock_guard lock(mu);
    auto key = std::filesystem::weakly_canonical(path);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    if (!std::filesystem::exists(path)) throw DataError(Errc::MissingFile, "font file missing: " + path.string());
    auto font = std::make_shared<const BitmapFont>(parse(read_file(path)));
    cache.emplace(key, font);
    return font;
}

const BitmapFont::Glyph& BitmapFont::glyph(char c) const {
    auto it = glyphs_.find(static_cast<unsigned char>(c));
    return it != glyphs_.end() ? it->second : glyphs_.at('?');
}

void RenderConfig::validate() const {
    if (!(rel_height > 0.0 && rel_height <= 1.0))
        throw ConfigError(Errc::InvalidConfig, "render.rel_height must be in (0, 1]");
    for (int c : color)
        if (c < 0 || c > 255) throw ConfigError(Errc::InvalidConfig, "render.color components must be in [0, 255]");
}

Anchor parse_anchor(std::string_view s) {
    auto n = normalize_label(s);
    if (n == "center") return Anchor::Center;
    if (n == "top_center" || n == "topcenter") return Anchor::TopCenter;
    if (n == "bottom_center" || n == "bottomcenter") return Anchor::BottomCenter;
    throw ConfigError(Errc::InvalidConfig, "unknown anchor '" + std::string(s) + "'");
}

std::string_view to_string(Anchor a) {
    switch (a) {
        case Anchor::Center: return "center";
        case Anchor::TopCenter: return "top_center";
        case Anchor::BottomCenter: return "bottom_center";
    }
    return "?";
}

std::filesystem::path default_font_path() { return std::filesystem::path(PWI_FONT_DIR) / "pwi-sans-bold.pwf"; }

namespace {

// Concatenated source bitmap of the whole word at the font's native size.
struct WordStrip {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> mask;
};

WordStrip compose(std::string_view word, const BitmapFont& font) {
    WordStrip strip;
    strip.height = font.cell_height();
    for (char c : word) strip.width += font.glyph(c).advance;
    strip.mask.assign(static_cast<std::size_t>(strip.width) * strip.height, 0);
    int x0 = 0;
    for (char c : word) {
        const auto& g = font.glyph(c);
        for (int y = 0; y < strip.height; ++y)
            for (int x = 0; x < g.advance; ++x)
                strip.mask[static_cast<std::size_t>(y) * strip.width + x0 + x] =
                    g.mask[static_cast<std::size_t>(y) * g.advance + x];
        x0 += g.advance;
    }
    return strip;
}

std::int64_t overlap(std::int64_t a0, std::int64_t a1, std::int64_t b0, std::int64_t b1) {
    return std::max<std::int64_t>(0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace

RenderResult render_word(const RgbImage& image, std::string_view word, const BitmapFont& font,
                         const RenderConfig& config) {
    config.validate();
    if (image.width < 32 || image.height < 32)
        throw DataError(Errc::UndecodableImage, "image must be at least 32x32");
    const auto text = trim(word);
    if (normalize_label(text).empty()) throw DataError(Errc::EmptyWord, "cannot render an empty word");

    const WordStrip strip = compose(text, font);
    const std::int64_t src_h = strip.height;
    const std::int64_t src_w = strip.width;

    // Target height h maps the cell height C onto h rows; width is
    // ceil(src_w * h / C). Shrink h until the word fits the image width.
    std::int64_t h = std::max<std::int64_t>(1, static_cast<std::int64_t>(config.rel_height * image.height));
    auto width_for = [&](std::int64_t hh) { return (src_w * hh + src_h - 1) / src_h; };
    if (width_for(h) > image.width) h = (static_cast<std::int64_t>(image.width) * src_h) / src_w;
    if (h < 1) throw DataError(Errc::WordTooLong, "word '" + text + "' cannot fit the image width");
    const std::int64_t w = width_for(h);

    GlyphBox box;
    box.width = static_cast<int>(w);
    box.height = static_cast<int>(h);
    box.x = (image.width - box.width) / 2 + config.dx;
    switch (config.anchor) {
        case Anchor::Center: box.y = (image.height - box.height) / 2; break;
        case Anchor::TopCenter: box.y = 0; break;
        case Anchor::BottomCenter: box.y = image.height - box.height; break;
    }
    box.y += config.dy;
    if (box.x < 0 || box.y < 0 || box.x + box.width > image.width || box.y + box.height > image.height)
        throw ConfigError(Errc::InvalidConfig, "render offset places the word outside the image");

    // Scaled integer geometry: source pixel s spans [s*h, (s+1)*h), target
    // pixel t spans [t*C, (t+1)*C). Ink area is compared against half of C^2.
    const std::int64_t C = src_h;
    const std::array<std::uint8_t, 3> ink{static_cast<std::uint8_t>(config.color[0]),
                                          static_cast<std::uint8_t>(config.color[1]),
                                          static_cast<std::uint8_t>(config.color[2])};
    RenderResult result{image, box};
    for (std::int64_t ty = 0; ty < h; ++ty) {
        const std::int64_t y0 = ty * C, y1 = (ty + 1) * C;
        const std::int64_t sy_lo = y0 / h, sy_hi = std::min(src_h - 1, (y1 - 1) / h);
        for (std::int64_t tx = 0; tx < w; ++tx) {
            const std::int64_t x0 = tx * C, x1 = (tx + 1) * C;
            const std::int64_t sx_lo = x0 / h, sx_hi = std::min(src_w - 1, (x1 - 1) / h);
            std::int64_t area = 0;
            for (std::int64_t sy = sy_lo; sy <= sy_hi; ++sy) {
                const std::int64_t oy = overlap(y0, y1, sy * h, (sy + 1) * h);
                for (std::int64_t sx = sx_lo; sx <= sx_hi; ++sx)
                    if (strip.mask[static_cast<std::size_t>(sy * src_w + sx)])
                        area += oy * overlap(x0, x1, sx * h, (sx + 1) * h);
            }
            if (2 * area >= C * C) result.image.set(box.x + static_cast<int>(tx), box.y + static_cast<int>(ty), ink);
        }
    }
    return result;
}

std::vector<std::uint8_t> render(const std::vector<std::uint8_t>& image_png, const std::optional<std::string>& word,
                                 const RenderConfig& config) {
    if (!word) return image_png;
    auto font = BitmapFont::load(config.font_file.empty() ? default_font_path() : config.font_file);
    const auto image = decode_png(image_png);
    return encode_png(render_word(image, *word, *font, config).image);
}

}  // namespace pwi
