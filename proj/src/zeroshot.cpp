#include "pwi/zeroshot.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "pwi/error.hpp"
#include "pwi/io.hpp"
#include "pwi/text.hpp"

namespace pwi {

std::string_view to_string(PromptFocus f) {
    switch (f) {
        case PromptFocus::Default: return "default";
        case PromptFocus::ImageContent: return "image_content";
        case PromptFocus::SuperimposedWord: return "superimposed_word";
        case PromptFocus::Variable: return "variable";
    }
    return "?";
}

PromptFocus parse_prompt_focus(std::string_view s) {
    const auto n = normalize_label(s);
    if (n == "default") return PromptFocus::Default;
    if (n == "image_content") return PromptFocus::ImageContent;
    if (n == "superimposed_word") return PromptFocus::SuperimposedWord;
    if (n == "variable") return PromptFocus::Variable;
    throw ConfigError(Errc::InvalidTemplate, "unknown prompt focus '" + std::string(s) + "'");
}

namespace {

std::size_t count_of(std::string_view hay, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + needle.size())) ++n;
    return n;
}

}  // namespace

void PromptTemplate::validate() const {
    if (id.empty()) throw ConfigError(Errc::InvalidTemplate, "prompt template without id");
    if (count_of(pattern, "{X}") != 1)
        throw ConfigError(Errc::InvalidTemplate, "template '" + id + "' must contain {X} exactly once");
    const auto ys = count_of(pattern, "{Y}");
    if (ys > 1) throw ConfigError(Errc::InvalidTemplate, "template '" + id + "' contains {Y} more than once");
    if ((ys == 1) != (focus == PromptFocus::Variable))
        throw ConfigError(Errc::InvalidTemplate, "template '" + id + "': focus 'variable' iff {Y} is present");
}

const std::vector<PromptTemplate>& builtin_templates() {
    static const std::vector<PromptTemplate> kTemplates = {
        {"default", "a photo of a {X}", PromptFocus::Default},
        {"image-red-label", "a red word label over a picture of a {X}", PromptFocus::ImageContent},
        {"image-red-font", "a word is printed in a red font over a picture of a {X}", PromptFocus::ImageContent},
        {"image-photo-red-font", "a photo of a word written in a red font over a picture of a {X}",
         PromptFocus::ImageContent},
        {"word-text-says", "a text that says {X}", PromptFocus::SuperimposedWord},
        {"word-printed-red-font", "a word of a {X} is printed in a red font over a picture",
         PromptFocus::SuperimposedWord},
        {"word-photo-red-font", "a photo of the word {X} written in a red font over a picture",
         PromptFocus::SuperimposedWord},
        {"variable-word-and-picture", "a photo of the word {Y} written in a red font over a picture of a {X}",
         PromptFocus::Variable},
    };
    return kTemplates;
}

const PromptTemplate& builtin_template(std::string_view id) {
    for (const auto& t : builtin_templates())
        if (t.id == id) return t;
    throw ConfigError(Errc::UnknownTemplate, "no built-in prompt template '" + std::string(id) + "'");
}

std::vector<PromptTemplate> parse_templates(std::string_view json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(Errc::InvalidTemplate, std::string("prompt template file: ") + e.what());
    }
    if (!j.is_array()) throw ConfigError(Errc::InvalidTemplate, "prompt template file must be a JSON list");
    std::vector<PromptTemplate> out;
    std::set<std::string> ids;
    for (const auto& item : j) {
        if (!item.is_object() || !item.contains("id") || !item.contains("pattern"))
            throw ConfigError(Errc::InvalidTemplate, "each template needs id and pattern");
        PromptTemplate t{item["id"].get<std::string>(), item["pattern"].get<std::string>(),
                         parse_prompt_focus(item.value("focus", "default"))};
        t.validate();
        if (!ids.insert(t.id).second) throw ConfigError(Errc::InvalidTemplate, "duplicate template id '" + t.id + "'");
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<PromptTemplate> load_templates(const std::filesystem::path& path) {
    return parse_templates(read_file(path));
}

std::string instantiate_prompt(const PromptTemplate& tmpl, std::string_view x, const std::optional<std::string>& y) {
    tmpl.validate();
    if (tmpl.is_variable() && !y)
        throw ConfigError(Errc::MissingPlaceholderValue, "template '" + tmpl.id + "' needs a superimposed word");
    if (!tmpl.is_variable() && y)
        throw ConfigError(Errc::MissingPlaceholderValue, "template '" + tmpl.id + "' takes no superimposed word");
    std::string out;
    out.reserve(tmpl.pattern.size() + x.size() + (y ? y->size() : 0));
    const std::string_view p = tmpl.pattern;
    for (std::size_t i = 0; i < p.size();) {
        if (p.compare(i, 3, "{X}") == 0) {
            out += x;
            i += 3;
        } else if (p.compare(i, 3, "{Y}") == 0) {
            out += *y;
            i += 3;
        } else {
            out.push_back(p[i++]);
        }
    }
    return out;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.begin(), logits.end());
    if (out.empty()) return out;
    const double mx = *std::max_element(out.begin(), out.end());
    double sum = 0.0;
    for (auto& v : out) sum += (v = std::exp(v - mx));
    for (auto& v : out) v /= sum;
    return out;
}

ClassificationResult classify(const EmbeddingVector& image_emb, std::span<const EmbeddingVector> label_embs,
                              std::span<const std::string> labels, double logit_scale) {
    if (labels.empty()) throw DataError(Errc::NoRecords, "classify needs at least one label");
    if (labels.size() != label_embs.size())
        throw DataError(Errc::DimensionMismatch, "labels and label embeddings are not aligned");
    if (!(logit_scale > 0.0) || !std::isfinite(logit_scale))
        throw ConfigError(Errc::InvalidConfig, "logit_scale must be a positive finite number");
    const double ni = image_emb.norm();
    if (ni == 0.0) throw DataError(Errc::ZeroNorm, "image embedding has zero norm");

    ClassificationResult r;
    r.labels.assign(labels.begin(), labels.end());
    r.cosines.reserve(labels.size());
    std::vector<double> logits;
    logits.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (label_embs[i].dim() != image_emb.dim())
            throw DataError(Errc::DimensionMismatch, "label embedding '" + labels[i] + "' has dim " +
                                                         std::to_string(label_embs[i].dim()) + ", image has " +
                                                         std::to_string(image_emb.dim()));
        const double nl = label_embs[i].norm();
        if (nl == 0.0) throw DataError(Errc::ZeroNorm, "label embedding '" + labels[i] + "' has zero norm");
        const double c = dot(image_emb, label_embs[i]) / (ni * nl);
        r.cosines.push_back(c);
        logits.push_back(logit_scale * c);
    }
    r.probabilities = softmax(logits);
    // max_element returns the first maximum: lowest-index tie-break.
    r.predicted_index = static_cast<std::size_t>(
        std::max_element(r.probabilities.begin(), r.probabilities.end()) - r.probabilities.begin());
    r.predicted = r.labels[r.predicted_index];
    return r;
}

}  // namespace pwi
