#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pwi/provider.hpp"

namespace pwi {

enum class PromptFocus { Default, ImageContent, SuperimposedWord, Variable };

std::string_view to_string(PromptFocus f);
PromptFocus parse_prompt_focus(std::string_view s);

/// Classification prompt with an answer placeholder {X} and, for Variable
/// templates only, a superimposed-word placeholder {Y}.
struct PromptTemplate {
    std::string id;
    std::string pattern;
    PromptFocus focus = PromptFocus::Default;

    /// Throws ConfigError(InvalidTemplate) when the placeholder rules are broken.
    void validate() const;
    bool is_variable() const { return focus == PromptFocus::Variable; }
};

/// The default "a photo of a {X}" template followed by the seven prompt-sweep
/// templates (three image-focused, three word-focused, one variable).
const std::vector<PromptTemplate>& builtin_templates();
const PromptTemplate& builtin_template(std::string_view id);

std::vector<PromptTemplate> parse_templates(std::string_view json_text);
std::vector<PromptTemplate> load_templates(const std::filesystem::path& path);

/// Single-pass substitution: text inserted for {X} or {Y} is never re-scanned.
std::string instantiate_prompt(const PromptTemplate& tmpl, std::string_view x,
                               const std::optional<std::string>& y = std::nullopt);

inline constexpr double kDefaultLogitScale = 100.0;

struct ClassificationResult {
    std::vector<std::string> labels;
    std::vector<double> cosines;
    std::vector<double> probabilities;
    std::string predicted;
    std::size_t predicted_index = 0;
};

/// softmax(logit_scale * cosine) over the labels; argmax ties go to the lowest index.
ClassificationResult classify(const EmbeddingVector& image_emb, std::span<const EmbeddingVector> label_embs,
                              std::span<const std::string> labels, double logit_scale = kDefaultLogitScale);

/// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> logits);

}  // namespace pwi
