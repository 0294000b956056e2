#pragma once

#include "dschecker/model.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dschecker {

enum class PromptVariant { Base, Data, Dir, Full, Fewshot };

std::string_view to_string(PromptVariant variant);
/// Accepts "base", "data", "dir", "full", "fewshot" (any case).
PromptVariant prompt_variant_from_string(std::string_view text);

/// A sectioned text template with `$placeholder` substitution.
///
/// The file format is plain text: a `#@ dschecker-prompt-template v<N>` header,
/// then `#@ section <name>` markers each followed by the section body. Other
/// `#@` lines are comments. `$$` is a literal dollar sign.
class PromptTemplate {
public:
    static PromptTemplate parse(std::string_view text);
    static PromptTemplate load(const std::filesystem::path& path);
    /// The template shipped in assets/prompt_template.txt, compiled in.
    static const PromptTemplate& builtin();

    int version() const noexcept { return version_; }
    const std::string& section(std::string_view name) const;

private:
    int version_ = 0;
    std::map<std::string, std::string, std::less<>> sections_;
};

/// Replaces `$name` tokens from `values`. Substituted text is not rescanned.
/// An unknown placeholder is a TemplateSyntax error, so rendered output never
/// carries a residual placeholder.
std::string substitute(std::string_view text, const std::map<std::string, std::string, std::less<>>& values,
                       std::map<std::string, std::string>* applied = nullptr, std::string_view key_suffix = {});

struct FewShotExemplar {
    std::string code;
    std::string library;
    std::string data_section;
    std::string directive_section;
    /// Expected response in the JSON verdict contract form.
    Json expected_answer;
};

/// Reads the exemplar store (one JSON object per line). The store must hold
/// exactly two exemplars, one answered "yes" and one answered "no".
std::vector<FewShotExemplar> load_exemplars(const std::filesystem::path& path);
std::vector<FewShotExemplar> parse_exemplars(std::string_view text);

struct PromptBundle {
    std::string system_text;
    std::string user_text;
    PromptVariant variant = PromptVariant::Base;
    /// Placeholder -> value actually applied. Repeated items are keyed
    /// `$name#<n>` with n counting from 1.
    std::map<std::string, std::string> substitutions;
};

/// The kind-specific body of a data block ("Type: ...", shape, columns, ...).
std::string render_data_body(const DataInfo& info);

/// One complete data block: variable, line and body, via the template's data_item section.
std::string render_data_section(const DataInfo& info, const PromptTemplate& tmpl = PromptTemplate::builtin());

/// Renders one prompt variant for `record`. DATA/FULL/FEWSHOT omit the data
/// block when `data_infos` is empty; DIR/FULL/FEWSHOT omit the directive block
/// when the record has no directives.
PromptBundle render(PromptVariant variant, const SnippetRecord& record, std::span<const DataInfo> data_infos,
                    std::span<const FewShotExemplar> exemplars,
                    const PromptTemplate& tmpl = PromptTemplate::builtin());

/// The agent's opening prompt: BASE user text with the function-calling system message.
PromptBundle render_agent_prompt(const SnippetRecord& record, const PromptTemplate& tmpl = PromptTemplate::builtin());

}  // namespace dschecker
