#include "dschecker/verdict.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <optional>
#include <vector>

namespace dschecker {

namespace {

/// Spans of balanced {...} groups at top level, in order of appearance.
std::vector<std::string_view> balanced_objects(std::string_view text)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < text.size()) {
        auto start = text.find('{', i);
        if (start == std::string_view::npos)
            break;
        int depth = 0;
        bool in_string = false, escaped = false;
        std::size_t j = start;
        for (; j < text.size(); ++j) {
            char c = text[j];
            if (in_string) {
                if (escaped)
                    escaped = false;
                else if (c == '\\')
                    escaped = true;
                else if (c == '"')
                    in_string = false;
                continue;
            }
            if (c == '"')
                in_string = true;
            else if (c == '{')
                ++depth;
            else if (c == '}' && --depth == 0)
                break;
        }
        if (j >= text.size())
            break;
        out.push_back(text.substr(start, j - start + 1));
        i = j + 1;
    }
    return out;
}

/// Models sometimes put raw newlines/tabs inside JSON strings; escape them.
std::string escape_raw_controls(std::string_view text)
{
    std::string out;
    bool in_string = false, escaped = false;
    for (char c : text) {
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            } else if (c == '\n') {
                out += "\\n";
                continue;
            } else if (c == '\r') {
                out += "\\r";
                continue;
            } else if (c == '\t') {
                out += "\\t";
                continue;
            }
        } else if (c == '"') {
            in_string = true;
        }
        out += c;
    }
    return out;
}

std::optional<Json> parse_object(std::string_view candidate)
{
    for (const auto& text : {std::string(candidate), escape_raw_controls(candidate)}) {
        try {
            auto j = Json::parse(text);
            if (j.is_object())
                return j;
        } catch (const Json::exception&) {
        }
    }
    return std::nullopt;
}

std::string trim(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

/// Drops a ```diff ... ``` wrapper around a patch string.
std::string unfence(std::string_view patch)
{
    auto t = trim(patch);
    if (t.rfind("```", 0) != 0)
        return std::string(patch);
    auto first_nl = t.find('\n');
    auto last_fence = t.rfind("```");
    if (first_nl == std::string::npos || last_fence <= first_nl)
        return std::string(patch);
    return t.substr(first_nl + 1, last_fence - first_nl - 1);
}

std::optional<std::string> string_field(const Json& j, const char* key)
{
    auto it = j.find(key);
    if (it == j.end() || !it->is_string())
        return std::nullopt;
    return it->get<std::string>();
}

}  // namespace

std::string_view to_string(VerdictFailure reason)
{
    switch (reason) {
    case VerdictFailure::NoJsonObject: return "NO_JSON_OBJECT";
    case VerdictFailure::InvalidJson: return "INVALID_JSON";
    case VerdictFailure::MissingCorrect: return "MISSING_CORRECT";
    case VerdictFailure::InvalidCorrect: return "INVALID_CORRECT";
    case VerdictFailure::MissingPatch: return "MISSING_PATCH";
    case VerdictFailure::MissingExplanation: return "MISSING_EXPLANATION";
    }
    return "INVALID_JSON";
}

MalformedVerdict::MalformedVerdict(VerdictFailure reason, const std::string& detail)
    : Error(ErrorCode::MalformedVerdict, fmt::format("{} ({})", detail, to_string(reason))), reason_(reason)
{
}

Verdict parse_verdict(std::string_view raw)
{
    auto candidates = balanced_objects(raw);
    if (candidates.empty())
        throw MalformedVerdict(VerdictFailure::NoJsonObject, "no JSON object in model output");

    std::optional<Json> object;
    for (auto candidate : candidates)
        if ((object = parse_object(candidate)))
            break;
    if (!object)
        throw MalformedVerdict(VerdictFailure::InvalidJson, "model output contains no parseable JSON object");

    auto correct = object->find("correct");
    if (correct == object->end())
        throw MalformedVerdict(VerdictFailure::MissingCorrect, "verdict lacks the \"correct\" key");
    if (!correct->is_string())
        throw MalformedVerdict(VerdictFailure::InvalidCorrect, "\"correct\" must be the string yes or no");
    auto value = trim(correct->get<std::string>());
    std::transform(value.begin(), value.end(), value.begin(), [](unsigned char c) { return std::tolower(c); });

    Verdict verdict;
    verdict.raw = std::string(raw);
    if (value == "yes") {
        verdict.correct = Answer::Yes;
        if (auto explanation = string_field(*object, "explanation"); explanation && !trim(*explanation).empty())
            verdict.explanation = explanation;
        return verdict;
    }
    if (value != "no")
        throw MalformedVerdict(VerdictFailure::InvalidCorrect,
                               fmt::format("\"correct\" is '{}', expected yes or no", value));

    verdict.correct = Answer::No;
    auto patch = string_field(*object, "patch");
    if (!patch || trim(*patch).empty())
        throw MalformedVerdict(VerdictFailure::MissingPatch, "a \"no\" verdict needs a non-empty patch");
    auto explanation = string_field(*object, "explanation");
    if (!explanation || trim(*explanation).empty())
        throw MalformedVerdict(VerdictFailure::MissingExplanation, "a \"no\" verdict needs an explanation");
    verdict.patch = unfence(*patch);
    verdict.explanation = *explanation;
    return verdict;
}

}  // namespace dschecker
