#include "dschecker/patch.hpp"

#include "dschecker/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <regex>

namespace dschecker {

namespace {

struct SplitText {
    std::vector<std::string> lines;
    bool final_newline = false;
};

SplitText split_lines(std::string_view text)
{
    SplitText out;
    std::size_t start = 0;
    while (start < text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            out.lines.emplace_back(text.substr(start));
            return out;
        }
        out.lines.emplace_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    out.final_newline = !text.empty();
    return out;
}

std::string normalize_newlines(std::string_view text)
{
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\r' && i + 1 < text.size() && text[i + 1] == '\n')
            continue;
        out += text[i];
    }
    return out;
}

int parse_number(const std::ssub_match& m)
{
    return m.matched ? std::stoi(m.str()) : 1;
}

/// Marker lines attach to the side(s) of the line they follow.
bool side_lacks_newline(const Hunk& hunk, char side)
{
    for (std::size_t i = 1; i < hunk.lines.size(); ++i) {
        if (hunk.lines[i].op != '\\')
            continue;
        char prev = hunk.lines[i - 1].op;
        if (prev == ' ' || prev == side)
            return true;
    }
    return false;
}

}  // namespace

UnifiedDiff parse_diff(std::string_view text)
{
    static const std::regex header_re(R"(^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@(.*)$)");

    auto split = split_lines(normalize_newlines(text));
    auto& lines = split.lines;

    UnifiedDiff diff;
    Hunk* hunk = nullptr;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto& line = lines[i];
        bool file_header = line.rfind("--- ", 0) == 0 && i + 1 < lines.size() && lines[i + 1].rfind("+++ ", 0) == 0;
        if (file_header) {
            if (!diff.hunks.empty())
                fail(ErrorCode::DiffSyntax, "multi-file patches are not supported");
            diff.old_header = line.substr(4);
            diff.new_header = lines[i + 1].substr(4);
            ++i;
            continue;
        }
        if (line.rfind("@@", 0) == 0) {
            std::smatch m;
            if (!std::regex_match(line, m, header_re))
                fail(ErrorCode::DiffSyntax, fmt::format("malformed hunk header '{}'", line));
            Hunk h;
            h.old_start = std::stoi(m[1].str());
            h.old_count = parse_number(m[2]);
            h.old_count_explicit = m[2].matched;
            h.new_start = std::stoi(m[3].str());
            h.new_count = parse_number(m[4]);
            h.new_count_explicit = m[4].matched;
            h.section = m[5].str();
            diff.hunks.push_back(std::move(h));
            hunk = &diff.hunks.back();
            continue;
        }
        if (!hunk) {
            // git preamble ("diff --git", "index ...") or prose before the first hunk.
            continue;
        }
        if (line.empty()) {
            hunk->lines.push_back({' ', ""});
            continue;
        }
        char op = line.front();
        if (op != ' ' && op != '-' && op != '+' && op != '\\')
            fail(ErrorCode::DiffSyntax,
                 fmt::format("hunk {}: unexpected line '{}'", diff.hunks.size(), line));
        if (op == '\\' && hunk->lines.empty())
            fail(ErrorCode::DiffSyntax, fmt::format("hunk {}: marker line before any content", diff.hunks.size()));
        hunk->lines.push_back({op, line.substr(1)});
    }

    if (diff.hunks.empty())
        fail(ErrorCode::DiffSyntax, "diff contains no hunks");
    // Trailing blank lines are context only as far as the last hunk's counts call for them.
    auto& last = diff.hunks.back();
    auto side_count = [&](char side) {
        return std::count_if(last.lines.begin(), last.lines.end(),
                             [&](const HunkLine& l) { return l.op == ' ' || l.op == side; });
    };
    while (!last.lines.empty() && last.lines.back().op == ' ' &&
           last.lines.back().text.find_first_not_of(" \t") == std::string::npos &&
           side_count('-') > last.old_count && side_count('+') > last.new_count)
        last.lines.pop_back();
    for (std::size_t i = 0; i < diff.hunks.size(); ++i)
        if (diff.hunks[i].lines.empty())
            fail(ErrorCode::DiffSyntax, fmt::format("hunk {} has no body", i + 1));
    return diff;
}

std::string format_diff(const UnifiedDiff& diff)
{
    std::string out;
    if (diff.old_header && diff.new_header)
        out += fmt::format("--- {}\n+++ {}\n", *diff.old_header, *diff.new_header);
    for (const auto& h : diff.hunks) {
        auto range = [](int start, int count, bool explicit_count) {
            return explicit_count ? fmt::format("{},{}", start, count) : std::to_string(start);
        };
        out += fmt::format("@@ -{} +{} @@{}\n", range(h.old_start, h.old_count, h.old_count_explicit),
                           range(h.new_start, h.new_count, h.new_count_explicit), h.section);
        for (const auto& l : h.lines) {
            out += l.op;
            out += l.text;
            out += '\n';
        }
    }
    return out;
}

std::string apply_patch(std::string_view original, std::string_view diff, int fuzz)
{
    return apply_patch(original, parse_diff(diff), fuzz);
}

std::string apply_patch(std::string_view original, const UnifiedDiff& diff, int fuzz)
{
    if (diff.hunks.empty())
        fail(ErrorCode::DiffSyntax, "diff contains no hunks");
    const bool crlf = original.find("\r\n") != std::string_view::npos;
    auto src = split_lines(normalize_newlines(original));
    bool final_newline = src.final_newline || src.lines.empty();

    std::vector<std::string> out;
    std::size_t pos = 0;   // next unconsumed source line
    long drift = 0;        // offset found for earlier hunks carries forward
    for (std::size_t k = 0; k < diff.hunks.size(); ++k) {
        const auto& h = diff.hunks[k];
        std::vector<std::string> old_lines, new_lines;
        for (const auto& l : h.lines) {
            if (l.op == ' ' || l.op == '-')
                old_lines.push_back(l.text);
            if (l.op == ' ' || l.op == '+')
                new_lines.push_back(l.text);
        }
        // A pure insertion's start names the line it follows.
        long expected = (old_lines.empty() ? h.old_start : h.old_start - 1) + drift;

        std::optional<long> found;
        for (int step = 0; step <= 2 * fuzz && !found; ++step) {
            long delta = (step + 1) / 2 * (step % 2 ? -1 : 1);
            long at = expected + delta;
            if (at < static_cast<long>(pos) || at + static_cast<long>(old_lines.size()) >
                                                   static_cast<long>(src.lines.size()))
                continue;
            if (std::equal(old_lines.begin(), old_lines.end(), src.lines.begin() + at))
                found = at;
        }
        if (!found)
            fail(ErrorCode::HunkMismatch,
                 fmt::format("hunk {} (@@ -{},{}) does not match within {} lines of its stated position", k + 1,
                             h.old_start, h.old_count, fuzz));

        drift += *found - expected;
        out.insert(out.end(), src.lines.begin() + static_cast<long>(pos), src.lines.begin() + *found);
        out.insert(out.end(), new_lines.begin(), new_lines.end());
        pos = static_cast<std::size_t>(*found) + old_lines.size();

        if (side_lacks_newline(h, '+'))
            final_newline = false;
        else if (side_lacks_newline(h, '-'))
            final_newline = true;
    }
    out.insert(out.end(), src.lines.begin() + static_cast<long>(pos), src.lines.end());

    const std::string_view eol = crlf ? "\r\n" : "\n";
    std::string text;
    for (std::size_t i = 0; i < out.size(); ++i) {
        text += out[i];
        if (i + 1 < out.size() || final_newline)
            text += eol;
    }
    return text;
}

UnifiedDiff reverse(const UnifiedDiff& diff)
{
    UnifiedDiff rev;
    rev.old_header = diff.new_header;
    rev.new_header = diff.old_header;
    for (const auto& h : diff.hunks) {
        Hunk r = h;
        std::swap(r.old_start, r.new_start);
        std::swap(r.old_count, r.new_count);
        std::swap(r.old_count_explicit, r.new_count_explicit);
        for (auto& l : r.lines) {
            if (l.op == '-')
                l.op = '+';
            else if (l.op == '+')
                l.op = '-';
        }
        rev.hunks.push_back(std::move(r));
    }
    return rev;
}

std::string reverse_patch(std::string_view diff)
{
    return format_diff(reverse(parse_diff(diff)));
}

}  // namespace dschecker
