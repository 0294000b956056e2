#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dschecker {

struct HunkLine {
    /// ' ' context, '-' removal, '+' addition, '\\' "No newline at end of file" marker.
    char op = ' ';
    std::string text;

    bool operator==(const HunkLine&) const = default;
};

struct Hunk {
    int old_start = 0;
    int old_count = 0;
    int new_start = 0;
    int new_count = 0;
    bool old_count_explicit = true;
    bool new_count_explicit = true;
    std::string section;  // text after the closing "@@", kept verbatim
    std::vector<HunkLine> lines;

    bool operator==(const Hunk&) const = default;
};

/// A single-file unified diff. File headers are optional.
struct UnifiedDiff {
    std::optional<std::string> old_header;  // text after "--- "
    std::optional<std::string> new_header;  // text after "+++ "
    std::vector<Hunk> hunks;

    bool operator==(const UnifiedDiff&) const = default;
};

/// Throws DiffSyntax on a malformed hunk header or body, or when there are no hunks.
UnifiedDiff parse_diff(std::string_view text);
std::string format_diff(const UnifiedDiff& diff);

inline constexpr int kDefaultPatchFuzz = 3;

/// Applies every hunk in order. Each hunk's context and removed lines must
/// match exactly at the stated line, or within +/-`fuzz` lines of it. Line
/// endings are normalized to '\n' for matching and restored on output.
/// All-or-nothing: throws HunkMismatch (naming the 1-based hunk) or DiffSyntax.
std::string apply_patch(std::string_view original, std::string_view diff, int fuzz = kDefaultPatchFuzz);
std::string apply_patch(std::string_view original, const UnifiedDiff& diff, int fuzz = kDefaultPatchFuzz);

/// Swaps additions/removals, hunk ranges and file headers.
UnifiedDiff reverse(const UnifiedDiff& diff);
std::string reverse_patch(std::string_view diff);

}  // namespace dschecker
