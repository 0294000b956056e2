#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dschecker {

/// Every failure the library reports carries exactly one of these codes.
enum class ErrorCode {
    // dataset / documentation index / configuration input
    ManifestSyntax,
    MissingFile,
    DuplicateId,
    InvariantViolation,
    UnknownLibrary,
    IndexSyntax,
    MissingDocFile,
    DuplicateEntry,
    ConfigSyntax,
    // prompt rendering
    EmptySnippet,
    TemplateSyntax,
    FewshotWithoutExemplars,
    // patches and verdicts
    DiffSyntax,
    HunkMismatch,
    PatchApplyFailed,
    MalformedVerdict,
    // execution
    InterpreterNotFound,
    WorkspaceIo,
    ShimInstrumentationFailed,
    ShimProtocol,
    Timeout,
    TranscriptMiss,
    // model gateway / agent
    ProviderHttp,
    RateLimited,
    ReplayMismatch,
    MalformedToolCall,
    AgentExhausted,
    // evaluation / statistics
    EmptyDataset,
    MissingAdjudication,
    DegenerateSample,
    SampleSize,
    GroupTooSmall,
};

/// Upper-snake identifier, e.g. "HUNK_MISMATCH".
std::string_view to_string(ErrorCode code);

/// Process exit status for a failure carrying `code`:
/// 20 input files (dataset, index, configuration), 21 prompt rendering,
/// 22 few-shot without exemplars, 23 patch application, 24 timeout,
/// 25 malformed verdict, 26 agent exhausted, 27 model provider,
/// 28 execution runtime, 29 evaluation statistics.
int exit_code(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }
    /// The message without the leading code.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace dschecker
