#include "dschecker/error.hpp"

#include <fmt/format.h>

namespace dschecker {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::ManifestSyntax: return "MANIFEST_SYNTAX";
    case ErrorCode::MissingFile: return "MISSING_FILE";
    case ErrorCode::DuplicateId: return "DUPLICATE_ID";
    case ErrorCode::InvariantViolation: return "INVARIANT_VIOLATION";
    case ErrorCode::UnknownLibrary: return "UNKNOWN_LIBRARY";
    case ErrorCode::IndexSyntax: return "INDEX_SYNTAX";
    case ErrorCode::MissingDocFile: return "MISSING_DOC_FILE";
    case ErrorCode::DuplicateEntry: return "DUPLICATE_ENTRY";
    case ErrorCode::ConfigSyntax: return "CONFIG_SYNTAX";
    case ErrorCode::EmptySnippet: return "EMPTY_SNIPPET";
    case ErrorCode::TemplateSyntax: return "TEMPLATE_SYNTAX";
    case ErrorCode::FewshotWithoutExemplars: return "FEWSHOT_WITHOUT_EXEMPLARS";
    case ErrorCode::DiffSyntax: return "DIFF_SYNTAX";
    case ErrorCode::HunkMismatch: return "HUNK_MISMATCH";
    case ErrorCode::PatchApplyFailed: return "PATCH_APPLY_FAILED";
    case ErrorCode::MalformedVerdict: return "MALFORMED_VERDICT";
    case ErrorCode::InterpreterNotFound: return "INTERPRETER_NOT_FOUND";
    case ErrorCode::WorkspaceIo: return "WORKSPACE_IO";
    case ErrorCode::ShimInstrumentationFailed: return "SHIM_INSTRUMENTATION_FAILED";
    case ErrorCode::ShimProtocol: return "SHIM_PROTOCOL";
    case ErrorCode::Timeout: return "TIMEOUT";
    case ErrorCode::TranscriptMiss: return "TRANSCRIPT_MISS";
    case ErrorCode::ProviderHttp: return "PROVIDER_HTTP";
    case ErrorCode::RateLimited: return "RATE_LIMITED";
    case ErrorCode::ReplayMismatch: return "REPLAY_MISMATCH";
    case ErrorCode::MalformedToolCall: return "MALFORMED_TOOL_CALL";
    case ErrorCode::AgentExhausted: return "AGENT_EXHAUSTED";
    case ErrorCode::EmptyDataset: return "EMPTY_DATASET";
    case ErrorCode::MissingAdjudication: return "MISSING_ADJUDICATION";
    case ErrorCode::DegenerateSample: return "DEGENERATE_SAMPLE";
    case ErrorCode::SampleSize: return "SAMPLE_SIZE";
    case ErrorCode::GroupTooSmall: return "GROUP_TOO_SMALL";
    }
    return "UNKNOWN";
}

int exit_code(ErrorCode code)
{
    switch (code) {
    case ErrorCode::ManifestSyntax:
    case ErrorCode::MissingFile:
    case ErrorCode::DuplicateId:
    case ErrorCode::InvariantViolation:
    case ErrorCode::UnknownLibrary:
    case ErrorCode::IndexSyntax:
    case ErrorCode::MissingDocFile:
    case ErrorCode::DuplicateEntry:
    case ErrorCode::ConfigSyntax:
    case ErrorCode::WorkspaceIo:
        return 20;
    case ErrorCode::EmptySnippet:
    case ErrorCode::TemplateSyntax:
        return 21;
    case ErrorCode::FewshotWithoutExemplars:
        return 22;
    case ErrorCode::DiffSyntax:
    case ErrorCode::HunkMismatch:
    case ErrorCode::PatchApplyFailed:
        return 23;
    case ErrorCode::Timeout:
        return 24;
    case ErrorCode::MalformedVerdict:
        return 25;
    case ErrorCode::AgentExhausted:
        return 26;
    case ErrorCode::ProviderHttp:
    case ErrorCode::RateLimited:
    case ErrorCode::ReplayMismatch:
    case ErrorCode::MalformedToolCall:
        return 27;
    case ErrorCode::InterpreterNotFound:
    case ErrorCode::ShimInstrumentationFailed:
    case ErrorCode::ShimProtocol:
    case ErrorCode::TranscriptMiss:
        return 28;
    case ErrorCode::EmptyDataset:
    case ErrorCode::MissingAdjudication:
    case ErrorCode::DegenerateSample:
    case ErrorCode::SampleSize:
    case ErrorCode::GroupTooSmall:
        return 29;
    }
    return 20;
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(fmt::format("{}: {}", to_string(code), message)), code_(code), detail_(message)
{
}

void fail(ErrorCode code, const std::string& message)
{
    throw Error(code, message);
}

}  // namespace dschecker
