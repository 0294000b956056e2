#pragma once

#include "dschecker/docindex.hpp"
#include "dschecker/gateway.hpp"
#include "dschecker/model.hpp"
#include "dschecker/prompt.hpp"
#include "dschecker/runtime.hpp"

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dschecker {

struct AgentConfig {
    /// Tool rounds before the model is told to answer without tools.
    int max_iterations = 8;
    std::chrono::milliseconds tool_timeout = kDefaultTimeout;
    /// When false, at most `max_iterations` calls are dispatched in total;
    /// later calls get an error text.
    bool allow_unlimited_calls = true;
    GenerationParams params;
};

struct CallLogEntry {
    std::string tool;
    Json arguments;
    std::string result_digest;     // first 16 hex digits of SHA-256 of the result text
    std::optional<bool> relevant;  // unset for malformed calls
    bool failed = false;           // the result was an error text

    bool operator==(const CallLogEntry&) const = default;
};

using CallLog = std::vector<CallLogEntry>;

/// Counts by tool and relevance, then one line per call.
std::string summarize_call_log(const CallLog& log);
Json call_log_json(const CallLog& log);

/// Everything a tool needs to answer for one record.
struct ToolContext {
    const SnippetRecord& record;
    std::filesystem::path root;  // dataset directory, for the record's data files
    const DocIndex* index = nullptr;
    Executor* executor = nullptr;
    std::chrono::milliseconds timeout = kDefaultTimeout;
};

struct ToolResult {
    std::string text;
    bool failed = false;
};

/// Runs one tool call. Bad arguments, unknown variables or APIs and probe
/// failures come back as "error: ..." text; timeouts and infrastructure
/// failures (missing interpreter, transcript miss, workspace I/O) throw.
ToolResult dispatch_tool(const ToolCall& call, const ToolContext& context);

/// Relevant iff the documented API names the record's target API or the
/// probed variable is one of its probe targets.
std::optional<bool> call_relevance(const ToolCall& call, const SnippetRecord& record);

struct AgentRun {
    Verdict verdict;
    CallLog log;
    std::vector<ChatMessage> conversation;
    int model_turns = 0;
    int tool_rounds = 0;
};

/// AGENT_EXHAUSTED or MALFORMED_VERDICT raised by the loop, with what the
/// run had gathered so far.
class AgentFailure : public Error {
public:
    AgentFailure(ErrorCode code, const std::string& detail, AgentRun partial);
    const AgentRun& partial() const noexcept { return partial_; }

private:
    AgentRun partial_;
};

/// Starts from the BASE prompt and the two tools; loops until a verdict.
AgentRun run_agent(const ToolContext& context, Gateway& gateway, const AgentConfig& config,
                   const PromptTemplate& tmpl = PromptTemplate::builtin());

}  // namespace dschecker
