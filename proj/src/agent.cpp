#include "dschecker/agent.hpp"

#include "dschecker/dataset.hpp"
#include "dschecker/hashing.hpp"
#include "dschecker/verdict.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <map>

namespace dschecker {

namespace {

ToolResult tool_error(std::string text)
{
    return {"error: " + std::move(text), true};
}

bool escalates(ErrorCode code)
{
    switch (code) {
    case ErrorCode::Timeout:
    case ErrorCode::InterpreterNotFound:
    case ErrorCode::TranscriptMiss:
    case ErrorCode::WorkspaceIo:
    case ErrorCode::MissingFile:
        return true;
    default:
        return false;
    }
}

ToolResult variable_info(const Json& args, const ToolContext& ctx)
{
    const auto name = args.at("variable_name").get<std::string>();
    const auto line = args.at("line_number").get<int>();
    const auto lines = static_cast<int>(line_count(ctx.record.source));
    if (!identifier_occurs(ctx.record.source, name))
        return tool_error(fmt::format("variable '{}' does not appear in the snippet", name));
    if (line < 1 || line > lines)
        return tool_error(fmt::format("line {} is outside the snippet (lines 1-{})", line, lines));
    if (!ctx.executor)
        return tool_error("runtime information is not available in this session");

    const ProbeTarget target{name, line};
    ExecRequest request;
    request.mode = ExecMode::Probe;
    request.snippet_text = ctx.record.source;
    for (const auto& f : ctx.record.data_files)
        request.data_files.push_back(ctx.root / f);
    request.probes = {target};
    request.timeout = ctx.timeout;

    ProbeRun run;
    try {
        run = interpret_probe_run(ctx.executor->execute(request), request.probes);
    } catch (const Error& e) {
        if (escalates(e.code()))
            throw;
        return tool_error(e.detail());
    }
    if (run.infos.empty())
        return tool_error(fmt::format("'{}' had no value after line {}: the program raised {} first", name, line,
                                      run.snippet_error.value_or("an error")));
    return {render_data_section(run.infos.front()), false};
}

ToolResult api_documentation(const Json& args, const ToolContext& ctx)
{
    const auto name = args.at("api_name").get<std::string>();
    if (!ctx.index)
        return tool_error("no documentation index is loaded");
    auto result = ctx.index->lookup(name);
    switch (result.status) {
    case LookupStatus::Found:
        return {result.entry->body, false};
    case LookupStatus::Ambiguous: {
        std::vector<std::string> names;
        for (const auto* c : result.candidates)
            names.push_back(fmt::format("{} ({})", c->api, c->library));
        return tool_error(fmt::format("API name '{}' is ambiguous; candidates: {}", name, fmt::join(names, ", ")));
    }
    case LookupStatus::NotFound:
        break;
    }
    return tool_error(fmt::format("API '{}' not found in the documentation index", name));
}

std::string digest(std::string_view text)
{
    return sha256_hex(text).substr(0, 16);
}

}  // namespace

ToolResult dispatch_tool(const ToolCall& call, const ToolContext& context)
{
    const auto& tools = builtin_tools();
    auto decl = std::find_if(tools.begin(), tools.end(), [&](const auto& t) { return t.name == call.name; });
    if (decl == tools.end())
        return tool_error(fmt::format("unknown function '{}'", call.name));
    if (auto problem = check_arguments(*decl, call.arguments))
        return tool_error(*problem);
    if (call.name == kToolVariableInfo)
        return variable_info(call.arguments, context);
    return api_documentation(call.arguments, context);
}

std::optional<bool> call_relevance(const ToolCall& call, const SnippetRecord& record)
{
    if (!call.arguments.is_object())
        return std::nullopt;
    if (call.name == kToolApiDocumentation) {
        auto it = call.arguments.find("api_name");
        if (it == call.arguments.end() || !it->is_string())
            return std::nullopt;
        return api_names_match(it->get<std::string>(), record.target_api);
    }
    if (call.name == kToolVariableInfo) {
        auto it = call.arguments.find("variable_name");
        if (it == call.arguments.end() || !it->is_string())
            return std::nullopt;
        const auto name = it->get<std::string>();
        return std::any_of(record.probe_targets.begin(), record.probe_targets.end(),
                           [&](const ProbeTarget& t) { return t.variable_name == name; });
    }
    return std::nullopt;
}

std::string summarize_call_log(const CallLog& log)
{
    struct Tally {
        int calls = 0, relevant = 0, failed = 0;
    };
    std::map<std::string, Tally> by_tool;
    int relevant = 0;
    for (const auto& e : log) {
        auto& t = by_tool[e.tool];
        ++t.calls;
        if (e.relevant.value_or(false)) {
            ++t.relevant;
            ++relevant;
        }
        if (e.failed)
            ++t.failed;
    }
    std::string out = fmt::format("function calls: {} ({} relevant)\n", log.size(), relevant);
    for (const auto& [tool, t] : by_tool)
        out += fmt::format("  {}: {} call(s), {} relevant, {} failed\n", tool, t.calls, t.relevant, t.failed);
    for (std::size_t i = 0; i < log.size(); ++i) {
        const auto& e = log[i];
        std::string tag = !e.relevant ? "malformed" : (*e.relevant ? "relevant" : "not relevant");
        out += fmt::format("  {}. {} {} [{}{}] {}\n", i + 1, e.tool, e.arguments.dump(), tag,
                           e.failed ? ", error" : "", e.result_digest);
    }
    return out;
}

Json call_log_json(const CallLog& log)
{
    Json out = Json::array();
    for (const auto& e : log) {
        Json item{{"tool", e.tool}, {"arguments", e.arguments}, {"result_digest", e.result_digest},
                  {"failed", e.failed}};
        item["relevant"] = e.relevant ? Json(*e.relevant) : Json(nullptr);
        out.push_back(std::move(item));
    }
    return out;
}

AgentFailure::AgentFailure(ErrorCode code, const std::string& detail, AgentRun partial)
    : Error(code, detail), partial_(std::move(partial))
{
}

AgentRun run_agent(const ToolContext& context, Gateway& gateway, const AgentConfig& config,
                   const PromptTemplate& tmpl)
{
    if (config.max_iterations < 1)
        fail(ErrorCode::InvariantViolation, "max_iterations must be at least 1");

    const auto& record = context.record;
    auto prompt = render_agent_prompt(record, tmpl);
    AgentRun run;
    run.conversation = {ChatMessage::system(prompt.system_text), ChatMessage::user(prompt.user_text)};

    const std::vector<ToolDeclaration> no_tools;
    bool nudged = false, reprompted = false;
    std::size_t dispatched = 0;

    while (true) {
        ModelTurn turn;
        std::optional<std::pair<std::size_t, std::string>> malformed;
        try {
            turn = gateway.complete(record.id, run.conversation, nudged ? no_tools : builtin_tools(), config.params);
        } catch (const MalformedToolCallError& e) {
            turn = e.turn();
            malformed.emplace(e.bad_index(), e.detail());
        }
        ++run.model_turns;

        if (turn.is_final()) {
            try {
                run.verdict = parse_verdict(*turn.final_text);
                return run;
            } catch (const MalformedVerdict& e) {
                run.conversation.push_back(ChatMessage::assistant(*turn.final_text));
                if (reprompted)
                    throw AgentFailure(ErrorCode::MalformedVerdict,
                                       fmt::format("record '{}': {} (after one reprompt)", record.id, e.detail()),
                                       std::move(run));
                reprompted = true;
                run.conversation.push_back(ChatMessage::user(
                    substitute(tmpl.section("verdict_reprompt"), {{"reason", e.detail()}})));
                continue;
            }
        }

        if (nudged)
            throw AgentFailure(ErrorCode::AgentExhausted,
                               fmt::format("record '{}': no verdict after {} tool rounds and a final request",
                                           record.id, run.tool_rounds),
                               std::move(run));

        run.conversation.push_back(ChatMessage::assistant("", turn.tool_calls));
        for (std::size_t i = 0; i < turn.tool_calls.size(); ++i) {
            const auto& call = turn.tool_calls[i];
            CallLogEntry entry{call.name, call.arguments, {}, call_relevance(call, record), false};
            ToolResult result;
            if (malformed && malformed->first == i) {
                result = tool_error(malformed->second);
                entry.relevant.reset();
            } else if (!config.allow_unlimited_calls && dispatched >= static_cast<std::size_t>(config.max_iterations)) {
                result = tool_error("the function-call budget for this session is used up");
            } else {
                result = dispatch_tool(call, context);
                ++dispatched;
            }
            entry.failed = result.failed;
            entry.result_digest = digest(result.text);
            run.log.push_back(std::move(entry));
            run.conversation.push_back(ChatMessage::tool_result(call.id, std::move(result.text)));
        }
        ++run.tool_rounds;

        if (run.tool_rounds >= config.max_iterations) {
            run.conversation.push_back(ChatMessage::user(tmpl.section("agent_nudge")));
            nudged = true;
        }
    }
}

}  // namespace dschecker
