#include "dschecker/gateway.hpp"

#include "dschecker/assets/tool_declarations.hpp"
#include "dschecker/dataset.hpp"
#include "dschecker/hashing.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

namespace fs = std::filesystem;

namespace dschecker {

namespace {

constexpr std::string_view kChatFormat = "dschecker-chat-transcript";
constexpr int kChatVersion = 1;

bool has_type(const Json& value, std::string_view type)
{
    if (type == "string")
        return value.is_string();
    if (type == "integer")
        return value.is_number_integer();
    if (type == "number")
        return value.is_number();
    if (type == "boolean")
        return value.is_boolean();
    if (type == "object")
        return value.is_object();
    if (type == "array")
        return value.is_array();
    return true;
}

/// Conversation ids become file names; keep them portable.
std::string file_stem_for(std::string_view id)
{
    std::string out;
    for (char c : id)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
    return out.empty() ? "conversation" : out;
}

}  // namespace

std::string_view to_string(Role role)
{
    switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    case Role::ToolResult: return "tool";
    }
    return "user";
}

Role role_from_string(std::string_view text)
{
    for (auto r : {Role::System, Role::User, Role::Assistant, Role::ToolResult})
        if (text == to_string(r))
            return r;
    fail(ErrorCode::ConfigSyntax, fmt::format("unknown chat role '{}'", text));
}

const std::vector<ToolDeclaration>& builtin_tools()
{
    static const std::vector<ToolDeclaration> tools = tools_from_json(Json::parse(assets::builtin_tool_declarations));
    return tools;
}

Json tools_to_json(const std::vector<ToolDeclaration>& tools)
{
    Json out = Json::array();
    for (const auto& t : tools)
        out.push_back({{"type", "function"},
                       {"function", {{"name", t.name}, {"description", t.description}, {"parameters", t.parameters}}}});
    return out;
}

std::vector<ToolDeclaration> tools_from_json(const Json& j)
{
    std::vector<ToolDeclaration> out;
    try {
        for (const auto& item : j) {
            const auto& fn = item.at("function");
            out.push_back({fn.at("name").get<std::string>(), fn.value("description", std::string{}),
                           fn.at("parameters")});
        }
    } catch (const Json::exception& e) {
        fail(ErrorCode::ConfigSyntax, fmt::format("tool declarations: {}", e.what()));
    }
    return out;
}

std::optional<std::string> check_arguments(const ToolDeclaration& tool, const Json& arguments)
{
    if (!arguments.is_object())
        return fmt::format("arguments of {} must be an object", tool.name);
    const auto& schema = tool.parameters;
    const auto properties = schema.value("properties", Json::object());
    for (const auto& key : schema.value("required", Json::array())) {
        if (!arguments.contains(key.get<std::string>()))
            return fmt::format("{} requires argument '{}'", tool.name, key.get<std::string>());
    }
    for (const auto& [key, value] : arguments.items()) {
        auto prop = properties.find(key);
        if (prop == properties.end()) {
            if (schema.value("additionalProperties", true) == false)
                return fmt::format("{} has no argument '{}'", tool.name, key);
            continue;
        }
        auto type = prop->value("type", std::string{});
        if (!type.empty() && !has_type(value, type))
            return fmt::format("argument '{}' of {} must be {}, got {}", key, tool.name, type, value.dump());
    }
    return std::nullopt;
}

void to_json(Json& j, const ToolCall& v)
{
    j = Json{{"id", v.id}, {"name", v.name}, {"arguments", v.arguments}};
}

void from_json(const Json& j, ToolCall& v)
{
    v.id = j.value("id", std::string{});
    j.at("name").get_to(v.name);
    v.arguments = j.value("arguments", Json::object());
}

void to_json(Json& j, const ChatMessage& v)
{
    j = Json{{"role", to_string(v.role)}, {"content", v.content}};
    if (!v.tool_calls.empty())
        j["tool_calls"] = v.tool_calls;
    if (v.tool_call_id)
        j["tool_call_id"] = *v.tool_call_id;
}

void from_json(const Json& j, ChatMessage& v)
{
    v.role = role_from_string(j.at("role").get<std::string>());
    v.content = j.value("content", std::string{});
    v.tool_calls = j.value("tool_calls", std::vector<ToolCall>{});
    if (j.contains("tool_call_id"))
        v.tool_call_id = j.at("tool_call_id").get<std::string>();
}

void to_json(Json& j, const ModelTurn& v)
{
    if (v.final_text)
        j = Json{{"content", *v.final_text}};
    else
        j = Json{{"tool_calls", v.tool_calls}};
}

void from_json(const Json& j, ModelTurn& v)
{
    v = ModelTurn{};
    if (j.contains("tool_calls") && !j.at("tool_calls").empty()) {
        j.at("tool_calls").get_to(v.tool_calls);
    } else {
        v.final_text = j.at("content").get<std::string>();
    }
}

std::string request_hash(const std::vector<ChatMessage>& conversation, const std::vector<ToolDeclaration>& tools,
                         const GenerationParams& params)
{
    Json j{{"messages", conversation}, {"tools", tools_to_json(tools)}, {"params", params}};
    return sha256_hex(j.dump());
}

MalformedToolCallError::MalformedToolCallError(ModelTurn turn, std::size_t bad_index, const std::string& detail)
    : Error(ErrorCode::MalformedToolCall, detail), turn_(std::move(turn)), bad_index_(bad_index)
{
}

std::optional<std::string> check_conversation(const std::vector<ChatMessage>& conversation)
{
    if (conversation.empty() || conversation.front().role != Role::System)
        return "conversation must start with a system message";
    std::set<std::string> open, answered;
    for (std::size_t i = 0; i < conversation.size(); ++i) {
        const auto& m = conversation[i];
        if (m.role != Role::Assistant && !m.tool_calls.empty())
            return fmt::format("message {} carries tool calls but is not from the assistant", i);
        if (m.role == Role::ToolResult) {
            if (!m.tool_call_id)
                return fmt::format("tool result at message {} has no call id", i);
            if (!open.count(*m.tool_call_id))
                return fmt::format("tool result '{}' answers no earlier call", *m.tool_call_id);
            if (!answered.insert(*m.tool_call_id).second)
                return fmt::format("tool call '{}' answered twice", *m.tool_call_id);
        } else if (m.tool_call_id) {
            return fmt::format("message {} has a tool_call_id but is not a tool result", i);
        }
        for (const auto& call : m.tool_calls)
            if (!open.insert(call.id).second)
                return fmt::format("tool call id '{}' reused", call.id);
    }
    return std::nullopt;
}

Gateway::Gateway(std::shared_ptr<ChatProvider> provider) : provider_(std::move(provider)) {}

ModelTurn Gateway::complete(const std::string& conversation_id, const std::vector<ChatMessage>& conversation,
                            const std::vector<ToolDeclaration>& tools, const GenerationParams& params)
{
    if (auto problem = check_conversation(conversation))
        fail(ErrorCode::InvariantViolation, *problem);
    params.validate();

    auto assign_ids = [&](ModelTurn& turn) {
        for (std::size_t i = 0; i < turn.tool_calls.size(); ++i)
            if (turn.tool_calls[i].id.empty())
                turn.tool_calls[i].id = fmt::format("call_{}_{}", conversation.size(), i + 1);
    };

    ModelTurn turn;
    try {
        turn = provider_->complete(conversation_id, conversation, tools, params);
    } catch (const MalformedToolCallError& e) {
        auto bad = e.turn();
        assign_ids(bad);
        throw MalformedToolCallError(std::move(bad), e.bad_index(), e.detail());
    }
    if (!turn.final_text && turn.tool_calls.empty())
        turn.final_text = "";
    if (turn.final_text && !turn.tool_calls.empty())
        turn.final_text.reset();
    assign_ids(turn);

    for (std::size_t i = 0; i < turn.tool_calls.size(); ++i) {
        const auto& call = turn.tool_calls[i];
        auto decl = std::find_if(tools.begin(), tools.end(), [&](const auto& t) { return t.name == call.name; });
        if (decl == tools.end())
            throw MalformedToolCallError(turn, i, fmt::format("call to undeclared tool '{}'", call.name));
        if (auto problem = check_arguments(*decl, call.arguments))
            throw MalformedToolCallError(turn, i, *problem);
    }
    return turn;
}

ChatTranscript ChatTranscript::parse(std::string_view text)
{
    ChatTranscript t;
    try {
        auto j = Json::parse(text);
        if (j.at("format").get<std::string>() != kChatFormat)
            fail(ErrorCode::ConfigSyntax, "not a chat transcript");
        if (j.at("version").get<int>() != kChatVersion)
            fail(ErrorCode::ConfigSyntax, fmt::format("unsupported chat transcript version {}", j.at("version").dump()));
        j.at("conversation_id").get_to(t.conversation_id);
        for (const auto& e : j.at("exchanges")) {
            ScriptedExchange ex;
            if (e.contains("request_hash") && !e["request_hash"].is_null())
                ex.request_hash = e["request_hash"].get<std::string>();
            ex.turn = e.at("turn").get<ModelTurn>();
            t.exchanges.push_back(std::move(ex));
        }
    } catch (const Json::exception& e) {
        fail(ErrorCode::ConfigSyntax, fmt::format("chat transcript: {}", e.what()));
    }
    return t;
}

ChatTranscript ChatTranscript::load(const fs::path& path)
{
    if (!fs::is_regular_file(path))
        fail(ErrorCode::MissingFile, fmt::format("chat transcript '{}' not found", path.string()));
    try {
        return parse(read_text_file(path));
    } catch (const Error& e) {
        fail(e.code(), fmt::format("{}: {}", path.string(), e.detail()));
    }
}

std::string ChatTranscript::serialize() const
{
    Json exchanges_json = Json::array();
    for (const auto& e : exchanges) {
        Json item{{"turn", e.turn}};
        if (e.request_hash)
            item["request_hash"] = *e.request_hash;
        exchanges_json.push_back(std::move(item));
    }
    Json j{{"format", kChatFormat},
           {"version", kChatVersion},
           {"conversation_id", conversation_id},
           {"exchanges", std::move(exchanges_json)}};
    return j.dump(2) + "\n";
}

ReplayProvider::ReplayProvider(std::vector<ChatTranscript> transcripts)
{
    for (auto& t : transcripts) {
        auto id = t.conversation_id;
        std::vector<bool> used(t.exchanges.size(), false);
        if (!conversations_.emplace(id, Cursor{std::move(t), std::move(used)}).second)
            fail(ErrorCode::ConfigSyntax, fmt::format("two transcripts for conversation '{}'", id));
    }
}

std::shared_ptr<ReplayProvider> ReplayProvider::from_path(const fs::path& path)
{
    std::vector<ChatTranscript> transcripts;
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(path))
            if (entry.is_regular_file() && entry.path().extension() == ".json")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files)
            transcripts.push_back(ChatTranscript::load(f));
        if (transcripts.empty())
            fail(ErrorCode::MissingFile, fmt::format("no chat transcripts in '{}'", path.string()));
    } else {
        transcripts.push_back(ChatTranscript::load(path));
    }
    return std::make_shared<ReplayProvider>(std::move(transcripts));
}

ModelTurn ReplayProvider::complete(const std::string& conversation_id, const std::vector<ChatMessage>& conversation,
                                   const std::vector<ToolDeclaration>& tools, const GenerationParams& params)
{
    const auto hash = request_hash(conversation, tools, params);
    std::lock_guard lock(mutex_);
    auto it = conversations_.find(conversation_id);
    if (it == conversations_.end()) {
        if (conversations_.size() != 1)
            fail(ErrorCode::ReplayMismatch, fmt::format("no transcript for conversation '{}'", conversation_id));
        it = conversations_.begin();
    }
    auto& cursor = it->second;
    const auto& exchanges = cursor.transcript.exchanges;

    for (std::size_t i = 0; i < exchanges.size(); ++i) {
        if (!cursor.used[i] && exchanges[i].request_hash == hash) {
            cursor.used[i] = true;
            return exchanges[i].turn;
        }
    }
    for (std::size_t i = 0; i < exchanges.size(); ++i) {
        if (cursor.used[i])
            continue;
        if (exchanges[i].request_hash)
            fail(ErrorCode::ReplayMismatch,
                 fmt::format("conversation '{}' request {} diverged from the recording (hash {} vs recorded {})",
                             conversation_id, i + 1, hash.substr(0, 12), exchanges[i].request_hash->substr(0, 12)));
        cursor.used[i] = true;
        return exchanges[i].turn;
    }
    fail(ErrorCode::ReplayMismatch,
         fmt::format("conversation '{}' has no recorded turn left ({} used)", conversation_id, exchanges.size()));
}

RecordingProvider::RecordingProvider(std::shared_ptr<ChatProvider> inner) : inner_(std::move(inner)) {}

ModelTurn RecordingProvider::complete(const std::string& conversation_id, const std::vector<ChatMessage>& conversation,
                                      const std::vector<ToolDeclaration>& tools, const GenerationParams& params)
{
    auto turn = inner_->complete(conversation_id, conversation, tools, params);
    std::lock_guard lock(mutex_);
    auto& t = conversations_[conversation_id];
    t.conversation_id = conversation_id;
    t.exchanges.push_back({request_hash(conversation, tools, params), turn});
    return turn;
}

std::vector<ChatTranscript> RecordingProvider::transcripts() const
{
    std::lock_guard lock(mutex_);
    std::vector<ChatTranscript> out;
    for (const auto& [id, t] : conversations_)
        out.push_back(t);
    return out;
}

void RecordingProvider::save(const fs::path& dir) const
{
    fs::create_directories(dir);
    for (const auto& t : transcripts()) {
        auto path = dir / (file_stem_for(t.conversation_id) + ".json");
        std::ofstream out(path, std::ios::binary);
        out << t.serialize();
        if (!out)
            fail(ErrorCode::WorkspaceIo, fmt::format("cannot write '{}'", path.string()));
    }
}

}  // namespace dschecker
