#pragma once

#include "dschecker/error.hpp"
#include "dschecker/model.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dschecker {

inline constexpr std::string_view kToolVariableInfo = "get_variable_info";
inline constexpr std::string_view kToolApiDocumentation = "get_api_documentation";

struct ToolCall {
    std::string id;
    std::string name;
    Json arguments = Json::object();

    bool operator==(const ToolCall&) const = default;
};

enum class Role { System, User, Assistant, ToolResult };

std::string_view to_string(Role role);
Role role_from_string(std::string_view text);

struct ChatMessage {
    Role role = Role::User;
    std::string content;
    std::vector<ToolCall> tool_calls;          // Assistant only
    std::optional<std::string> tool_call_id;   // ToolResult only

    static ChatMessage system(std::string text) { return {Role::System, std::move(text), {}, {}}; }
    static ChatMessage user(std::string text) { return {Role::User, std::move(text), {}, {}}; }
    static ChatMessage assistant(std::string text, std::vector<ToolCall> calls = {})
    {
        return {Role::Assistant, std::move(text), std::move(calls), {}};
    }
    static ChatMessage tool_result(std::string id, std::string text)
    {
        return {Role::ToolResult, std::move(text), {}, std::move(id)};
    }

    bool operator==(const ChatMessage&) const = default;
};

/// Either a final answer or a non-empty batch of tool calls.
struct ModelTurn {
    std::optional<std::string> final_text;
    std::vector<ToolCall> tool_calls;

    bool is_final() const noexcept { return final_text.has_value(); }
    bool operator==(const ModelTurn&) const = default;
};

struct ToolDeclaration {
    std::string name;
    std::string description;
    Json parameters;  // JSON-schema object

    bool operator==(const ToolDeclaration&) const = default;
};

/// The two agent tools, from assets/tool_declarations.json.
const std::vector<ToolDeclaration>& builtin_tools();

/// Declarations in the chat-completions "tools" wire form.
Json tools_to_json(const std::vector<ToolDeclaration>& tools);
std::vector<ToolDeclaration> tools_from_json(const Json& j);

/// Checks `arguments` against the declared parameter schema (object with
/// typed properties, required keys, optional additionalProperties=false).
/// Returns a description of the first violation.
std::optional<std::string> check_arguments(const ToolDeclaration& tool, const Json& arguments);

void to_json(Json& j, const ToolCall& v);
void from_json(const Json& j, ToolCall& v);
void to_json(Json& j, const ChatMessage& v);
void from_json(const Json& j, ChatMessage& v);
void to_json(Json& j, const ModelTurn& v);
void from_json(const Json& j, ModelTurn& v);

/// SHA-256 over the canonical JSON of (messages, tools, params).
std::string request_hash(const std::vector<ChatMessage>& conversation, const std::vector<ToolDeclaration>& tools,
                         const GenerationParams& params);

/// MALFORMED_TOOL_CALL that still carries the offending turn, so the caller
/// can answer each call (the bad one with an error text).
class MalformedToolCallError : public Error {
public:
    MalformedToolCallError(ModelTurn turn, std::size_t bad_index, const std::string& detail);
    const ModelTurn& turn() const noexcept { return turn_; }
    std::size_t bad_index() const noexcept { return bad_index_; }

private:
    ModelTurn turn_;
    std::size_t bad_index_;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    /// `conversation_id` groups the turns of one dialogue (the record id).
    virtual ModelTurn complete(const std::string& conversation_id, const std::vector<ChatMessage>& conversation,
                               const std::vector<ToolDeclaration>& tools, const GenerationParams& params) = 0;
    virtual bool uses_network() const { return false; }
};

/// Validates requests and responses around a provider. Shareable across threads.
class Gateway {
public:
    explicit Gateway(std::shared_ptr<ChatProvider> provider);

    /// Throws InvariantViolation on a malformed conversation, and
    /// MalformedToolCallError when a returned call names an undeclared tool or
    /// its arguments violate the declared schema.
    ModelTurn complete(const std::string& conversation_id, const std::vector<ChatMessage>& conversation,
                       const std::vector<ToolDeclaration>& tools, const GenerationParams& params);

    ChatProvider& provider() noexcept { return *provider_; }
    bool uses_network() const { return provider_->uses_network(); }

private:
    std::shared_ptr<ChatProvider> provider_;
};

/// Conversation well-formedness: starts with SYSTEM, tool results answer
/// earlier calls, only assistants carry calls. Returns the first problem.
std::optional<std::string> check_conversation(const std::vector<ChatMessage>& conversation);

struct ScriptedExchange {
    std::optional<std::string> request_hash;  // absent = scripted, matches in order
    ModelTurn turn;
};

/// One recorded dialogue (one file).
struct ChatTranscript {
    std::string conversation_id;
    std::vector<ScriptedExchange> exchanges;

    static ChatTranscript parse(std::string_view text);
    static ChatTranscript load(const std::filesystem::path& path);
    std::string serialize() const;
};

/// Plays back transcripts. Recorded exchanges match by request hash; scripted
/// (hash-less) exchanges are consumed in order. A conversation id with no
/// transcript falls back to the only transcript when exactly one is loaded.
class ReplayProvider : public ChatProvider {
public:
    explicit ReplayProvider(std::vector<ChatTranscript> transcripts);
    /// A transcript file, or a directory of `*.json` transcripts.
    static std::shared_ptr<ReplayProvider> from_path(const std::filesystem::path& path);

    ModelTurn complete(const std::string& conversation_id, const std::vector<ChatMessage>& conversation,
                       const std::vector<ToolDeclaration>& tools, const GenerationParams& params) override;

private:
    struct Cursor {
        ChatTranscript transcript;
        std::vector<bool> used;
    };
    std::mutex mutex_;
    std::map<std::string, Cursor> conversations_;
};

/// Forwards to another provider and records every exchange with its hash.
class RecordingProvider : public ChatProvider {
public:
    explicit RecordingProvider(std::shared_ptr<ChatProvider> inner);

    ModelTurn complete(const std::string& conversation_id, const std::vector<ChatMessage>& conversation,
                       const std::vector<ToolDeclaration>& tools, const GenerationParams& params) override;
    bool uses_network() const override { return inner_->uses_network(); }

    std::vector<ChatTranscript> transcripts() const;
    /// Writes one `<conversation_id>.json` per dialogue into `dir`.
    void save(const std::filesystem::path& dir) const;

private:
    std::shared_ptr<ChatProvider> inner_;
    mutable std::mutex mutex_;
    std::map<std::string, ChatTranscript> conversations_;
};

}  // namespace dschecker
