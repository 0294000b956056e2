#pragma once

#include "dschecker/gateway.hpp"

#include <chrono>
#include <string>

namespace dschecker {

struct HttpProviderOptions {
    /// Base URL of an OpenAI-compatible API, e.g. "https://api.openai.com/v1".
    std::string api_base = "https://api.openai.com/v1";
    std::string api_key;
    std::chrono::milliseconds timeout{120'000};
    int max_attempts = 3;
    /// First retry waits this long; each further retry doubles it.
    std::chrono::milliseconds backoff{1'000};
};

/// Reads DSCHECKER_API_BASE and DSCHECKER_API_KEY.
HttpProviderOptions http_options_from_env();

/// Chat-completions client. Transient failures (connection errors, 5xx, 429)
/// are retried with exponential backoff; a final 429 is RATE_LIMITED, any
/// other failure PROVIDER_HTTP.
class HttpProvider : public ChatProvider {
public:
    explicit HttpProvider(HttpProviderOptions options);

    ModelTurn complete(const std::string& conversation_id, const std::vector<ChatMessage>& conversation,
                       const std::vector<ToolDeclaration>& tools, const GenerationParams& params) override;
    bool uses_network() const override { return true; }

private:
    HttpProviderOptions options_;
    std::string origin_;  // scheme://host[:port]
    std::string path_;    // path prefix, e.g. "/v1"
};

/// Request body in the chat-completions wire format.
Json chat_request_body(const std::vector<ChatMessage>& conversation, const std::vector<ToolDeclaration>& tools,
                       const GenerationParams& params);

/// Parses a chat-completions response body. Unparseable tool-call arguments
/// raise MalformedToolCallError.
ModelTurn parse_chat_response(const Json& body);

}  // namespace dschecker
