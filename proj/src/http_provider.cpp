#include "dschecker/http_provider.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include <cstdlib>
#include <regex>
#include <thread>

namespace dschecker {

namespace {

std::string excerpt(std::string_view body)
{
    constexpr std::size_t kMax = 300;
    return body.size() <= kMax ? std::string(body) : std::string(body.substr(0, kMax)) + "...";
}

Json message_to_wire(const ChatMessage& m)
{
    Json j{{"role", to_string(m.role)}, {"content", m.content}};
    if (m.role == Role::Assistant && !m.tool_calls.empty()) {
        Json calls = Json::array();
        for (const auto& c : m.tool_calls)
            calls.push_back({{"id", c.id},
                             {"type", "function"},
                             {"function", {{"name", c.name}, {"arguments", c.arguments.dump()}}}});
        j["tool_calls"] = std::move(calls);
        if (m.content.empty())
            j["content"] = nullptr;
    }
    if (m.role == Role::ToolResult)
        j["tool_call_id"] = m.tool_call_id.value_or("");
    return j;
}

}  // namespace

HttpProviderOptions http_options_from_env()
{
    HttpProviderOptions options;
    if (const char* base = std::getenv("DSCHECKER_API_BASE"); base && *base)
        options.api_base = base;
    if (const char* key = std::getenv("DSCHECKER_API_KEY"); key && *key)
        options.api_key = key;
    return options;
}

HttpProvider::HttpProvider(HttpProviderOptions options) : options_(std::move(options))
{
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(options_.api_base, m, url_re))
        fail(ErrorCode::ConfigSyntax, fmt::format("API base '{}' is not an http(s) URL", options_.api_base));
    origin_ = m[1].str();
    path_ = m[2].matched ? m[2].str() : "";
    while (!path_.empty() && path_.back() == '/')
        path_.pop_back();
    if (options_.max_attempts < 1)
        options_.max_attempts = 1;
}

Json chat_request_body(const std::vector<ChatMessage>& conversation, const std::vector<ToolDeclaration>& tools,
                       const GenerationParams& params)
{
    Json messages = Json::array();
    for (const auto& m : conversation)
        messages.push_back(message_to_wire(m));
    Json body{{"model", params.model_name},
              {"temperature", params.temperature},
              {"max_tokens", params.max_output_tokens},
              {"messages", std::move(messages)}};
    if (!tools.empty())
        body["tools"] = tools_to_json(tools);
    return body;
}

ModelTurn parse_chat_response(const Json& body)
{
    ModelTurn turn;
    try {
        const auto& message = body.at("choices").at(0).at("message");
        if (auto calls = message.find("tool_calls"); calls != message.end() && calls->is_array() && !calls->empty()) {
            for (const auto& c : *calls) {
                ToolCall call;
                call.id = c.value("id", std::string{});
                const auto& fn = c.at("function");
                fn.at("name").get_to(call.name);
                turn.tool_calls.push_back(std::move(call));
            }
            for (std::size_t i = 0; i < calls->size(); ++i) {
                const auto& args = (*calls)[i].at("function").value("arguments", Json("{}"));
                try {
                    turn.tool_calls[i].arguments = args.is_string() ? Json::parse(args.get<std::string>()) : args;
                } catch (const Json::exception&) {
                    throw MalformedToolCallError(turn, i, fmt::format("arguments of {} are not valid JSON: {}",
                                                                      turn.tool_calls[i].name, excerpt(args.dump())));
                }
            }
            return turn;
        }
        const auto& content = message.at("content");
        turn.final_text = content.is_string() ? content.get<std::string>() : std::string{};
    } catch (const Json::exception& e) {
        fail(ErrorCode::ProviderHttp, fmt::format("unexpected response shape: {}", e.what()));
    }
    return turn;
}

ModelTurn HttpProvider::complete(const std::string&, const std::vector<ChatMessage>& conversation,
                                 const std::vector<ToolDeclaration>& tools, const GenerationParams& params)
{
    const auto payload = chat_request_body(conversation, tools, params).dump();
    const auto endpoint = path_ + "/chat/completions";

    httplib::Client client(origin_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout).count();
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout).count() % 1'000'000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!options_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + options_.api_key);

    std::string last_problem;
    bool rate_limited = false;
    auto wait = options_.backoff;
    for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(wait);
            wait *= 2;
        }
        auto res = client.Post(endpoint, headers, payload, "application/json");
        if (!res) {
            last_problem = fmt::format("request to {}{} failed: {}", origin_, endpoint, httplib::to_string(res.error()));
            rate_limited = false;
            continue;
        }
        if (res->status == 429) {
            last_problem = fmt::format("HTTP 429: {}", excerpt(res->body));
            rate_limited = true;
            continue;
        }
        if (res->status >= 500) {
            last_problem = fmt::format("HTTP {}: {}", res->status, excerpt(res->body));
            rate_limited = false;
            continue;
        }
        if (res->status != 200)
            fail(ErrorCode::ProviderHttp, fmt::format("HTTP {}: {}", res->status, excerpt(res->body)));
        Json body;
        try {
            body = Json::parse(res->body);
        } catch (const Json::exception&) {
            fail(ErrorCode::ProviderHttp, fmt::format("response is not JSON: {}", excerpt(res->body)));
        }
        return parse_chat_response(body);
    }
    if (rate_limited)
        fail(ErrorCode::RateLimited,
             fmt::format("{} after {} attempts; wait before retrying or lower --jobs", last_problem,
                         options_.max_attempts));
    fail(ErrorCode::ProviderHttp, fmt::format("{} (after {} attempts)", last_problem, options_.max_attempts));
}

}  // namespace dschecker
