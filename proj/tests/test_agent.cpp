#include "support.hpp"

#include "dschecker/agent.hpp"
#include "dschecker/docindex.hpp"
#include "dschecker/verdict.hpp"

using namespace test;

namespace {

const DocIndex& docs()
{
    static const DocIndex index = DocIndex::load(docs_dir());
    return index;
}

ToolCall doc_call(std::string api, std::string id = "")
{
    return {std::move(id), std::string(kToolApiDocumentation), {{"api_name", std::move(api)}}};
}

ToolCall var_call(std::string name, int line)
{
    return {"", std::string(kToolVariableInfo), {{"variable_name", std::move(name)}, {"line_number", line}}};
}

std::string no_verdict()
{
    return Json{{"correct", "no"}, {"patch", imputer_patch()}, {"explanation", "column B is dropped"}}.dump();
}

AgentConfig config(int iterations)
{
    AgentConfig c;
    c.max_iterations = iterations;
    c.params.model_name = "test-model";
    return c;
}

RawRun df_probe_run()
{
    Json info = smoke_record(kMisuseId).recorded_data[0];
    return raw_ok("@@PROBE " + info.dump() + "\n");
}

}  // namespace

TEST_CASE("an always-calling model is exhausted after max_iterations rounds and one nudge")
{
    for (int iterations : {1, 3, 5}) {
        CAPTURE(iterations);
        auto provider = std::make_shared<ScriptedProvider>(
            [](auto&, auto&, auto&) { return call_turn({doc_call("SimpleImputer")}); });
        Gateway gw(provider);
        ToolContext ctx{smoke_record(kMisuseId), smoke_dir(), &docs(), nullptr};
        try {
            run_agent(ctx, gw, config(iterations));
            FAIL("expected AGENT_EXHAUSTED");
        } catch (const AgentFailure& e) {
            CHECK(e.code() == ErrorCode::AgentExhausted);
            const auto& run = e.partial();
            CHECK(run.tool_rounds == iterations);
            CHECK(run.model_turns == iterations + 1);
            CHECK(run.log.size() == static_cast<std::size_t>(iterations));
            CHECK(provider->calls == iterations + 1);
            // Every round offers both tools; the nudged turn offers none.
            std::vector<std::size_t> expected(iterations, 2);
            expected.push_back(0);
            CHECK(provider->offered_tools == expected);
            auto nudges = std::count_if(run.conversation.begin(), run.conversation.end(), [](const ChatMessage& m) {
                return m.role == Role::User && m.content == PromptTemplate::builtin().section("agent_nudge");
            });
            CHECK(nudges == 1);
        }
    }
}

TEST_CASE("a documentation call followed by a verdict")
{
    auto provider = std::make_shared<ScriptedProvider>([](auto&, const auto& conversation, auto&) {
        return conversation.size() == 2 ? call_turn({doc_call("SimpleImputer", "c1")}) : final_turn(no_verdict());
    });
    Gateway gw(provider);
    ToolContext ctx{smoke_record(kMisuseId), smoke_dir(), &docs(), nullptr};
    auto run = run_agent(ctx, gw, config(8));

    CHECK(run.verdict.flags_misuse());
    CHECK(*run.verdict.patch == imputer_patch());
    CHECK(run.model_turns == 2);
    CHECK(run.tool_rounds == 1);
    REQUIRE(run.log.size() == 1);
    CHECK(run.log[0].tool == kToolApiDocumentation);
    CHECK(run.log[0].relevant == true);
    CHECK_FALSE(run.log[0].failed);

    // The conversation starts with the BASE prompt and carries the documentation.
    auto base = render_agent_prompt(smoke_record(kMisuseId));
    CHECK(run.conversation[0].content == base.system_text);
    CHECK(run.conversation[1].content == base.user_text);
    CHECK(run.conversation[3].role == Role::ToolResult);
    CHECK(run.conversation[3].content == docs().lookup("SimpleImputer").entry->body);
    CHECK_FALSE(check_conversation(run.conversation));

    const auto digest = run.log[0].result_digest;
    CHECK(digest.size() == 16);
    CHECK(summarize_call_log(run.log) ==
          "function calls: 1 (1 relevant)\n"
          "  get_api_documentation: 1 call(s), 1 relevant, 0 failed\n"
          "  1. get_api_documentation {\"api_name\":\"SimpleImputer\"} [relevant] " +
              digest + "\n");
    auto j = call_log_json(run.log);
    CHECK(j[0]["relevant"] == true);
    CHECK(j[0]["result_digest"] == digest);
}

TEST_CASE("variable probes go through the executor")
{
    FakeExecutor exec([](const ExecRequest& r) {
        CHECK(r.mode == ExecMode::Probe);
        return df_probe_run();
    });
    int n = 0;
    auto provider = std::make_shared<ScriptedProvider>([&](auto&, auto&, auto&) {
        switch (n++) {
        case 0: return call_turn({var_call("df", 4), var_call("imp", 6), doc_call("pandas.read_csv")});
        default: return final_turn("{\"correct\": \"yes\"}");
        }
    });
    Gateway gw(provider);
    ToolContext ctx{smoke_record(kMisuseId), smoke_dir(), &docs(), &exec};
    auto run = run_agent(ctx, gw, config(8));

    CHECK(run.verdict.correct == Answer::Yes);
    REQUIRE(run.log.size() == 3);
    CHECK(run.log[0].relevant == true);
    CHECK(run.log[1].relevant == false);
    CHECK(run.log[2].relevant == false);
    CHECK(run.conversation[3].content == render_data_section(smoke_record(kMisuseId).recorded_data[0]));
    // The imp probe got the df record back, which the protocol rejects; the model sees an error text.
    CHECK(run.log[1].failed);
    CHECK(exec.requests[1].probes == std::vector<ProbeTarget>{{"imp", 6}});
    CHECK(run.conversation[4].content.rfind("error: ", 0) == 0);
    CHECK(summarize_call_log(run.log).find("function calls: 3 (1 relevant)") == 0);
}

TEST_CASE("tool errors are answered, infrastructure failures escalate")
{
    const auto& record = smoke_record(kMisuseId);
    FakeExecutor shim_fails([](const ExecRequest&) { return RawRun{2, 0, false, "", "cannot instrument", 5}; });
    ToolContext ctx{record, smoke_dir(), &docs(), &shim_fails};

    auto r = dispatch_tool(var_call("df", 4), ctx);
    CHECK(r.failed);
    CHECK(r.text == "error: cannot instrument");
    CHECK(dispatch_tool(var_call("nope", 4), ctx).text == "error: variable 'nope' does not appear in the snippet");
    CHECK(dispatch_tool(var_call("df", 99), ctx).text == "error: line 99 is outside the snippet (lines 1-8)");
    CHECK(dispatch_tool(doc_call("NoSuchApi"), ctx).text ==
          "error: API 'NoSuchApi' not found in the documentation index");
    CHECK(dispatch_tool({"", "rm_rf", {}}, ctx).text == "error: unknown function 'rm_rf'");
    CHECK(dispatch_tool({"", std::string(kToolApiDocumentation), {{"api", "x"}}}, ctx).failed);

    FakeExecutor raised([](const ExecRequest&) { return RawRun{3, 0, false, "", "Traceback:\nIndexError: x\n", 5}; });
    ToolContext ctx_raised{record, smoke_dir(), &docs(), &raised};
    CHECK(dispatch_tool(var_call("df", 4), ctx_raised).text ==
          "error: 'df' had no value after line 4: the program raised IndexError first");

    ToolContext no_exec{record, smoke_dir(), nullptr, nullptr};
    CHECK(dispatch_tool(var_call("df", 4), no_exec).text == "error: runtime information is not available in this session");
    CHECK(dispatch_tool(doc_call("SimpleImputer"), no_exec).text == "error: no documentation index is loaded");

    ReplayExecutor empty{ExecTranscript{}};
    ToolContext ctx_replay{record, smoke_dir(), &docs(), &empty};
    CHECK(error_code_of([&] { dispatch_tool(var_call("df", 4), ctx_replay); }) == ErrorCode::TranscriptMiss);

    FakeExecutor slow([](const ExecRequest&) {
        RawRun r;
        r.timed_out = true;
        return r;
    });
    ToolContext ctx_slow{record, smoke_dir(), &docs(), &slow};
    CHECK(error_code_of([&] { dispatch_tool(var_call("df", 4), ctx_slow); }) == ErrorCode::Timeout);
}

TEST_CASE("ambiguous documentation names list the candidates")
{
    auto index = DocIndex::from_entries({{"pandas", "pandas.merge", "a.md", "a", {}},
                                         {"pandas", "pandas.DataFrame.merge", "b.md", "b", {}}});
    ToolContext ctx{smoke_record(kMisuseId), smoke_dir(), &index, nullptr};
    CHECK(dispatch_tool(doc_call("merge"), ctx).text ==
          "error: API name 'merge' is ambiguous; candidates: pandas.merge (pandas), pandas.DataFrame.merge (pandas)");
}

TEST_CASE("an unusable verdict gets one reprompt")
{
    SUBCASE("recovered")
    {
        int n = 0;
        auto provider = std::make_shared<ScriptedProvider>(
            [&](auto&, auto&, auto&) { return final_turn(n++ == 0 ? "I think it is fine." : "{\"correct\":\"yes\"}"); });
        Gateway gw(provider);
        ToolContext ctx{smoke_record(kMisuseId), smoke_dir(), &docs(), nullptr};
        auto run = run_agent(ctx, gw, config(2));
        CHECK(run.verdict.correct == Answer::Yes);
        CHECK(run.model_turns == 2);
        CHECK(run.conversation.back().role == Role::User);
        CHECK(run.conversation.back().content.rfind("Your previous reply could not be used: no JSON object", 0) == 0);
    }
    SUBCASE("still unusable")
    {
        auto provider = std::make_shared<ScriptedProvider>([](auto&, auto&, auto&) { return final_turn("{\"correct\": 1}"); });
        Gateway gw(provider);
        ToolContext ctx{smoke_record(kMisuseId), smoke_dir(), &docs(), nullptr};
        try {
            run_agent(ctx, gw, config(2));
            FAIL("expected MALFORMED_VERDICT");
        } catch (const AgentFailure& e) {
            CHECK(e.code() == ErrorCode::MalformedVerdict);
            CHECK(e.partial().model_turns == 2);
        }
    }
}

TEST_CASE("malformed tool calls are answered and logged without relevance")
{
    int n = 0;
    auto provider = std::make_shared<ScriptedProvider>([&](auto&, auto&, auto&) {
        if (n++ == 0)
            return call_turn({doc_call("SimpleImputer"), {"", "read_file", {{"path", "/etc/passwd"}}}});
        return final_turn(no_verdict());
    });
    Gateway gw(provider);
    ToolContext ctx{smoke_record(kMisuseId), smoke_dir(), &docs(), nullptr};
    auto run = run_agent(ctx, gw, config(4));
    REQUIRE(run.log.size() == 2);
    CHECK(run.log[0].relevant == true);
    CHECK_FALSE(run.log[1].relevant);
    CHECK(run.log[1].failed);
    CHECK(run.conversation[4].content == "error: call to undeclared tool 'read_file'");
    CHECK(summarize_call_log(run.log).find("read_file {\"path\":\"/etc/passwd\"} [malformed, error]") !=
          std::string::npos);
}

TEST_CASE("a limited call budget refuses calls beyond max_iterations")
{
    int n = 0;
    auto provider = std::make_shared<ScriptedProvider>([&](auto&, auto&, auto&) {
        if (n++ == 0)
            return call_turn({doc_call("SimpleImputer"), doc_call("pandas.read_csv"), doc_call("numpy.reshape")});
        return final_turn("{\"correct\":\"yes\"}");
    });
    Gateway gw(provider);
    ToolContext ctx{smoke_record(kMisuseId), smoke_dir(), &docs(), nullptr};
    auto c = config(2);
    c.allow_unlimited_calls = false;
    auto run = run_agent(ctx, gw, c);
    REQUIRE(run.log.size() == 3);
    CHECK_FALSE(run.log[1].failed);
    CHECK(run.log[2].failed);
    CHECK(run.conversation[5].content == "error: the function-call budget for this session is used up");

    c.max_iterations = 0;
    CHECK(error_code_of([&] { run_agent(ctx, gw, c); }) == ErrorCode::InvariantViolation);
}

TEST_CASE("relevance follows the record's target API and probe targets")
{
    const auto& r = smoke_record(kMisuseId);
    CHECK(call_relevance(doc_call("sklearn.impute.SimpleImputer"), r) == true);
    CHECK(call_relevance(doc_call("impute.SimpleImputer"), r) == true);
    CHECK(call_relevance(doc_call("numpy.nan"), r) == false);
    CHECK(call_relevance(var_call("df", 7), r) == true);
    CHECK(call_relevance(var_call("imp_array", 7), r) == false);
    CHECK_FALSE(call_relevance({"", std::string(kToolApiDocumentation), {{"api_name", 3}}}, r));
    CHECK_FALSE(call_relevance({"", "other", {{"api_name", "SimpleImputer"}}}, r));
}
