#include "support.hpp"

#include "dschecker/prompt.hpp"

using namespace test;

namespace {

std::string golden(const std::string& name)
{
    return read_text_file(fixture("prompt/" + name));
}

PromptBundle render_smoke(PromptVariant v, std::span<const FewShotExemplar> shots = {})
{
    const auto& r = smoke_record(kMisuseId);
    return render(v, r, r.recorded_data, shots);
}

}  // namespace

TEST_CASE("FULL prompt for the imputer misuse matches the golden text")
{
    auto bundle = render_smoke(PromptVariant::Full);
    CHECK(bundle.user_text == golden("full_misuse.txt"));
    CHECK(bundle.system_text.rfind("You are an expert Python developer", 0) == 0);
    CHECK(bundle.substitutions.at("$lib") == "sklearn");
    CHECK(bundle.substitutions.at("$variable#1") == "df");
    CHECK(bundle.substitutions.at("$linenum#1") == "4");
    CHECK(bundle.substitutions.at("$parameter#1") == "strategy");
}

TEST_CASE("BASE prompt carries neither data nor directives")
{
    auto bundle = render_smoke(PromptVariant::Base);
    CHECK(bundle.user_text == golden("base_misuse.txt"));
    CHECK(bundle.user_text.find("Data information") == std::string::npos);
    CHECK(bundle.user_text.find("API directive") == std::string::npos);
}

TEST_CASE("each variant adds exactly its own blocks")
{
    auto data = render_smoke(PromptVariant::Data).user_text;
    auto dir = render_smoke(PromptVariant::Dir).user_text;
    CHECK(data.find("Data information") != std::string::npos);
    CHECK(data.find("API directive") == std::string::npos);
    CHECK(dir.find("Data information") == std::string::npos);
    CHECK(dir.find("API directive") != std::string::npos);
}

TEST_CASE("variants degenerate when their extra information is absent")
{
    auto record = smoke_record(kMisuseId);
    record.directives.clear();
    auto full = render(PromptVariant::Full, record, record.recorded_data, {});
    auto data = render(PromptVariant::Data, record, record.recorded_data, {});
    CHECK(full.user_text == data.user_text);
    CHECK(full.system_text == data.system_text);
    CHECK(render(PromptVariant::Dir, record, {}, {}).user_text == render(PromptVariant::Base, record, {}, {}).user_text);
    CHECK(render(PromptVariant::Data, record, {}, {}).user_text == render(PromptVariant::Base, record, {}, {}).user_text);
}

TEST_CASE("data blocks are ordered by line then name")
{
    auto record = smoke_record(kMisuseId);
    DataInfo imp{{"imp", 6}, "sklearn.impute.SimpleImputer", OtherDetail{}};
    DataInfo arr{{"imp_array", 7}, "numpy.ndarray", ArrayDetail{{4, 1}, "float64"}};
    std::vector<DataInfo> infos{arr, imp, record.recorded_data[0]};
    auto text = render(PromptVariant::Data, record, infos, {}).user_text;
    auto df_at = text.find("`df` at line 4");
    auto imp_at = text.find("`imp` at line 6");
    auto arr_at = text.find("`imp_array` at line 7");
    CHECK(df_at < imp_at);
    CHECK(imp_at < arr_at);
    CHECK(text.find("Shape: (4, 1)\nDtype: float64") != std::string::npos);
}

TEST_CASE("few-shot prompt embeds both exemplars before the code")
{
    auto shots = load_exemplars(source_dir() / "assets" / "fewshot_exemplars.jsonl");
    REQUIRE(shots.size() == 2);
    auto text = render_smoke(PromptVariant::Fewshot, shots).user_text;
    auto ex1 = text.find("Example 1, using");
    auto ex2 = text.find("Example 2, using");
    auto code = text.find("Code to check:");
    CHECK(ex1 < ex2);
    CHECK(ex2 < code);
    CHECK(text.find("Expected response for example 2:\n{\"correct\":\"no\"") != std::string::npos);
    CHECK(text.find("API directive") != std::string::npos);

    CHECK(error_code_of([&] { render_smoke(PromptVariant::Fewshot); }) == ErrorCode::FewshotWithoutExemplars);
    CHECK(error_code_of([] { load_exemplars("/nonexistent/exemplars.jsonl"); }) ==
          ErrorCode::FewshotWithoutExemplars);
}

TEST_CASE("exemplar store must hold one yes and one no")
{
    const std::string yes = R"({"code":"x = 1","library":"numpy","expected_answer":{"correct":"yes"}})";
    const std::string no =
        R"({"code":"x = 1","library":"numpy","expected_answer":{"correct":"no","patch":"@@ -1 +1 @@\n-x = 1\n+x = 2\n","explanation":"e"}})";
    CHECK(parse_exemplars(yes + "\n" + no + "\n").size() == 2);
    CHECK(error_code_of([&] { parse_exemplars(yes + "\n" + yes + "\n"); }) == ErrorCode::ConfigSyntax);
    CHECK(error_code_of([&] { parse_exemplars(yes + "\n"); }) == ErrorCode::ConfigSyntax);
    const std::string bare_no = R"({"code":"x","library":"numpy","expected_answer":{"correct":"no"}})";
    CHECK(error_code_of([&] { parse_exemplars(yes + "\n" + bare_no + "\n"); }) == ErrorCode::ConfigSyntax);
}

TEST_CASE("an empty snippet cannot be rendered")
{
    auto record = smoke_record(kMisuseId);
    record.source = "  \n\n";
    CHECK(error_code_of([&] { render(PromptVariant::Base, record, {}, {}); }) == ErrorCode::EmptySnippet);
}

TEST_CASE("substitution is single-pass and strict")
{
    std::map<std::string, std::string, std::less<>> values{{"a", "$b"}, {"b", "B"}};
    std::map<std::string, std::string> applied;
    CHECK(substitute("x $a y $$a $", values, &applied) == "x $b y $a $");
    CHECK(applied == std::map<std::string, std::string>{{"$a", "$b"}});
    CHECK(error_code_of([&] { substitute("$missing", values); }) == ErrorCode::TemplateSyntax);
}

TEST_CASE("template parsing rejects malformed files")
{
    CHECK(error_code_of([] { PromptTemplate::parse("#@ section system\nhi\n"); }) == ErrorCode::TemplateSyntax);
    CHECK(error_code_of([] { PromptTemplate::parse("#@ dschecker-prompt-template v1\nstray\n"); }) ==
          ErrorCode::TemplateSyntax);
    CHECK(error_code_of([] { PromptTemplate::parse("#@ dschecker-prompt-template v1\n#@ section system\nx\n"); }) ==
          ErrorCode::TemplateSyntax);
    CHECK(PromptTemplate::builtin().version() == 1);
    CHECK(PromptTemplate::load(source_dir() / "assets" / "prompt_template.txt").section("task") ==
          PromptTemplate::builtin().section("task"));
}

TEST_CASE("agent prompt is BASE with the function-calling system message")
{
    const auto& r = smoke_record(kMisuseId);
    auto agent = render_agent_prompt(r);
    CHECK(agent.user_text == render(PromptVariant::Base, r, {}, {}).user_text);
    CHECK(agent.system_text.find("get_variable_info") != std::string::npos);
    CHECK(agent.system_text.find("get_api_documentation") != std::string::npos);
}

TEST_CASE("variant names parse case-insensitively")
{
    CHECK(prompt_variant_from_string("FULL") == PromptVariant::Full);
    CHECK(prompt_variant_from_string("fewshot") == PromptVariant::Fewshot);
    CHECK(to_string(PromptVariant::Dir) == "dir");
    CHECK(error_code_of([] { prompt_variant_from_string("everything"); }) == ErrorCode::ConfigSyntax);
}
