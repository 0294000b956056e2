#include "support.hpp"

#include "dschecker/evaluate.hpp"

using namespace test;

namespace {

EvalConfig smoke_config()
{
    return load_eval_config(smoke_dir() / "eval.json");
}

/// A configuration whose provider and executor come from the test environment.
std::string scripted_config(const std::string& extra_config = "", const std::string& second = "",
                            const std::string& variant = "full")
{
    std::string one = R"({"name": "scripted", "variant": ")" + variant +
                      R"(", "provider": {"transcripts": "unused"}, "execution": {"kind": "none"})" + extra_config + "}";
    std::string list = second.empty() ? one : one + "," + second;
    return R"({"configurations": [)" + list + R"(], "bootstrap": {"sample_size": 4, "resamples": 10}})";
}

EvalEnvironment scripted_environment(ScriptedProvider::Script script, std::shared_ptr<Executor> executor = nullptr)
{
    auto provider = std::make_shared<ScriptedProvider>(std::move(script));
    return {[provider](const ConfigurationSpec&) { return provider; },
            [executor](const ConfigurationSpec&) { return executor; }};
}

ModelTurn always_yes(const std::string&, const std::vector<ChatMessage>&, const std::vector<ToolDeclaration>&)
{
    return final_turn("{\"correct\": \"yes\"}");
}

ModelTurn always_no(const std::string&, const std::vector<ChatMessage>&, const std::vector<ToolDeclaration>&)
{
    return final_turn(Json{{"correct", "no"}, {"patch", imputer_patch()}, {"explanation", "B is dropped"}}.dump());
}

Json without(Json j, std::initializer_list<const char*> keys)
{
    for (const auto* k : keys)
        j.erase(k);
    return j;
}

}  // namespace

TEST_CASE("smoke replay detects and fixes the imputer misuse in both configurations")
{
    EvalOptions options;
    options.seed = 7;
    auto report = evaluate(smoke_dataset(), smoke_config(), options);

    CHECK(report.record_count == 2);
    CHECK(report.misuse_count == 1);
    REQUIRE(report.configurations.size() == 2);
    for (const auto& c : report.configurations) {
        CAPTURE(c.name);
        CHECK(c.adjudication_mode == AdjudicationMode::Strict);
        CHECK(c.counts == ConfusionCounts{1, 1, 1, 2});
        CHECK(c.metrics.precision == 1.0);
        CHECK(c.metrics.recall == 1.0);
        CHECK(c.metrics.f1 == 1.0);
        CHECK(c.fix_rate == 1.0);
        CHECK(c.failures == 0);
        CHECK(c.bootstrap_f1.size() == 50);
        const auto& misuse = c.records[0];
        CHECK(misuse.id == kMisuseId);
        REQUIRE(misuse.fix);
        CHECK(misuse.fix->classification == FixClass::Fixed);
        CHECK_FALSE(c.records[1].fix);
    }
    const auto& agent = report.configurations[1];
    REQUIRE(agent.records[0].calls.size() == 1);
    CHECK(agent.records[0].calls[0].relevant == true);
    CHECK(agent.records[0].model_turns == 2);
    CHECK(report.configurations[0].description == "prompt full, scripted");
    CHECK(agent.description == "agent, scripted, max 3 tool rounds");
}

TEST_CASE("reports are deterministic and only the seed-dependent sections move")
{
    EvalOptions options;
    options.seed = 7;
    const auto config = smoke_config();
    auto a = report_to_json(evaluate(smoke_dataset(), config, options)).dump(2);
    auto b = report_to_json(evaluate(smoke_dataset(), config, options)).dump(2);
    CHECK(a == b);

    options.jobs = 4;
    CHECK(report_to_json(evaluate(smoke_dataset(), config, options)).dump(2) == a);

    options.seed = 8;
    auto c = Json::parse(report_to_json(evaluate(smoke_dataset(), config, options)).dump(2));
    auto ja = Json::parse(a);
    CHECK(c["bootstrap"]["seed"] == 8);
    CHECK(without(c, {"bootstrap", "statistics"}) == without(ja, {"bootstrap", "statistics"}));
}

TEST_CASE("report JSON layout")
{
    EvalOptions options;
    options.seed = 7;
    auto j = report_to_json(evaluate(smoke_dataset(), smoke_config(), options));
    CHECK(j["format"] == "dschecker-eval-report");
    CHECK(j["version"] == 1);
    CHECK(j["dataset"]["records"] == 2);
    CHECK(j["dataset"]["subset"] == "all");
    CHECK(j["config_digest"].get<std::string>().size() == 64);
    const auto& full = j["configurations"][0];
    CHECK(full["name"] == "full");
    CHECK(full["adjudication"] == "strict");
    CHECK(full["counts"]["tp"] == 1);
    CHECK(full["counts"]["failed_records"] == 0);
    CHECK(full["records"][0]["ground_truth"] == "MISUSE");
    CHECK(full["records"][0]["fix"]["classification"] == "FIXED");
    CHECK(full["records"][0]["verdict"]["correct"] == "no");
    CHECK(full["records"][1]["verdict"]["patch"].is_null());
    CHECK(j["bootstrap"]["generator"] == "mt19937_64");
    CHECK(j["bootstrap"]["distributions"]["agent"]["f1"].size() == 50);
    CHECK(j["statistics"]["comparisons"].size() == 2);
}

TEST_CASE("report table")
{
    EvalOptions options;
    options.seed = 7;
    auto table = render_report_table(evaluate(smoke_dataset(), smoke_config(), options));
    CHECK(table.rfind("2 records, 1 misuses (subset all)", 0) == 0);
    CHECK(table.find("P is 0 when nothing is flagged; F1 is 0 when P + R = 0.") != std::string::npos);
    CHECK(table.find("Dunn's test, Bonferroni-adjusted, alpha 0.05 (50 resamples of 20, seed 7)") !=
          std::string::npos);
    // Two configurations: one comparison row per metric.
    std::size_t rows = 0;
    for (std::size_t at = table.find("full vs agent"); at != std::string::npos; at = table.find("full vs agent", at + 1))
        ++rows;
    CHECK(rows == 2);
    CHECK(table.find("100.00%") != std::string::npos);
}

TEST_CASE("a model that never flags has zero precision and F1")
{
    auto config = parse_eval_config(scripted_config(), smoke_dir());
    auto report = evaluate(smoke_dataset(), config, {}, scripted_environment(always_yes));
    const auto& c = report.configurations[0];
    CHECK(c.counts.flagged == 0);
    CHECK(c.metrics.precision == 0.0);
    CHECK(c.metrics.recall == 0.0);
    CHECK(c.metrics.f1 == 0.0);
    CHECK(c.fix_rate == 0.0);
    CHECK(c.adjudication_mode == AdjudicationMode::Raw);
    // A single configuration has nothing to compare against.
    CHECK(report.comparisons.empty());
}

TEST_CASE("flagging everything without an executor leaves fixes unattempted")
{
    auto config = parse_eval_config(scripted_config(), smoke_dir());
    auto report = evaluate(smoke_dataset(), config, {}, scripted_environment(always_no));
    const auto& c = report.configurations[0];
    CHECK(c.counts == ConfusionCounts{1, 2, 1, 2});
    CHECK(c.metrics.precision == 0.5);
    CHECK(c.records[0].fix->classification == FixClass::NotAttempted);
    CHECK(c.fixed == 0);
}

TEST_CASE("strict scoring needs an adjudication for every flagged misuse")
{
    auto config = parse_eval_config(scripted_config(R"(, "adjudication": "strict")"), smoke_dir());
    try {
        evaluate(smoke_dataset(), config, {}, scripted_environment(always_no));
        FAIL("expected MISSING_ADJUDICATION");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingAdjudication);
        CHECK(e.detail().rfind("configuration 'scripted': ", 0) == 0);
    }

    EvalOptions options;
    options.adjudication = Adjudication{{kMisuseId, false}};
    auto report = evaluate(smoke_dataset(), config, options, scripted_environment(always_no));
    CHECK(report.configurations[0].counts.tp == 0);

    options.adjudication = Adjudication{{"no-such-record", true}};
    CHECK(error_code_of([&] { evaluate(smoke_dataset(), config, options, scripted_environment(always_no)); }) ==
          ErrorCode::InvariantViolation);
}

TEST_CASE("record-level failures are outcomes, not aborts")
{
    auto config = parse_eval_config(scripted_config(), smoke_dir());
    auto report = evaluate(smoke_dataset(), config, {}, scripted_environment([](auto& id, auto&, auto&) {
                               return final_turn(id == kMisuseId ? "no idea" : "{\"correct\": \"yes\"}");
                           }));
    const auto& c = report.configurations[0];
    CHECK(c.failures == 1);
    CHECK(c.records[0].error_code == "MALFORMED_VERDICT");
    CHECK_FALSE(c.records[0].flagged());
    CHECK(c.records[1].verdict);
}

TEST_CASE("agent exhaustion keeps the partial call log")
{
    auto config = parse_eval_config(
        scripted_config(R"(, "mode": "agent", "docs": "../docs", "agent": {"max_iterations": 2})"), smoke_dir());
    auto report = evaluate(smoke_dataset(), config, {}, scripted_environment([](auto&, auto&, auto&) {
                               return call_turn({{"", "get_api_documentation", {{"api_name", "SimpleImputer"}}}});
                           }));
    for (const auto& r : report.configurations[0].records) {
        CHECK(r.error_code == "AGENT_EXHAUSTED");
        CHECK(r.calls.size() == 2);
        CHECK(r.model_turns == 3);
    }
}

TEST_CASE("fix validation runs through the configured executor")
{
    auto exec = std::make_shared<FakeExecutor>([](const ExecRequest& r) {
        return r.snippet_text.find("\"mean\"") != std::string::npos ? raw_error("IndexError: index 1 is out of bounds\n")
                                                                     : raw_ok();
    });
    auto config = parse_eval_config(scripted_config(), smoke_dir());
    auto report = evaluate(smoke_dataset(), config, {}, scripted_environment(always_no, exec));
    const auto& c = report.configurations[0];
    CHECK(c.fixed == 1);
    CHECK(c.fix_rate == 1.0);
    // The correct record was flagged too, but only misuses are validated.
    CHECK_FALSE(c.records[1].fix);
    CHECK(exec->by_mode[ExecMode::Plain] == 2);
}

TEST_CASE("DATA prompts probe when no recorded data exists")
{
    auto dataset = smoke_dataset();
    for (auto& r : dataset.records)
        r.recorded_data.clear();
    auto exec = std::make_shared<FakeExecutor>([](const ExecRequest& r) {
        Json info = smoke_record(kMisuseId).recorded_data[0];
        return r.mode == ExecMode::Probe ? raw_ok("@@PROBE " + info.dump() + "\n") : raw_ok();
    });
    std::string seen;
    auto config = parse_eval_config(scripted_config(), smoke_dir());
    evaluate(dataset, config, {}, scripted_environment([&](auto&, const auto& conv, auto&) {
                 seen = conv[1].content;
                 return final_turn("{\"correct\": \"yes\"}");
             }, exec));
    CHECK(exec->by_mode[ExecMode::Probe] == 2);
    CHECK(seen.find("The variable `df` at line 4:") != std::string::npos);
}

TEST_CASE("configuration files are checked strictly")
{
    auto parse = [](const std::string& text) { return parse_eval_config(text, smoke_dir()); };
    CHECK(error_code_of([&] { parse("{\"configurations\": []}"); }) == ErrorCode::ConfigSyntax);
    CHECK(error_code_of([&] { parse(scripted_config(R"(, "colour": "blue")")); }) == ErrorCode::ConfigSyntax);
    CHECK(error_code_of([&] { parse(scripted_config(R"(, "mode": "oracle")")); }) == ErrorCode::ConfigSyntax);
    CHECK(error_code_of([&] { parse(scripted_config(R"(, "agent": {"max_iterations": 0})")); }) ==
          ErrorCode::ConfigSyntax);
    CHECK(error_code_of([&] { parse(scripted_config("", R"({"name": "scripted", "provider": {"transcripts": "x"}})")); }) ==
          ErrorCode::ConfigSyntax);
    CHECK(error_code_of([&] { parse("not json"); }) == ErrorCode::ConfigSyntax);
    CHECK(error_code_of([] { load_eval_config("/nonexistent/eval.json"); }) == ErrorCode::MissingFile);

    auto config = parse(scripted_config(R"(, "docs": "../docs")"));
    CHECK(config.configurations[0].docs == smoke_dir() / "../docs");
    CHECK(config.bootstrap.sample_size == 4);
    CHECK(config.digest == parse(scripted_config(R"(, "docs": "../docs")")).digest);
    CHECK(config.digest != parse(scripted_config()).digest);
}

TEST_CASE("configuration problems abort before any model call")
{
    int calls = 0;
    auto counting = [&](auto&, auto&, auto&) {
        ++calls;
        return final_turn("{\"correct\": \"yes\"}");
    };
    SUBCASE("few-shot without exemplars")
    {
        auto config = parse_eval_config(scripted_config("", "", "fewshot"), smoke_dir());
        CHECK(error_code_of([&] { evaluate(smoke_dataset(), config, {}, scripted_environment(counting)); }) ==
              ErrorCode::FewshotWithoutExemplars);
    }
    SUBCASE("documentation index without the record's library")
    {
        TempDir docs;
        docs.write("np.md", "numpy docs");
        docs.write("index.json", R"([{"library": "numpy", "api": "numpy.stack", "file": "np.md"}])");
        auto config = parse_eval_config(scripted_config(R"(, "docs": ")" + docs.path().string() + "\""), smoke_dir());
        CHECK(error_code_of([&] { evaluate(smoke_dataset(), config, {}, scripted_environment(counting)); }) ==
              ErrorCode::UnknownLibrary);
    }
    CHECK(calls == 0);
}

TEST_CASE("subsets select records and reject empty selections")
{
    CHECK(select_subset(smoke_dataset(), Subset::WithDirective).records.size() == 2);
    CHECK(select_subset(smoke_dataset(), Subset::DataDependent).records.size() == 2);
    CHECK(subset_from_string("with_directive") == Subset::WithDirective);
    CHECK(error_code_of([] { subset_from_string("some"); }) == ErrorCode::ConfigSyntax);

    auto dataset = smoke_dataset();
    for (auto& r : dataset.records)
        r.directives.clear();
    auto config = parse_eval_config(scripted_config(), smoke_dir());
    config.subset = Subset::WithDirective;
    CHECK(error_code_of([&] { evaluate(dataset, config, {}, scripted_environment(always_yes)); }) ==
          ErrorCode::EmptyDataset);
}
