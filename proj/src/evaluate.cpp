#include "dschecker/evaluate.hpp"

#include "dschecker/error.hpp"
#include "dschecker/hashing.hpp"
#include "dschecker/http_provider.hpp"
#include "dschecker/verdict.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

namespace dschecker {

namespace fs = std::filesystem;

namespace {

bool wants_data(PromptVariant v)
{
    return v == PromptVariant::Data || v == PromptVariant::Full || v == PromptVariant::Fewshot;
}

std::string lower(std::string_view text)
{
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

const PromptTemplate& template_of(const Detector& detector)
{
    return detector.prompt_template ? *detector.prompt_template : PromptTemplate::builtin();
}

void record_failure(RecordOutcome& out, const Error& e)
{
    if (out.error_code)
        return;
    out.error_code = std::string(to_string(e.code()));
    out.error_detail = e.detail();
}

}  // namespace

std::string_view to_string(DetectorMode mode)
{
    return mode == DetectorMode::Agent ? "agent" : "prompt";
}

std::string_view to_string(DataSource source)
{
    switch (source) {
    case DataSource::Auto: return "auto";
    case DataSource::Recorded: return "recorded";
    case DataSource::Probe: return "probe";
    }
    return "auto";
}

std::string_view to_string(Subset subset)
{
    switch (subset) {
    case Subset::All: return "all";
    case Subset::WithDirective: return "with_directive";
    case Subset::DataDependent: return "data_dependent";
    }
    return "all";
}

Subset subset_from_string(std::string_view text)
{
    const auto s = lower(text);
    if (s == "all")
        return Subset::All;
    if (s == "with_directive")
        return Subset::WithDirective;
    if (s == "data_dependent")
        return Subset::DataDependent;
    fail(ErrorCode::ConfigSyntax, fmt::format("unknown subset '{}' (all, with_directive, data_dependent)", text));
}

Dataset select_subset(const Dataset& dataset, Subset subset)
{
    Dataset out;
    out.root = dataset.root;
    for (const auto& r : dataset.records) {
        const bool keep = subset == Subset::All || (subset == Subset::WithDirective && !r.directives.empty()) ||
                          (subset == Subset::DataDependent && r.data_dependent);
        if (keep)
            out.records.push_back(r);
    }
    return out;
}

std::vector<DataInfo> prompt_data(const SnippetRecord& record, const fs::path& root, const Detector& detector)
{
    if (!wants_data(detector.variant) || record.probe_targets.empty())
        return {};
    if (detector.data_source != DataSource::Probe && !record.recorded_data.empty())
        return record.recorded_data;
    if (detector.data_source == DataSource::Recorded)
        return {};
    if (!detector.executor)
        fail(ErrorCode::InvariantViolation,
             fmt::format("record '{}': the {} prompt needs runtime data but no executor is configured", record.id,
                         to_string(detector.variant)));
    return collect_data_info(*detector.executor, record, root, record.probe_targets, detector.timeout);
}

Detection detect(const SnippetRecord& record, const fs::path& root, const Detector& detector)
{
    if (!detector.gateway)
        fail(ErrorCode::InvariantViolation, "detector has no model gateway");
    Detection out;
    if (detector.mode == DetectorMode::Agent) {
        ToolContext context{record, root, detector.index.get(), detector.executor.get(), detector.agent.tool_timeout};
        auto config = detector.agent;
        config.params = detector.params;
        auto run = run_agent(context, *detector.gateway, config, template_of(detector));
        out.verdict = run.verdict;
        out.agent_run = std::move(run);
        return out;
    }

    out.data = prompt_data(record, root, detector);
    auto bundle = render(detector.variant, record, out.data, detector.exemplars, template_of(detector));
    const std::vector<ChatMessage> conversation{ChatMessage::system(bundle.system_text),
                                                ChatMessage::user(bundle.user_text)};
    ModelTurn turn;
    try {
        turn = detector.gateway->complete(record.id, conversation, {}, detector.params);
    } catch (const MalformedToolCallError&) {
        fail(ErrorCode::MalformedVerdict,
             fmt::format("record '{}': the model called a function although none was offered", record.id));
    }
    if (!turn.is_final())
        fail(ErrorCode::MalformedVerdict,
             fmt::format("record '{}': the model called a function although none was offered", record.id));
    out.verdict = parse_verdict(*turn.final_text);
    return out;
}

RecordOutcome evaluate_record(const SnippetRecord& record, const fs::path& root, const Detector& detector)
{
    RecordOutcome out;
    out.id = record.id;
    out.is_misuse = record.is_misuse();
    try {
        auto detection = detect(record, root, detector);
        out.verdict = std::move(detection.verdict);
        if (detection.agent_run) {
            out.calls = detection.agent_run->log;
            out.model_turns = detection.agent_run->model_turns;
        } else {
            out.model_turns = 1;
        }
    } catch (const AgentFailure& e) {
        out.calls = e.partial().log;
        out.model_turns = e.partial().model_turns;
        record_failure(out, e);
        return out;
    } catch (const Error& e) {
        record_failure(out, e);
        return out;
    }

    if (!out.is_misuse || !out.flagged())
        return out;
    if (!out.verdict->patch) {
        out.fix = FixOutcome{FixClass::NotAttempted, "the verdict carries no patch"};
        return out;
    }
    if (!detector.executor) {
        out.fix = FixOutcome{FixClass::NotAttempted, "no executor configured for fix validation"};
        return out;
    }
    try {
        out.fix = validate_fix(*detector.executor, record, root, *out.verdict->patch, detector.patch_fuzz,
                               detector.timeout)
                      .outcome;
    } catch (const Error& e) {
        record_failure(out, e);
    }
    return out;
}

namespace {

fs::path resolve_path(const fs::path& base, const std::string& text)
{
    fs::path p(text);
    return p.is_absolute() ? p : base / p;
}

std::optional<fs::path> optional_path(const Json& j, const char* key, const fs::path& base)
{
    if (!j.contains(key) || j.at(key).is_null())
        return std::nullopt;
    return resolve_path(base, j.at(key).get<std::string>());
}

void require_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view where)
{
    if (!j.is_object())
        fail(ErrorCode::ConfigSyntax, fmt::format("{} must be a JSON object", where));
    for (const auto& [key, value] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            fail(ErrorCode::ConfigSyntax, fmt::format("{}: unknown key '{}'", where, key));
}

ConfigurationSpec parse_configuration(const Json& j, const fs::path& base)
{
    require_keys(j,
                 {"name", "mode", "variant", "model", "provider", "execution", "docs", "exemplars", "template",
                  "agent", "data_source", "adjudications", "adjudication"},
                 "configuration");
    ConfigurationSpec c;
    c.name = j.at("name").get<std::string>();
    if (c.name.empty())
        fail(ErrorCode::ConfigSyntax, "configuration name must not be empty");
    const std::string where = fmt::format("configuration '{}'", c.name);

    const auto mode = lower(j.value("mode", std::string("prompt")));
    if (mode == "prompt")
        c.mode = DetectorMode::Prompt;
    else if (mode == "agent")
        c.mode = DetectorMode::Agent;
    else
        fail(ErrorCode::ConfigSyntax, fmt::format("{}: mode must be prompt or agent", where));
    c.variant = prompt_variant_from_string(j.value("variant", std::string("base")));
    if (j.contains("model"))
        c.params = j.at("model").get<GenerationParams>();
    c.params.validate();

    const auto source = lower(j.value("data_source", std::string("auto")));
    if (source == "auto")
        c.data_source = DataSource::Auto;
    else if (source == "recorded")
        c.data_source = DataSource::Recorded;
    else if (source == "probe")
        c.data_source = DataSource::Probe;
    else
        fail(ErrorCode::ConfigSyntax, fmt::format("{}: data_source must be auto, recorded or probe", where));

    const Json provider = j.value("provider", Json::object());
    require_keys(provider, {"kind", "transcripts", "api_base", "record"}, where + " provider");
    c.provider.kind = provider.value("kind", std::string("replay"));
    if (c.provider.kind == "replay") {
        if (!provider.contains("transcripts"))
            fail(ErrorCode::ConfigSyntax, fmt::format("{}: a replay provider needs 'transcripts'", where));
        c.provider.transcripts = resolve_path(base, provider.at("transcripts").get<std::string>());
    } else if (c.provider.kind == "http") {
        if (provider.contains("api_base"))
            c.provider.api_base = provider.at("api_base").get<std::string>();
        c.provider.record_dir = optional_path(provider, "record", base);
    } else {
        fail(ErrorCode::ConfigSyntax, fmt::format("{}: provider kind must be replay or http", where));
    }

    const Json execution = j.value("execution", Json::object());
    require_keys(execution, {"kind", "transcript", "interpreter", "shim"}, where + " execution");
    c.execution.kind = execution.value("kind", std::string("live"));
    if (c.execution.kind != "live" && c.execution.kind != "replay" && c.execution.kind != "none")
        fail(ErrorCode::ConfigSyntax, fmt::format("{}: execution kind must be live, replay or none", where));
    if (auto t = optional_path(execution, "transcript", base))
        c.execution.transcript = *t;
    if (c.execution.kind == "replay" && c.execution.transcript.empty())
        fail(ErrorCode::ConfigSyntax, fmt::format("{}: replayed execution needs 'transcript'", where));
    if (execution.contains("interpreter"))
        c.execution.interpreter = execution.at("interpreter").get<std::string>();
    c.execution.shim = optional_path(execution, "shim", base);

    c.docs = optional_path(j, "docs", base);
    c.exemplars = optional_path(j, "exemplars", base);
    c.prompt_template = optional_path(j, "template", base);
    c.adjudications = optional_path(j, "adjudications", base);
    if (j.contains("adjudication"))
        c.adjudication_mode = adjudication_mode_from_string(j.at("adjudication").get<std::string>());

    const Json agent = j.value("agent", Json::object());
    require_keys(agent, {"max_iterations", "allow_unlimited_calls"}, where + " agent");
    c.max_iterations = agent.value("max_iterations", 8);
    c.allow_unlimited_calls = agent.value("allow_unlimited_calls", true);
    if (c.max_iterations < 1)
        fail(ErrorCode::ConfigSyntax, fmt::format("{}: max_iterations must be at least 1", where));
    return c;
}

}  // namespace

EvalConfig parse_eval_config(std::string_view text, const fs::path& base_dir)
{
    EvalConfig config;
    try {
        const auto j = Json::parse(text);
        require_keys(j, {"configurations", "bootstrap", "subset", "patch_fuzz", "timeout_ms"}, "evaluation file");
        const auto& list = j.at("configurations");
        if (!list.is_array() || list.empty())
            fail(ErrorCode::ConfigSyntax, "'configurations' must be a non-empty array");
        std::set<std::string> names;
        for (const auto& item : list) {
            auto c = parse_configuration(item, base_dir);
            if (!names.insert(c.name).second)
                fail(ErrorCode::ConfigSyntax, fmt::format("configuration name '{}' used twice", c.name));
            config.configurations.push_back(std::move(c));
        }
        const Json boot = j.value("bootstrap", Json::object());
        require_keys(boot, {"sample_size", "resamples", "with_replacement"}, "bootstrap");
        config.bootstrap.sample_size = boot.value("sample_size", config.bootstrap.sample_size);
        config.bootstrap.resamples = boot.value("resamples", config.bootstrap.resamples);
        config.bootstrap.with_replacement = boot.value("with_replacement", true);
        config.subset = subset_from_string(j.value("subset", std::string("all")));
        config.patch_fuzz = j.value("patch_fuzz", 3);
        if (config.patch_fuzz < 0)
            fail(ErrorCode::ConfigSyntax, "patch_fuzz must not be negative");
        const auto timeout = j.value("timeout_ms", static_cast<std::int64_t>(kDefaultTimeout.count()));
        if (timeout <= 0)
            fail(ErrorCode::ConfigSyntax, "timeout_ms must be positive");
        config.timeout = std::chrono::milliseconds(timeout);
        config.digest = sha256_hex(j.dump());
    } catch (const Json::exception& e) {
        fail(ErrorCode::ConfigSyntax, fmt::format("evaluation file: {}", e.what()));
    }
    return config;
}

EvalConfig load_eval_config(const fs::path& path)
{
    if (!fs::is_regular_file(path))
        fail(ErrorCode::MissingFile, fmt::format("evaluation file '{}' not found", path.string()));
    return parse_eval_config(read_text_file(path), path.parent_path());
}

EvalEnvironment default_environment()
{
    EvalEnvironment env;
    env.make_provider = [](const ConfigurationSpec& spec) -> std::shared_ptr<ChatProvider> {
        if (spec.provider.kind == "replay")
            return ReplayProvider::from_path(spec.provider.transcripts);
        auto options = http_options_from_env();
        if (spec.provider.api_base)
            options.api_base = *spec.provider.api_base;
        std::shared_ptr<ChatProvider> http = std::make_shared<HttpProvider>(options);
        if (spec.provider.record_dir)
            return std::make_shared<RecordingProvider>(http);
        return http;
    };
    env.make_executor = [](const ConfigurationSpec& spec) -> std::shared_ptr<Executor> {
        if (spec.execution.kind == "none")
            return nullptr;
        if (spec.execution.kind == "replay")
            return std::make_shared<ReplayExecutor>(ExecTranscript::load(spec.execution.transcript));
        auto options = live_options_from_env();
        if (spec.execution.interpreter)
            options.interpreter = *spec.execution.interpreter;
        if (spec.execution.shim)
            options.shim = *spec.execution.shim;
        std::shared_ptr<Executor> live = std::make_shared<LiveExecutor>(options);
        if (!spec.execution.transcript.empty())
            return std::make_shared<RecordingExecutor>(live);
        return live;
    };
    return env;
}

namespace {

struct PreparedConfiguration {
    const ConfigurationSpec* spec = nullptr;
    Detector detector;
    std::shared_ptr<ChatProvider> provider;
};

PreparedConfiguration prepare(const ConfigurationSpec& spec, const EvalConfig& config, const Dataset& dataset,
                              const EvalEnvironment& env)
{
    PreparedConfiguration p;
    p.spec = &spec;
    auto& d = p.detector;
    d.mode = spec.mode;
    d.variant = spec.variant;
    d.params = spec.params;
    d.agent.max_iterations = spec.max_iterations;
    d.agent.allow_unlimited_calls = spec.allow_unlimited_calls;
    d.agent.tool_timeout = config.timeout;
    d.data_source = spec.data_source;
    d.timeout = config.timeout;
    d.patch_fuzz = config.patch_fuzz;
    if (spec.prompt_template)
        d.prompt_template = std::make_shared<PromptTemplate>(PromptTemplate::load(*spec.prompt_template));
    if (spec.docs) {
        auto index = std::make_shared<DocIndex>(DocIndex::load(*spec.docs));
        for (const auto& r : dataset.records)
            if (!index->knows_library(r.library))
                fail(ErrorCode::UnknownLibrary,
                     fmt::format("configuration '{}': record '{}' uses library '{}', which the documentation "
                                 "index does not cover",
                                 spec.name, r.id, r.library));
        d.index = std::move(index);
    }
    if (spec.mode == DetectorMode::Prompt && spec.variant == PromptVariant::Fewshot) {
        if (!spec.exemplars)
            fail(ErrorCode::FewshotWithoutExemplars,
                 fmt::format("configuration '{}': the few-shot variant needs 'exemplars'", spec.name));
        d.exemplars = load_exemplars(*spec.exemplars);
    }
    p.provider = env.make_provider(spec);
    d.gateway = std::make_shared<Gateway>(p.provider);
    d.executor = env.make_executor(spec);
    return p;
}

std::string describe(const ConfigurationSpec& spec)
{
    const auto model = spec.params.model_name.empty() ? std::string("unnamed model") : spec.params.model_name;
    if (spec.mode == DetectorMode::Agent)
        return fmt::format("agent, {}, max {} tool rounds", model, spec.max_iterations);
    return fmt::format("prompt {}, {}", to_string(spec.variant), model);
}

Json verdict_json(const Verdict& v)
{
    Json j{{"correct", std::string(to_string(v.correct))}};
    j["patch"] = v.patch ? Json(*v.patch) : Json(nullptr);
    j["explanation"] = v.explanation ? Json(*v.explanation) : Json(nullptr);
    return j;
}

Json outcome_json(const RecordOutcome& o)
{
    Json j{{"id", o.id},
           {"ground_truth", std::string(to_string(o.is_misuse ? GroundTruth::Misuse : GroundTruth::Correct))},
           {"flagged", o.flagged()},
           {"model_turns", o.model_turns}};
    j["verdict"] = o.verdict ? verdict_json(*o.verdict) : Json(nullptr);
    j["fix"] = o.fix ? Json{{"classification", std::string(to_string(o.fix->classification))},
                            {"evidence", o.fix->evidence}}
                     : Json(nullptr);
    j["error"] = o.error_code ? Json{{"code", *o.error_code}, {"detail", o.error_detail.value_or("")}}
                              : Json(nullptr);
    j["function_calls"] = call_log_json(o.calls);
    return j;
}

std::string percent(double v)
{
    return fmt::format("{:.2f}%", v * 100.0);
}

}  // namespace

EvalReport evaluate(const Dataset& full_dataset, const EvalConfig& config, const EvalOptions& options,
                    const EvalEnvironment& environment)
{
    const Dataset dataset = select_subset(full_dataset, config.subset);
    if (dataset.records.empty())
        fail(ErrorCode::EmptyDataset, fmt::format("no records in subset '{}'", to_string(config.subset)));
    if (dataset.misuse_count() == 0)
        fail(ErrorCode::EmptyDataset, fmt::format("subset '{}' has no misuses", to_string(config.subset)));

    std::vector<PreparedConfiguration> prepared;
    for (const auto& spec : config.configurations)
        prepared.push_back(prepare(spec, config, dataset, environment));

    // Per-record work: (configuration, record) pairs, results stored by index.
    const std::size_t n = dataset.records.size();
    std::vector<RecordOutcome> outcomes(prepared.size() * n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t k = next++; k < outcomes.size(); k = next++) {
            try {
                outcomes[k] = evaluate_record(dataset.records[k % n], dataset.root, prepared[k / n].detector);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };
    const std::size_t jobs = std::clamp<std::size_t>(options.jobs, 1, outcomes.size());
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t t = 0; t < jobs; ++t)
            threads.emplace_back(worker);
        for (auto& t : threads)
            t.join();
    }
    if (failure)
        std::rethrow_exception(failure);

    for (auto& p : prepared) {
        if (auto* recording = dynamic_cast<RecordingProvider*>(p.provider.get()); recording && p.spec->provider.record_dir)
            recording->save(*p.spec->provider.record_dir);
        if (auto* recording = dynamic_cast<RecordingExecutor*>(p.detector.executor.get()))
            recording->transcript().save(p.spec->execution.transcript);
    }

    EvalReport report;
    report.config_digest = config.digest;
    report.dataset_digest = sha256_hex(serialize_dataset(full_dataset));
    report.subset = config.subset;
    report.record_count = n;
    report.misuse_count = dataset.misuse_count();
    report.seed = options.seed;
    report.bootstrap = config.bootstrap;

    for (std::size_t c = 0; c < prepared.size(); ++c) {
        const auto& spec = *prepared[c].spec;
        ConfigurationResult result;
        result.name = spec.name;
        result.description = describe(spec);
        result.records.assign(std::make_move_iterator(outcomes.begin() + static_cast<std::ptrdiff_t>(c * n)),
                              std::make_move_iterator(outcomes.begin() + static_cast<std::ptrdiff_t>((c + 1) * n)));

        std::optional<Adjudication> adjudication;
        if (spec.adjudications)
            adjudication = load_adjudication(*spec.adjudications);
        else if (options.adjudication)
            adjudication = options.adjudication;
        result.adjudication_mode = options.adjudication_mode.value_or(
            spec.adjudication_mode.value_or(adjudication ? AdjudicationMode::Strict : AdjudicationMode::Raw));
        if (adjudication) {
            // Ids must exist in the dataset; entries outside the subset are dropped.
            Adjudication in_subset;
            for (const auto& [id, valid] : *adjudication) {
                if (!full_dataset.find(id))
                    fail(ErrorCode::InvariantViolation,
                         fmt::format("configuration '{}': adjudication names unknown record '{}'", spec.name, id));
                if (dataset.find(id))
                    in_subset.emplace(id, valid);
            }
            adjudication = std::move(in_subset);
        }

        std::vector<DetectionOutcome> detections;
        for (const auto& o : result.records) {
            detections.push_back({o.id, o.flagged()});
            result.fixed += o.is_misuse && o.fixed();
            result.failures += o.error_code.has_value();
        }
        try {
            result.counts = adjudicated_counts(detections, dataset, adjudication ? &*adjudication : nullptr,
                                               result.adjudication_mode);
        } catch (const Error& e) {
            fail(e.code(), fmt::format("configuration '{}': {}", spec.name, e.detail()));
        }
        result.metrics = detection_metrics(result.counts);
        result.fix_rate = fix_rate(result.fixed, result.counts.total_misuses);

        std::vector<RecordScore> scores;
        for (const auto& o : result.records) {
            RecordScore s;
            s.is_misuse = o.is_misuse;
            s.flagged = o.flagged();
            s.true_positive = s.flagged && s.is_misuse &&
                              (result.adjudication_mode == AdjudicationMode::Raw || adjudication->at(o.id));
            s.fixed = o.is_misuse && o.fixed();
            scores.push_back(s);
        }
        auto vectors = bootstrap(scores, config.bootstrap, options.seed, {sample_f1, sample_fix_rate});
        result.bootstrap_f1 = std::move(vectors[0]);
        result.bootstrap_fix_rate = std::move(vectors[1]);
        report.configurations.push_back(std::move(result));
    }

    const std::pair<const char*, std::vector<double> ConfigurationResult::*> metrics[] = {
        {"f1", &ConfigurationResult::bootstrap_f1},
        {"fix_rate", &ConfigurationResult::bootstrap_fix_rate},
    };
    for (const auto& r : report.configurations) {
        for (const auto& [metric, member] : metrics) {
            NormalityCheck check{r.name, metric, std::nullopt, {}};
            try {
                check.result = shapiro_wilk(r.*member);
            } catch (const Error& e) {
                check.error = e.what();
            }
            report.normality.push_back(std::move(check));
        }
    }
    if (report.configurations.size() >= 2) {
        for (const auto& [metric, member] : metrics) {
            std::vector<std::vector<double>> groups;
            for (const auto& r : report.configurations)
                groups.push_back(r.*member);
            try {
                for (const auto& t : dunn_test(groups))
                    report.comparisons.push_back(
                        {metric, report.configurations[t.i].name, report.configurations[t.j].name, t});
            } catch (const Error& e) {
                report.comparison_errors.push_back(fmt::format("{}: {}", metric, e.what()));
            }
        }
    }
    return report;
}

Json report_to_json(const EvalReport& report)
{
    Json configurations = Json::array();
    Json bootstrap_vectors = Json::object();
    for (const auto& r : report.configurations) {
        Json records = Json::array();
        for (const auto& o : r.records)
            records.push_back(outcome_json(o));
        configurations.push_back({
            {"name", r.name},
            {"description", r.description},
            {"adjudication", std::string(to_string(r.adjudication_mode))},
            {"counts",
             {{"tp", r.counts.tp},
              {"flagged", r.counts.flagged},
              {"total_misuses", r.counts.total_misuses},
              {"total_records", r.counts.total_records},
              {"fixed", r.fixed},
              {"failed_records", r.failures}}},
            {"precision", r.metrics.precision},
            {"recall", r.metrics.recall},
            {"f1", r.metrics.f1},
            {"fix_rate", r.fix_rate},
            {"records", std::move(records)},
        });
        bootstrap_vectors[r.name] = {{"f1", r.bootstrap_f1}, {"fix_rate", r.bootstrap_fix_rate}};
    }

    Json normality = Json::array();
    for (const auto& n : report.normality) {
        Json item{{"configuration", n.configuration}, {"metric", n.metric}};
        if (n.result) {
            item["w"] = n.result->w;
            item["p"] = n.result->p;
            item["normal"] = n.result->p >= kSignificanceLevel;
        } else {
            item["error"] = n.error;
        }
        normality.push_back(std::move(item));
    }
    Json comparisons = Json::array();
    for (const auto& c : report.comparisons)
        comparisons.push_back({{"metric", c.metric},
                               {"first", c.first},
                               {"second", c.second},
                               {"z", c.test.z},
                               {"p_raw", c.test.p_raw},
                               {"p_adjusted", c.test.p_adjusted},
                               {"significant", c.test.significant}});

    return Json{
        {"format", "dschecker-eval-report"},
        {"version", 1},
        {"config_digest", report.config_digest},
        {"dataset",
         {{"digest", report.dataset_digest},
          {"subset", std::string(to_string(report.subset))},
          {"records", report.record_count},
          {"misuses", report.misuse_count}}},
        {"conventions",
         {{"precision_when_nothing_flagged", 0},
          {"f1_when_precision_and_recall_are_zero", 0},
          {"recall_denominator", "misuses in the evaluated records"},
          {"fix_rate_denominator", "misuses in the evaluated records"}}},
        {"configurations", std::move(configurations)},
        {"bootstrap",
         {{"seed", report.seed},
          {"generator", "mt19937_64"},
          {"sample_size", report.bootstrap.sample_size},
          {"resamples", report.bootstrap.resamples},
          {"with_replacement", report.bootstrap.with_replacement},
          {"distributions", std::move(bootstrap_vectors)}}},
        {"statistics",
         {{"alpha", kSignificanceLevel},
          {"normality", std::move(normality)},
          {"comparisons", std::move(comparisons)},
          {"comparison_errors", report.comparison_errors}}},
    };
}

std::string render_report_table(const EvalReport& report)
{
    std::size_t width = std::string_view("configuration").size();
    for (const auto& r : report.configurations)
        width = std::max(width, r.name.size());

    std::string out = fmt::format("{} records, {} misuses (subset {})\n\n", report.record_count,
                                  report.misuse_count, to_string(report.subset));
    out += fmt::format("{:<8}  {:<{}}  {:>8}  {}\n", "metric", "configuration", width, "value", "counts");
    auto metric_value = [](const ConfigurationResult& r, std::string_view label) {
        if (label == "P")
            return r.metrics.precision;
        if (label == "R")
            return r.metrics.recall;
        if (label == "F1")
            return r.metrics.f1;
        return r.fix_rate;
    };
    auto metric_counts = [](const ConfigurationResult& r, std::string_view label) {
        if (label == "P")
            return fmt::format("{}/{}", r.counts.tp, r.counts.flagged);
        if (label == "R")
            return fmt::format("{}/{}", r.counts.tp, r.counts.total_misuses);
        if (label == "F1")
            return std::string();
        return fmt::format("{}/{}", r.fixed, r.counts.total_misuses);
    };
    for (std::string_view label : {"P", "R", "F1", "Fix"}) {
        bool first = true;
        for (const auto& r : report.configurations) {
            out += fmt::format("{:<8}  {:<{}}  {:>8}  {}", first ? label : "", r.name, width,
                               percent(metric_value(r, label)), metric_counts(r, label));
            while (!out.empty() && out.back() == ' ')
                out.pop_back();
            out += '\n';
            first = false;
        }
    }
    out += "\nP is 0 when nothing is flagged; F1 is 0 when P + R = 0.\n";

    for (const auto& r : report.configurations)
        if (r.failures)
            out += fmt::format("{}: {} record(s) failed; see the report file\n", r.name, r.failures);

    if (!report.comparisons.empty() || !report.comparison_errors.empty()) {
        out += fmt::format("\nDunn's test, Bonferroni-adjusted, alpha {} ({} resamples of {}, seed {})\n",
                           kSignificanceLevel, report.bootstrap.resamples, report.bootstrap.sample_size,
                           report.seed);
        for (const auto& c : report.comparisons)
            out += fmt::format("{:<8}  {} vs {}: z = {:.4f}, p = {:.4g}, adjusted p = {:.4g}{}\n", c.metric, c.first,
                               c.second, c.test.z, c.test.p_raw, c.test.p_adjusted,
                               c.test.significant ? ", significant" : "");
        for (const auto& e : report.comparison_errors)
            out += fmt::format("not computed: {}\n", e);
    }
    return out;
}

}  // namespace dschecker
