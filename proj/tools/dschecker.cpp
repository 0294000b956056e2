// Command-line front end: check, fix, agent, eval and probe.
//
// Exit status: 0 no misuse / FIXED, 10 misuse flagged, 11 STILL_BROKEN,
// 12 NEW_ERROR, 13 fix not attempted, 2 usage; library failures map through
// dschecker::exit_code (20-29).

#include "dschecker/agent.hpp"
#include "dschecker/dataset.hpp"
#include "dschecker/docindex.hpp"
#include "dschecker/error.hpp"
#include "dschecker/evaluate.hpp"
#include "dschecker/gateway.hpp"
#include "dschecker/http_provider.hpp"
#include "dschecker/patch.hpp"
#include "dschecker/prompt.hpp"
#include "dschecker/runtime.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>

namespace fs = std::filesystem;
using namespace dschecker;

namespace {

// CLI11 prints help or the usage error; everything but --help is exit status 2.
int usage_exit(const CLI::App& app, const CLI::ParseError& e)
{
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
}

constexpr int kExitFlagged = 10;
constexpr int kExitStillBroken = 11;
constexpr int kExitNewError = 12;
constexpr int kExitNotAttempted = 13;

std::string env_or(const char* name, std::string fallback)
{
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : std::move(fallback);
}

void write_file(const fs::path& path, std::string_view text)
{
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out)
        fail(ErrorCode::WorkspaceIo, fmt::format("cannot write '{}'", path.string()));
}

struct RecordFlags {
    std::string dataset;
    std::string record_id;
    std::string snippet;
    std::string library;
    std::string api;
    std::vector<std::string> data_files;
    std::vector<std::string> probes;  // name@line
    std::vector<std::string> directives;
    std::string expect_error;
    std::string expect_stdout;
    std::string docs;

    void add_to(CLI::App* cmd)
    {
        cmd->add_option("--dataset", dataset, "Dataset manifest (JSON lines)");
        cmd->add_option("--dataset-record", record_id, "Record id within --dataset");
        cmd->add_option("--snippet", snippet, "Python snippet to judge");
        cmd->add_option("--library", library, "Library the snippet uses (with --snippet)");
        cmd->add_option("--api", api, "Potentially misused API (with --snippet)");
        cmd->add_option("--data-file", data_files, "Data file the snippet reads (repeatable)");
        cmd->add_option("--probe", probes, "Probe target NAME@LINE (repeatable)");
        cmd->add_option("--directive", directives, "API directive text (repeatable)");
        cmd->add_option("--expect-error", expect_error, "Exception class the misuse raises (for --validate)");
        cmd->add_option("--expect-stdout", expect_stdout, "Text a fixed program prints (for --validate)");
        cmd->add_option("--docs", docs, "Documentation index directory");
    }
};

ProbeTarget parse_probe(const std::string& text)
{
    const auto at = text.rfind('@');
    if (at == std::string::npos || at == 0)
        throw CLI::ValidationError("--probe", fmt::format("'{}' is not NAME@LINE", text));
    try {
        return {text.substr(0, at), std::stoi(text.substr(at + 1))};
    } catch (const std::exception&) {
        throw CLI::ValidationError("--probe", fmt::format("'{}' has no valid line number", text));
    }
}

struct LoadedRecord {
    SnippetRecord record;
    fs::path root;
    std::shared_ptr<const DocIndex> index;
};

LoadedRecord load_record(const RecordFlags& f)
{
    LoadedRecord out;
    if (!f.docs.empty())
        out.index = std::make_shared<DocIndex>(DocIndex::load(f.docs));

    if (!f.dataset.empty()) {
        if (f.record_id.empty())
            throw CLI::ValidationError("--dataset-record", "required with --dataset");
        auto dataset = load_dataset(f.dataset);
        const auto* r = dataset.find(f.record_id);
        if (!r)
            fail(ErrorCode::InvariantViolation, fmt::format("no record '{}' in '{}'", f.record_id, f.dataset));
        out.record = *r;
        out.root = dataset.root;
    } else {
        if (f.snippet.empty())
            throw CLI::ValidationError("--snippet", "give --snippet or --dataset with --dataset-record");
        if (f.library.empty())
            throw CLI::ValidationError("--library", "required with --snippet");
        auto& r = out.record;
        r.id = fs::path(f.snippet).stem().string();
        r.library = f.library;
        r.target_api = f.api.empty() ? f.library : f.api;
        r.snippet_path = f.snippet;
        r.source = read_text_file(f.snippet);
        r.data_files = f.data_files;
        for (const auto& p : f.probes)
            r.probe_targets.push_back(parse_probe(p));
        for (const auto& d : f.directives)
            r.directives.push_back({r.target_api, d, std::nullopt, std::nullopt});
        if (r.directives.empty() && out.index && !f.api.empty())
            r.directives = out.index->directives_for(f.api);
        if (!f.expect_error.empty())
            r.expectation.error_signature = ErrorSignature{f.expect_error, std::nullopt};
        if (!f.expect_stdout.empty())
            r.expectation.output_check = OutputCheck{OutputCheckMode::StdoutContains, f.expect_stdout};
        r.ground_truth = r.expectation.empty() ? GroundTruth::Correct : GroundTruth::Misuse;
        out.root = fs::current_path();
    }
    if (out.index && !out.index->knows_library(out.record.library))
        fail(ErrorCode::UnknownLibrary,
             fmt::format("library '{}' is not covered by the documentation index", out.record.library));
    return out;
}

struct ModelFlags {
    std::string model = env_or("DSCHECKER_MODEL", "");
    double temperature = 0.0;
    int max_tokens = 2048;
    std::string api_base;
    std::string replay;
    std::string record_dir;

    void add_to(CLI::App* cmd)
    {
        cmd->add_option("--model", model, "Model name (default $DSCHECKER_MODEL)");
        cmd->add_option("--temperature", temperature, "Sampling temperature");
        cmd->add_option("--max-tokens", max_tokens, "Output token limit");
        cmd->add_option("--api-base", api_base, "OpenAI-compatible API base (default $DSCHECKER_API_BASE)");
        auto* replay_opt = cmd->add_option("--replay", replay, "Chat transcript file or directory to replay");
        cmd->add_option("--record", record_dir, "Directory to save chat transcripts in")->excludes(replay_opt);
    }

    GenerationParams params() const
    {
        GenerationParams p{model, temperature, max_tokens};
        p.validate();
        return p;
    }
};

struct ExecFlags {
    std::string interpreter;
    std::string shim;
    std::string replay;
    std::string record;
    int timeout_ms = static_cast<int>(kDefaultTimeout.count());

    void add_to(CLI::App* cmd)
    {
        cmd->add_option("--interpreter", interpreter, "Subject Python interpreter (default $DSCHECKER_INTERPRETER)");
        cmd->add_option("--shim", shim, "Probe shim script (default $DSCHECKER_SHIM)");
        auto* replay_opt = cmd->add_option("--exec-replay", replay, "Execution transcript to replay");
        cmd->add_option("--exec-record", record, "Execution transcript to write")->excludes(replay_opt);
        cmd->add_option("--timeout", timeout_ms, "Per-run timeout in milliseconds")->check(CLI::PositiveNumber);
    }

    std::chrono::milliseconds timeout() const { return std::chrono::milliseconds(timeout_ms); }
};

/// Providers and executors chosen by flags; recordings are saved on close().
struct Session {
    std::shared_ptr<ChatProvider> provider;
    std::shared_ptr<RecordingProvider> chat_recorder;
    std::shared_ptr<Executor> executor;
    std::shared_ptr<RecordingExecutor> exec_recorder;
    fs::path chat_record_dir;
    fs::path exec_record_path;

    void close() const
    {
        if (chat_recorder)
            chat_recorder->save(chat_record_dir);
        if (exec_recorder)
            exec_recorder->transcript().save(exec_record_path);
    }
};

std::shared_ptr<Executor> make_executor(const ExecFlags& f, Session& s)
{
    if (!f.replay.empty())
        return std::make_shared<ReplayExecutor>(ExecTranscript::load(f.replay));
    auto options = live_options_from_env();
    if (!f.interpreter.empty())
        options.interpreter = f.interpreter;
    if (!f.shim.empty())
        options.shim = f.shim;
    std::shared_ptr<Executor> live = std::make_shared<LiveExecutor>(options);
    if (f.record.empty())
        return live;
    s.exec_recorder = std::make_shared<RecordingExecutor>(live);
    s.exec_record_path = f.record;
    return s.exec_recorder;
}

Session open_session(const ModelFlags* m, const ExecFlags& e)
{
    Session s;
    if (m) {
        if (!m->replay.empty()) {
            s.provider = ReplayProvider::from_path(m->replay);
        } else {
            auto options = http_options_from_env();
            if (!m->api_base.empty())
                options.api_base = m->api_base;
            s.provider = std::make_shared<HttpProvider>(options);
            if (!m->record_dir.empty()) {
                s.chat_recorder = std::make_shared<RecordingProvider>(s.provider);
                s.chat_record_dir = m->record_dir;
                s.provider = s.chat_recorder;
            }
        }
    }
    s.executor = make_executor(e, s);
    return s;
}

void print_verdict(const Verdict& v)
{
    std::cout << v.raw;
    if (v.raw.empty() || v.raw.back() != '\n')
        std::cout << '\n';
    std::cout << "---\n";
    if (v.flags_misuse()) {
        std::cout << "verdict: misuse flagged\n";
        if (v.explanation)
            std::cout << "explanation: " << *v.explanation << '\n';
    } else {
        std::cout << "verdict: no misuse found\n";
    }
}

int fix_exit(FixClass c)
{
    switch (c) {
    case FixClass::Fixed: return 0;
    case FixClass::StillBroken: return kExitStillBroken;
    case FixClass::NewError: return kExitNewError;
    case FixClass::PatchApplyFailed: return exit_code(ErrorCode::PatchApplyFailed);
    case FixClass::Timeout: return exit_code(ErrorCode::Timeout);
    case FixClass::NotAttempted: return kExitNotAttempted;
    }
    return kExitNotAttempted;
}

struct DetectFlags {
    std::string variant = "base";
    std::string exemplars;
    std::string prompt_template;
    std::string out;
    std::string data_source = "auto";
};

Detector build_detector(const DetectFlags& d, const ModelFlags& m, const ExecFlags& e, const LoadedRecord& loaded,
                        Session& session)
{
    Detector det;
    det.variant = prompt_variant_from_string(d.variant);
    det.params = m.params();
    det.gateway = std::make_shared<Gateway>(session.provider);
    det.executor = session.executor;
    det.index = loaded.index;
    det.timeout = e.timeout();
    det.agent.tool_timeout = e.timeout();
    if (d.data_source == "recorded")
        det.data_source = DataSource::Recorded;
    else if (d.data_source == "probe")
        det.data_source = DataSource::Probe;
    if (!d.prompt_template.empty())
        det.prompt_template = std::make_shared<PromptTemplate>(PromptTemplate::load(d.prompt_template));
    if (det.variant == PromptVariant::Fewshot) {
        if (d.exemplars.empty())
            fail(ErrorCode::FewshotWithoutExemplars, "the few-shot prompt needs --exemplars");
        det.exemplars = load_exemplars(d.exemplars);
    }
    if ((det.variant == PromptVariant::Data || det.variant == PromptVariant::Full) &&
        loaded.record.probe_targets.empty())
        fail(ErrorCode::InvariantViolation,
             fmt::format("the {} prompt needs probe targets (from the record or --probe)", d.variant));
    return det;
}

/// Runs `body`; saves recordings whether it succeeds or not.
int with_session(Session& session, const std::function<int()>& body)
{
    try {
        int rc = body();
        session.close();
        return rc;
    } catch (...) {
        try {
            session.close();
        } catch (const Error& e) {
            std::cerr << "dschecker: " << e.what() << '\n';
        }
        throw;
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Detect and fix API misuses in data-science Python snippets with an LLM"};
    app.require_subcommand(1);

    RecordFlags rec;
    ModelFlags model;
    ExecFlags exec;
    DetectFlags det;

    auto* check = app.add_subcommand("check", "Ask the model whether a snippet misuses an API");
    rec.add_to(check);
    model.add_to(check);
    exec.add_to(check);
    check->add_option("--prompt", det.variant, "Prompt variant: base, data, dir, full, fewshot");
    check->add_option("--exemplars", det.exemplars, "Few-shot exemplar store (JSON lines)");
    check->add_option("--template", det.prompt_template, "Prompt template file (default: built in)");
    check->add_option("--data-source", det.data_source, "auto, recorded or probe")
        ->check(CLI::IsMember({"auto", "recorded", "probe"}));
    check->add_option("--out", det.out, "Write the raw verdict here");

    bool apply = false, validate = false;
    int fuzz = kDefaultPatchFuzz;
    auto* fix = app.add_subcommand("fix", "Check a snippet, then apply and optionally validate the patch");
    rec.add_to(fix);
    model.add_to(fix);
    exec.add_to(fix);
    fix->add_option("--prompt", det.variant, "Prompt variant: base, data, dir, full, fewshot");
    fix->add_option("--exemplars", det.exemplars, "Few-shot exemplar store (JSON lines)");
    fix->add_option("--template", det.prompt_template, "Prompt template file (default: built in)");
    fix->add_option("--data-source", det.data_source, "auto, recorded or probe")
        ->check(CLI::IsMember({"auto", "recorded", "probe"}));
    fix->add_option("--out", det.out, "Write the patched snippet here (with --apply)");
    fix->add_flag("--apply", apply, "Print or write the patched snippet");
    fix->add_flag("--validate", validate, "Run original and patched snippets and classify the fix");
    fix->add_option("--patch-fuzz", fuzz, "Lines a hunk may drift from its stated position")
        ->check(CLI::NonNegativeNumber);

    int max_iters = 8;
    bool limit_calls = false;
    std::string agent_log;
    auto* agent = app.add_subcommand("agent", "Let the model call tools before answering");
    rec.add_to(agent);
    model.add_to(agent);
    exec.add_to(agent);
    agent->add_option("--max-iters", max_iters, "Tool rounds before a final answer is demanded")
        ->check(CLI::PositiveNumber);
    agent->add_flag("--limit-calls", limit_calls, "Also cap the total number of calls at --max-iters");
    agent->add_option("--template", det.prompt_template, "Prompt template file (default: built in)");
    agent->add_option("--out", agent_log, "Write the verdict and call log as JSON here");

    std::string eval_dataset, eval_configs, eval_adjudications, eval_mode, eval_out, eval_table, eval_subset;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    bool without_replacement = false;
    auto* eval = app.add_subcommand("eval", "Evaluate detector configurations over a dataset");
    eval->add_option("--dataset", eval_dataset, "Dataset manifest")->required();
    eval->add_option("--configs", eval_configs, "Evaluation file listing the configurations")->required();
    eval->add_option("--adjudications", eval_adjudications, "Explanation adjudications {id: bool}");
    eval->add_option("--adjudication-mode", eval_mode, "strict or raw")
        ->check(CLI::IsMember({"strict", "raw"}));
    eval->add_option("--seed", seed, "Bootstrap seed");
    eval->add_option("--out", eval_out, "Write the JSON report here");
    eval->add_option("--table", eval_table, "Write the text table here as well");
    eval->add_option("--jobs", jobs, "Records evaluated in parallel")->check(CLI::PositiveNumber);
    eval->add_option("--subset", eval_subset, "all, with_directive or data_dependent");
    eval->add_flag("--without-replacement", without_replacement, "Bootstrap without replacement");

    std::string probe_snippet;
    std::vector<std::string> probe_vars, probe_data;
    std::vector<int> probe_lines;
    bool probe_json = false;
    ExecFlags probe_exec;
    auto* probe = app.add_subcommand("probe", "Describe variables of a snippet at given lines");
    probe->add_option("--snippet", probe_snippet, "Python snippet")->required();
    probe->add_option("--var", probe_vars, "Variable name (repeatable, paired with --line)")->required();
    probe->add_option("--line", probe_lines, "Line after which to capture the variable")->required();
    probe->add_option("--data-file", probe_data, "Data file the snippet reads (repeatable)");
    probe->add_flag("--json", probe_json, "Print the records as JSON");
    probe_exec.add_to(probe);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return usage_exit(app, e);
    }

    try {
        if (*check || *fix) {
            auto loaded = load_record(rec);
            auto session = open_session(&model, exec);
            return with_session(session, [&] {
                auto detector = build_detector(det, model, exec, loaded, session);
                detector.patch_fuzz = fuzz;
                auto detection = detect(loaded.record, loaded.root, detector);
                const auto& verdict = detection.verdict;
                if (*check) {
                    if (!det.out.empty())
                        write_file(det.out, verdict.raw);
                    print_verdict(verdict);
                    return verdict.flags_misuse() ? kExitFlagged : 0;
                }
                print_verdict(verdict);
                if (!verdict.flags_misuse()) {
                    std::cout << "nothing to fix\n";
                    return 0;
                }
                if (apply) {
                    auto patched = apply_patch(loaded.record.source, *verdict.patch, fuzz);
                    if (det.out.empty())
                        std::cout << "--- patched snippet\n" << patched;
                    else
                        write_file(det.out, patched);
                }
                if (!validate)
                    return kExitFlagged;
                auto result = validate_fix(*session.executor, loaded.record, loaded.root, *verdict.patch, fuzz,
                                           exec.timeout());
                std::cout << "fix: " << to_string(result.outcome.classification) << '\n';
                if (!result.outcome.evidence.empty())
                    std::cout << "evidence: " << result.outcome.evidence << '\n';
                return fix_exit(result.outcome.classification);
            });
        }

        if (*agent) {
            auto loaded = load_record(rec);
            auto session = open_session(&model, exec);
            return with_session(session, [&] {
                Detector detector = build_detector(det, model, exec, loaded, session);
                detector.mode = DetectorMode::Agent;
                detector.agent.max_iterations = max_iters;
                detector.agent.allow_unlimited_calls = !limit_calls;
                try {
                    auto detection = detect(loaded.record, loaded.root, detector);
                    const auto& run = *detection.agent_run;
                    print_verdict(run.verdict);
                    std::cout << summarize_call_log(run.log);
                    if (!agent_log.empty())
                        write_file(agent_log, Json{{"verdict", verdict_contract_json(run.verdict)},
                                                   {"model_turns", run.model_turns},
                                                   {"tool_rounds", run.tool_rounds},
                                                   {"function_calls", call_log_json(run.log)}}
                                                  .dump(2) +
                                                  "\n");
                    return run.verdict.flags_misuse() ? kExitFlagged : 0;
                } catch (const AgentFailure& e) {
                    std::cout << summarize_call_log(e.partial().log);
                    throw;
                }
            });
        }

        if (*eval) {
            auto dataset = load_dataset(eval_dataset);
            auto config = load_eval_config(eval_configs);
            if (without_replacement)
                config.bootstrap.with_replacement = false;
            if (!eval_subset.empty())
                config.subset = subset_from_string(eval_subset);
            EvalOptions options;
            options.seed = seed;
            options.jobs = jobs;
            if (!eval_adjudications.empty())
                options.adjudication = load_adjudication(eval_adjudications);
            if (!eval_mode.empty())
                options.adjudication_mode = adjudication_mode_from_string(eval_mode);
            auto report = evaluate(dataset, config, options);
            const auto table = render_report_table(report);
            if (!eval_out.empty())
                write_file(eval_out, report_to_json(report).dump(2) + "\n");
            if (!eval_table.empty())
                write_file(eval_table, table);
            std::cout << table;
            return 0;
        }

        if (*probe) {
            if (probe_vars.size() != probe_lines.size())
                throw CLI::ValidationError("--var/--line", "give one --line per --var");
            Session session = open_session(nullptr, probe_exec);
            return with_session(session, [&] {
                SnippetRecord record;
                record.id = fs::path(probe_snippet).stem().string();
                record.source = read_text_file(probe_snippet);
                record.data_files = probe_data;
                std::vector<ProbeTarget> targets;
                for (std::size_t i = 0; i < probe_vars.size(); ++i)
                    targets.push_back({probe_vars[i], probe_lines[i]});
                ExecRequest request;
                request.mode = ExecMode::Probe;
                request.snippet_text = record.source;
                for (const auto& f : probe_data)
                    request.data_files.push_back(fs::absolute(f));
                request.probes = targets;
                request.timeout = probe_exec.timeout();
                auto run = interpret_probe_run(session.executor->execute(request), targets);
                if (probe_json) {
                    std::cout << Json(run.infos).dump(2) << '\n';
                } else {
                    for (const auto& info : run.infos)
                        std::cout << render_data_section(info) << '\n';
                }
                if (run.snippet_error)
                    std::cerr << "note: the snippet raised " << *run.snippet_error << " after the probes\n";
                return 0;
            });
        }
    } catch (const CLI::ParseError& e) {
        return usage_exit(app, e);
    } catch (const Error& e) {
        std::cerr << "dschecker: " << e.what() << '\n';
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "dschecker: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
