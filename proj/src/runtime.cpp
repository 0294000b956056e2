#include "dschecker/runtime.hpp"

#include "dschecker/dataset.hpp"
#include "dschecker/error.hpp"
#include "dschecker/hashing.hpp"
#include "dschecker/patch.hpp"
#include "dschecker/process.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <unistd.h>

namespace fs = std::filesystem;

namespace dschecker {

namespace {

constexpr std::string_view kTranscriptFormat = "dschecker-exec-transcript";
constexpr int kTranscriptVersion = 1;
constexpr const char* kSnippetName = "snippet.py";
constexpr const char* kProbeSpecName = "probes.json";

/// A temporary directory removed on destruction unless kept.
class Workspace {
public:
    Workspace(const fs::path& parent, bool keep) : keep_(keep)
    {
        std::error_code ec;
        auto base = parent.empty() ? fs::temp_directory_path(ec) : parent;
        if (ec)
            fail(ErrorCode::WorkspaceIo, fmt::format("no temporary directory: {}", ec.message()));
        fs::create_directories(base, ec);
        std::string pattern = (base / "dschecker-XXXXXX").string();
        if (!::mkdtemp(pattern.data()))
            fail(ErrorCode::WorkspaceIo, fmt::format("cannot create workspace under '{}'", base.string()));
        path_ = pattern;
    }
    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;
    ~Workspace()
    {
        if (!keep_) {
            std::error_code ec;
            fs::remove_all(path_, ec);
        }
    }

    const fs::path& path() const noexcept { return path_; }

    void write(const std::string& name, std::string_view content) const
    {
        std::ofstream out(path_ / name, std::ios::binary);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out)
            fail(ErrorCode::WorkspaceIo, fmt::format("cannot write '{}' in workspace", name));
    }

    void copy_in(const std::vector<fs::path>& files) const
    {
        std::set<std::string> seen{kSnippetName, kProbeSpecName};
        for (const auto& file : files) {
            auto name = file.filename().string();
            if (!seen.insert(name).second)
                fail(ErrorCode::WorkspaceIo, fmt::format("data file name '{}' is used twice", name));
            std::error_code ec;
            fs::copy_file(file, path_ / name, fs::copy_options::overwrite_existing, ec);
            if (ec)
                fail(ErrorCode::WorkspaceIo, fmt::format("cannot copy '{}': {}", file.string(), ec.message()));
        }
    }

private:
    fs::path path_;
    bool keep_;
};

Json raw_run_json(const RawRun& r)
{
    return {{"exit_code", r.exit_code},       {"term_signal", r.term_signal}, {"timed_out", r.timed_out},
            {"stdout", r.stdout_text},        {"stderr", r.stderr_text},      {"duration_ms", r.duration_ms}};
}

RawRun raw_run_from_json(const Json& j)
{
    RawRun r;
    j.at("exit_code").get_to(r.exit_code);
    r.term_signal = j.value("term_signal", 0);
    r.timed_out = j.value("timed_out", false);
    j.at("stdout").get_to(r.stdout_text);
    j.at("stderr").get_to(r.stderr_text);
    r.duration_ms = j.value("duration_ms", std::int64_t{0});
    return r;
}

ExecMode exec_mode_from_string(std::string_view text)
{
    for (auto m : {ExecMode::Plain, ExecMode::Probe, ExecMode::Checker})
        if (text == to_string(m))
            return m;
    fail(ErrorCode::ConfigSyntax, fmt::format("unknown execution mode '{}'", text));
}

std::string last_component(std::string_view dotted)
{
    auto dot = dotted.rfind('.');
    return std::string(dot == std::string_view::npos ? dotted : dotted.substr(dot + 1));
}

std::string trim_copy(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string last_lines(std::string_view text, std::size_t count)
{
    auto t = trim_copy(text);
    std::size_t pos = t.size();
    for (std::size_t n = 0; n < count && pos != std::string::npos && pos > 0; ++n)
        pos = t.rfind('\n', pos - 1);
    return pos == std::string::npos || pos == 0 ? t : t.substr(pos + 1);
}

std::vector<fs::path> resolve_all(const fs::path& root, const std::vector<std::string>& relative)
{
    std::vector<fs::path> out;
    for (const auto& r : relative)
        out.push_back(root / r);
    return out;
}

}  // namespace

std::string_view to_string(ExecMode mode)
{
    switch (mode) {
    case ExecMode::Plain: return "plain";
    case ExecMode::Probe: return "probe";
    case ExecMode::Checker: return "checker";
    }
    return "plain";
}

std::string_view to_string(ExecStatus status)
{
    switch (status) {
    case ExecStatus::Ok: return "OK";
    case ExecStatus::Error: return "ERROR";
    case ExecStatus::Timeout: return "TIMEOUT";
    }
    return "OK";
}

std::string_view to_string(FixClass fix)
{
    switch (fix) {
    case FixClass::Fixed: return "FIXED";
    case FixClass::StillBroken: return "STILL_BROKEN";
    case FixClass::NewError: return "NEW_ERROR";
    case FixClass::PatchApplyFailed: return "PATCH_APPLY_FAILED";
    case FixClass::Timeout: return "TIMEOUT";
    case FixClass::NotAttempted: return "NOT_ATTEMPTED";
    }
    return "NOT_ATTEMPTED";
}

FixClass fix_class_from_string(std::string_view text)
{
    for (auto f : {FixClass::Fixed, FixClass::StillBroken, FixClass::NewError, FixClass::PatchApplyFailed,
                   FixClass::Timeout, FixClass::NotAttempted})
        if (text == to_string(f))
            return f;
    fail(ErrorCode::ConfigSyntax, fmt::format("unknown fix classification '{}'", text));
}

std::string request_key(const ExecRequest& request)
{
    Json files = Json::array();
    for (const auto& f : request.data_files)
        files.push_back({{"name", f.filename().string()}, {"sha256", sha256_hex(read_text_file(f))}});
    Json probes = Json::array();
    for (const auto& p : request.probes)
        probes.push_back(p);
    Json key{{"mode", to_string(request.mode)},
             {"snippet", request.snippet_text},
             {"data_files", std::move(files)},
             {"probes", std::move(probes)},
             {"stdin_sha256", sha256_hex(request.stdin_text)}};
    return sha256_hex(key.dump());
}

LiveExecutorOptions live_options_from_env()
{
    LiveExecutorOptions options;
    if (const char* interp = std::getenv("DSCHECKER_INTERPRETER"); interp && *interp)
        options.interpreter = interp;
    if (const char* shim = std::getenv("DSCHECKER_SHIM"); shim && *shim)
        options.shim = shim;
    return options;
}

LiveExecutor::LiveExecutor(LiveExecutorOptions options) : options_(std::move(options))
{
    // The interpreter runs inside the workspace, so relative paths must be pinned now.
    std::error_code ec;
    if (options_.shim.is_relative() && fs::exists(options_.shim, ec))
        options_.shim = fs::absolute(options_.shim);
    if (options_.interpreter.find('/') != std::string::npos && fs::exists(options_.interpreter, ec))
        options_.interpreter = fs::absolute(options_.interpreter).string();
}

RawRun LiveExecutor::execute(const ExecRequest& request)
{
    if (request.timeout.count() <= 0)
        fail(ErrorCode::InvariantViolation, "timeout must be positive");
    if (request.mode == ExecMode::Probe && !fs::is_regular_file(options_.shim))
        fail(ErrorCode::MissingFile, fmt::format("probe shim '{}' not found (set --shim or DSCHECKER_SHIM)",
                                                 options_.shim.string()));

    Workspace ws(options_.workspace_parent, options_.keep_workspaces);
    ws.copy_in(request.data_files);
    ws.write(kSnippetName, request.snippet_text);

    ProcessRequest proc;
    proc.cwd = ws.path();
    proc.timeout = request.timeout;
    proc.stdin_text = request.stdin_text;
    proc.extra_env = {"PYTHONUNBUFFERED=1", "PYTHONDONTWRITEBYTECODE=1"};
    if (request.mode == ExecMode::Probe) {
        Json probes = Json::array();
        for (const auto& p : request.probes)
            probes.push_back(p);
        Json spec{{"snippet_path", (ws.path() / kSnippetName).string()},
                  {"probes", std::move(probes)},
                  {"workspace", ws.path().string()}};
        ws.write(kProbeSpecName, spec.dump());
        proc.argv = {options_.interpreter, options_.shim.string(), kSnippetName, kProbeSpecName};
    } else {
        proc.argv = {options_.interpreter, kSnippetName};
    }

    auto result = run_process(proc);
    return RawRun{result.exit_code,   result.term_signal,   result.timed_out,
                  result.stdout_text, result.stderr_text,  result.duration_ms};
}

ExecTranscript ExecTranscript::parse(std::string_view text)
{
    ExecTranscript t;
    try {
        auto j = Json::parse(text);
        if (j.at("format").get<std::string>() != kTranscriptFormat)
            fail(ErrorCode::ConfigSyntax, "not an execution transcript");
        if (j.at("version").get<int>() != kTranscriptVersion)
            fail(ErrorCode::ConfigSyntax,
                 fmt::format("unsupported execution transcript version {}", j.at("version").dump()));
        for (const auto& e : j.at("runs")) {
            TranscriptEntry entry;
            e.at("key").get_to(entry.key);
            entry.mode = exec_mode_from_string(e.at("mode").get<std::string>());
            entry.snippet_sha256 = e.value("snippet_sha256", std::string{});
            entry.result = raw_run_from_json(e.at("result"));
            t.add(std::move(entry));
        }
    } catch (const Json::exception& e) {
        fail(ErrorCode::ConfigSyntax, fmt::format("execution transcript: {}", e.what()));
    }
    return t;
}

ExecTranscript ExecTranscript::load(const fs::path& path)
{
    if (!fs::is_regular_file(path))
        fail(ErrorCode::MissingFile, fmt::format("execution transcript '{}' not found", path.string()));
    return parse(read_text_file(path));
}

std::string ExecTranscript::serialize() const
{
    Json runs = Json::array();
    for (const auto& [key, e] : entries_)
        runs.push_back({{"key", e.key},
                        {"mode", to_string(e.mode)},
                        {"snippet_sha256", e.snippet_sha256},
                        {"result", raw_run_json(e.result)}});
    Json j{{"format", kTranscriptFormat}, {"version", kTranscriptVersion}, {"runs", std::move(runs)}};
    return j.dump(2) + "\n";
}

void ExecTranscript::save(const fs::path& path) const
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << serialize();
    if (!out)
        fail(ErrorCode::WorkspaceIo, fmt::format("cannot write '{}'", path.string()));
}

const TranscriptEntry* ExecTranscript::find(std::string_view key) const
{
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
}

void ExecTranscript::add(TranscriptEntry entry)
{
    auto key = entry.key;
    entries_.insert_or_assign(std::move(key), std::move(entry));
}

ReplayExecutor::ReplayExecutor(ExecTranscript transcript) : transcript_(std::move(transcript)) {}

RawRun ReplayExecutor::execute(const ExecRequest& request)
{
    auto key = request_key(request);
    if (const auto* entry = transcript_.find(key))
        return entry->result;
    fail(ErrorCode::TranscriptMiss,
         fmt::format("no recorded {} run for snippet sha256 {} (key {})", to_string(request.mode),
                     sha256_hex(request.snippet_text).substr(0, 12), key.substr(0, 12)));
}

RecordingExecutor::RecordingExecutor(std::shared_ptr<Executor> inner) : inner_(std::move(inner)) {}

RawRun RecordingExecutor::execute(const ExecRequest& request)
{
    auto result = inner_->execute(request);
    TranscriptEntry entry{request_key(request), request.mode, sha256_hex(request.snippet_text), result};
    std::lock_guard lock(mutex_);
    transcript_.add(std::move(entry));
    return result;
}

ExecTranscript RecordingExecutor::transcript() const
{
    std::lock_guard lock(mutex_);
    return transcript_;
}

std::optional<std::string> parse_error_type(std::string_view stderr_text)
{
    static const std::regex with_message(R"(^([A-Za-z_][A-Za-z0-9_.]*): .*$|^([A-Za-z_][A-Za-z0-9_.]*):$)");
    static const std::regex bare(R"(^([A-Za-z_][A-Za-z0-9_.]*)$)");

    std::vector<std::string> lines;
    std::istringstream in{std::string(stderr_text)};
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        lines.push_back(std::move(line));
    }
    while (!lines.empty() && trim_copy(lines.back()).empty())
        lines.pop_back();
    if (lines.empty())
        return std::nullopt;

    std::smatch m;
    if (std::regex_match(lines.back(), m, bare))
        return last_component(m[1].str());
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        if (std::regex_match(*it, m, with_message))
            return last_component(m[1].matched ? m[1].str() : m[2].str());
    }
    return std::nullopt;
}

ExecutionOutcome to_outcome(const RawRun& run)
{
    ExecutionOutcome out;
    out.stdout_text = run.stdout_text;
    out.stderr_text = run.stderr_text;
    out.duration_ms = run.duration_ms;
    if (run.timed_out) {
        out.status = ExecStatus::Timeout;
    } else if (run.exit_code == 0 && run.term_signal == 0) {
        out.status = ExecStatus::Ok;
    } else {
        out.status = ExecStatus::Error;
        if (auto type = parse_error_type(run.stderr_text))
            out.error_type = type;
        else if (run.term_signal)
            out.error_type = fmt::format("Signal{}", run.term_signal);
        else
            out.error_type = fmt::format("ExitCode{}", run.exit_code);
    }
    return out;
}

ExecutionOutcome run_snippet(Executor& executor, std::string_view snippet_text, const std::vector<fs::path>& data_files,
                             std::chrono::milliseconds timeout)
{
    if (timeout.count() <= 0)
        fail(ErrorCode::InvariantViolation, "timeout must be positive");
    ExecRequest request;
    request.mode = ExecMode::Plain;
    request.snippet_text = std::string(snippet_text);
    request.data_files = data_files;
    request.timeout = timeout;
    return to_outcome(executor.execute(request));
}

DataInfo parse_probe_line(std::string_view line)
{
    if (line.substr(0, kProbePrefix.size()) != kProbePrefix)
        fail(ErrorCode::ShimProtocol, "probe line lacks the @@PROBE prefix");
    try {
        auto j = Json::parse(line.substr(kProbePrefix.size()));
        if (!j.is_object())
            fail(ErrorCode::ShimProtocol, "probe record is not an object");
        if (auto it = j.find("protocol"); it != j.end() && *it != kProbeProtocol)
            fail(ErrorCode::ShimProtocol, fmt::format("unsupported probe protocol {}", it->dump()));
        return j.get<DataInfo>();
    } catch (const Json::exception& e) {
        fail(ErrorCode::ShimProtocol, fmt::format("malformed probe record: {}", e.what()));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ShimProtocol)
            throw;
        fail(ErrorCode::ShimProtocol, fmt::format("invalid probe record: {}", e.detail()));
    }
}

ProbeRun interpret_probe_run(const RawRun& run, const std::vector<ProbeTarget>& targets)
{
    if (run.timed_out)
        fail(ErrorCode::Timeout, fmt::format("probe run timed out after {} ms", run.duration_ms));
    if (run.term_signal != 0)
        fail(ErrorCode::ShimProtocol, fmt::format("probe shim killed by signal {}", run.term_signal));
    if (run.exit_code == 2)
        fail(ErrorCode::ShimInstrumentationFailed, last_lines(run.stderr_text, 3));
    if (run.exit_code != 0 && run.exit_code != 3)
        fail(ErrorCode::ShimProtocol, fmt::format("probe shim exited with unexpected status {}: {}", run.exit_code,
                                                  last_lines(run.stderr_text, 3)));

    ProbeRun out;
    std::set<ProbeTarget> wanted(targets.begin(), targets.end()), seen;
    std::istringstream in(run.stdout_text);
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.rfind("@@PROBE", 0) != 0)
            continue;
        auto info = parse_probe_line(line);
        if (!wanted.count(info.target))
            fail(ErrorCode::ShimProtocol, fmt::format("probe record for unrequested target {}@{}",
                                                      info.target.variable_name, info.target.line_number));
        if (!seen.insert(info.target).second)
            fail(ErrorCode::ShimProtocol, fmt::format("duplicate probe record for {}@{}", info.target.variable_name,
                                                      info.target.line_number));
        out.infos.push_back(std::move(info));
    }
    if (run.exit_code == 0 && out.infos.size() != wanted.size())
        fail(ErrorCode::ShimProtocol, fmt::format("shim emitted {} probe records for {} targets", out.infos.size(),
                                                  wanted.size()));
    if (run.exit_code == 3)
        out.snippet_error = parse_error_type(run.stderr_text).value_or("ExitCode3");
    return out;
}

std::vector<DataInfo> collect_data_info(Executor& executor, const SnippetRecord& record, const fs::path& root,
                                        const std::vector<ProbeTarget>& targets, std::chrono::milliseconds timeout)
{
    if (targets.empty())
        fail(ErrorCode::InvariantViolation, fmt::format("record '{}': no probe targets given", record.id));
    ExecRequest request;
    request.mode = ExecMode::Probe;
    request.snippet_text = record.source;
    request.data_files = resolve_all(root, record.data_files);
    request.probes = targets;
    request.timeout = timeout;
    return interpret_probe_run(executor.execute(request), targets).infos;
}

bool output_check_passes(const OutputCheck& check, const ExecutionOutcome& outcome)
{
    switch (check.mode) {
    case OutputCheckMode::StdoutContains: return outcome.stdout_text.find(check.value) != std::string::npos;
    case OutputCheckMode::StdoutNotContains: return outcome.stdout_text.find(check.value) == std::string::npos;
    case OutputCheckMode::CheckerScript: return outcome.checker_passed.value_or(false);
    }
    return false;
}

FixOutcome classify_fix(const ExecutionOutcome& original, bool apply_ok, const std::optional<ExecutionOutcome>& patched,
                        const Expectation& expectation)
{
    if (!apply_ok)
        return {FixClass::PatchApplyFailed, "patch did not apply"};
    if (!patched)
        return {FixClass::NotAttempted, "patched program was not run"};
    if (patched->status == ExecStatus::Timeout)
        return {FixClass::Timeout, fmt::format("patched run timed out after {} ms", patched->duration_ms)};
    if (expectation.empty())
        return {FixClass::NotAttempted, "record has no expected symptom to check against"};

    const auto before = original.error_type ? fmt::format("original raised {}", *original.error_type)
                                            : fmt::format("original finished {}", to_string(original.status));
    const auto* check = expectation.output_check ? &*expectation.output_check : nullptr;

    if (const auto& sig = expectation.error_signature) {
        const auto expected = last_component(sig->exception_class);
        if (patched->status == ExecStatus::Ok) {
            if (check && !output_check_passes(*check, *patched))
                return {FixClass::StillBroken,
                        fmt::format("{}; patched run is clean but the output check ({}) fails", before,
                                    to_string(check->mode))};
            return {FixClass::Fixed, fmt::format("{}; patched run is clean", before)};
        }
        bool same_class = patched->error_type == expected;
        bool same_message = !sig->message_substring ||
                            patched->stderr_text.find(*sig->message_substring) != std::string::npos;
        if (same_class && same_message)
            return {FixClass::StillBroken, fmt::format("{}; patched run still raises {}", before, expected)};
        return {FixClass::NewError,
                fmt::format("{}; patched run raises {} instead", before, patched->error_type.value_or("an error"))};
    }

    if (patched->status == ExecStatus::Error)
        return {FixClass::NewError,
                fmt::format("{}; patched run raises {}", before, patched->error_type.value_or("an error"))};
    if (output_check_passes(*check, *patched))
        return {FixClass::Fixed, fmt::format("{}; output check ({}) passes on the patched run", before,
                                             to_string(check->mode))};
    return {FixClass::StillBroken,
            fmt::format("{}; output check ({}) fails on the patched run", before, to_string(check->mode))};
}

FixValidation validate_fix(Executor& executor, const SnippetRecord& record, const fs::path& root,
                           std::string_view patch, int fuzz, std::chrono::milliseconds timeout)
{
    FixValidation v;
    try {
        v.patched_text = apply_patch(record.source, patch, fuzz);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::DiffSyntax && e.code() != ErrorCode::HunkMismatch)
            throw;
        v.outcome = classify_fix(ExecutionOutcome{}, false, std::nullopt, record.expectation);
        v.outcome.evidence = e.what();
        return v;
    }

    const auto data_files = resolve_all(root, record.data_files);
    v.original_run = run_snippet(executor, record.source, data_files, timeout);
    v.patched_run = run_snippet(executor, *v.patched_text, data_files, timeout);

    const auto& check = record.expectation.output_check;
    if (check && check->mode == OutputCheckMode::CheckerScript && v.patched_run->status == ExecStatus::Ok) {
        ExecRequest request;
        request.mode = ExecMode::Checker;
        request.snippet_text = read_text_file(root / check->value);
        request.stdin_text = v.patched_run->stdout_text;
        request.timeout = timeout;
        auto run = executor.execute(request);
        v.patched_run->checker_passed = !run.timed_out && run.exit_code == 0 && run.term_signal == 0;
    }

    v.outcome = classify_fix(*v.original_run, true, v.patched_run, record.expectation);
    return v;
}

}  // namespace dschecker
