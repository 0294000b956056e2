#pragma once

#include "dschecker/model.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dschecker {

inline constexpr std::chrono::milliseconds kDefaultTimeout{30'000};

enum class ExecMode {
    Plain,    // interpreter runs the snippet directly
    Probe,    // interpreter runs the probe shim over the snippet
    Checker,  // interpreter runs an output-checker script, stdin = program stdout
};

std::string_view to_string(ExecMode mode);

/// Everything needed to run one program once. Data files are copied into the
/// workspace under their base names.
struct ExecRequest {
    ExecMode mode = ExecMode::Plain;
    std::string snippet_text;
    std::vector<std::filesystem::path> data_files;
    std::vector<ProbeTarget> probes;
    std::string stdin_text;
    std::chrono::milliseconds timeout = kDefaultTimeout;
};

/// What the interpreter did, before any interpretation.
struct RawRun {
    int exit_code = 0;
    int term_signal = 0;
    bool timed_out = false;
    std::string stdout_text;
    std::string stderr_text;
    std::int64_t duration_ms = 0;

    bool operator==(const RawRun&) const = default;
};

/// Stable key over the request's observable inputs: mode, snippet text, data
/// file base names and contents, probes and stdin. Timeouts are not part of it.
std::string request_key(const ExecRequest& request);

class Executor {
public:
    virtual ~Executor() = default;
    /// Must be safe to call concurrently.
    virtual RawRun execute(const ExecRequest& request) = 0;
};

struct LiveExecutorOptions {
    std::string interpreter = "python3";
    std::filesystem::path shim = "probe_shim";
    /// Parent directory for per-run workspaces; empty = system temp directory.
    std::filesystem::path workspace_parent;
    bool keep_workspaces = false;
};

/// Defaults from DSCHECKER_INTERPRETER and DSCHECKER_SHIM when set.
LiveExecutorOptions live_options_from_env();

/// Runs the subject interpreter in a fresh workspace per request.
class LiveExecutor : public Executor {
public:
    explicit LiveExecutor(LiveExecutorOptions options = live_options_from_env());
    RawRun execute(const ExecRequest& request) override;
    const LiveExecutorOptions& options() const noexcept { return options_; }

private:
    LiveExecutorOptions options_;
};

struct TranscriptEntry {
    std::string key;
    ExecMode mode = ExecMode::Plain;
    std::string snippet_sha256;
    RawRun result;
};

/// A recorded set of executions, one JSON file.
class ExecTranscript {
public:
    static ExecTranscript load(const std::filesystem::path& path);
    static ExecTranscript parse(std::string_view text);
    std::string serialize() const;
    void save(const std::filesystem::path& path) const;

    const TranscriptEntry* find(std::string_view key) const;
    /// Replaces an existing entry with the same key.
    void add(TranscriptEntry entry);
    std::size_t size() const noexcept { return entries_.size(); }

private:
    std::map<std::string, TranscriptEntry, std::less<>> entries_;
};

/// Answers from a transcript; a request with no recorded run is TRANSCRIPT_MISS.
class ReplayExecutor : public Executor {
public:
    explicit ReplayExecutor(ExecTranscript transcript);
    RawRun execute(const ExecRequest& request) override;

private:
    ExecTranscript transcript_;
};

/// Forwards to another executor and keeps every run for saving.
class RecordingExecutor : public Executor {
public:
    explicit RecordingExecutor(std::shared_ptr<Executor> inner);
    RawRun execute(const ExecRequest& request) override;
    ExecTranscript transcript() const;

private:
    std::shared_ptr<Executor> inner_;
    mutable std::mutex mutex_;
    ExecTranscript transcript_;
};

enum class ExecStatus { Ok, Error, Timeout };

std::string_view to_string(ExecStatus status);

struct ExecutionOutcome {
    ExecStatus status = ExecStatus::Ok;
    std::string stdout_text;
    std::string stderr_text;
    /// Last exception class from the traceback; set iff status == Error.
    std::optional<std::string> error_type;
    std::int64_t duration_ms = 0;
    /// Result of a CHECKER_SCRIPT output check, when one was run.
    std::optional<bool> checker_passed;

    bool operator==(const ExecutionOutcome&) const = default;
};

/// Class name from the last "Name: message" (or bare "Name") line of a
/// Python-style traceback; dotted names are reduced to their last component.
std::optional<std::string> parse_error_type(std::string_view stderr_text);

ExecutionOutcome to_outcome(const RawRun& run);

ExecutionOutcome run_snippet(Executor& executor, std::string_view snippet_text,
                             const std::vector<std::filesystem::path>& data_files,
                             std::chrono::milliseconds timeout = kDefaultTimeout);

inline constexpr std::string_view kProbePrefix = "@@PROBE ";
inline constexpr std::string_view kProbeProtocol = "@@PROBE/v1";

/// Parses one `@@PROBE {...}` line. Throws SHIM_PROTOCOL.
DataInfo parse_probe_line(std::string_view line);

struct ProbeRun {
    std::vector<DataInfo> infos;  // in emission order
    /// Set when the snippet raised after instrumentation (shim exit 3).
    std::optional<std::string> snippet_error;
};

/// Interprets shim output. Exit 2 is SHIM_INSTRUMENTATION_FAILED, a timeout is
/// TIMEOUT, any exit other than 0/2/3 or a malformed record is SHIM_PROTOCOL.
ProbeRun interpret_probe_run(const RawRun& run, const std::vector<ProbeTarget>& targets);

/// Runs the record's snippet under the probe shim for `targets`.
std::vector<DataInfo> collect_data_info(Executor& executor, const SnippetRecord& record,
                                        const std::filesystem::path& root, const std::vector<ProbeTarget>& targets,
                                        std::chrono::milliseconds timeout = kDefaultTimeout);

enum class FixClass { Fixed, StillBroken, NewError, PatchApplyFailed, Timeout, NotAttempted };

std::string_view to_string(FixClass fix);
FixClass fix_class_from_string(std::string_view text);

struct FixOutcome {
    FixClass classification = FixClass::NotAttempted;
    std::string evidence;

    bool operator==(const FixOutcome&) const = default;
};

/// Whether the output check holds for `outcome`. CHECKER_SCRIPT reads
/// `outcome.checker_passed` (absent counts as failing).
bool output_check_passes(const OutputCheck& check, const ExecutionOutcome& outcome);

/// Pure decision over the apply result and both runs.
FixOutcome classify_fix(const ExecutionOutcome& original, bool apply_ok, const std::optional<ExecutionOutcome>& patched,
                        const Expectation& expectation);

struct FixValidation {
    FixOutcome outcome;
    std::optional<std::string> patched_text;
    std::optional<ExecutionOutcome> original_run;
    std::optional<ExecutionOutcome> patched_run;
};

/// Applies `patch` to the record's snippet, runs original and patched
/// programs (plus the checker script, if the expectation names one) and
/// classifies the result.
FixValidation validate_fix(Executor& executor, const SnippetRecord& record, const std::filesystem::path& root,
                           std::string_view patch, int fuzz, std::chrono::milliseconds timeout = kDefaultTimeout);

}  // namespace dschecker
