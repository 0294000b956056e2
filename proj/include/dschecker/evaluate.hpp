#pragma once

#include "dschecker/agent.hpp"
#include "dschecker/dataset.hpp"
#include "dschecker/docindex.hpp"
#include "dschecker/gateway.hpp"
#include "dschecker/metrics.hpp"
#include "dschecker/prompt.hpp"
#include "dschecker/runtime.hpp"
#include "dschecker/stats.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dschecker {

enum class DetectorMode { Prompt, Agent };

/// Where DATA/FULL/FEWSHOT prompts get their runtime facts from.
/// Auto prefers the record's recorded_data and probes only when it is empty.
enum class DataSource { Auto, Recorded, Probe };

std::string_view to_string(DetectorMode mode);
std::string_view to_string(DataSource source);

/// Everything needed to judge one snippet, already constructed.
struct Detector {
    DetectorMode mode = DetectorMode::Prompt;
    PromptVariant variant = PromptVariant::Base;
    GenerationParams params;
    AgentConfig agent;
    DataSource data_source = DataSource::Auto;
    std::shared_ptr<Gateway> gateway;
    std::shared_ptr<Executor> executor;       // null: no probing, no fix validation
    std::shared_ptr<const DocIndex> index;    // null: the doc tool answers with an error
    std::vector<FewShotExemplar> exemplars;
    std::shared_ptr<const PromptTemplate> prompt_template;  // null: built-in
    std::chrono::milliseconds timeout = kDefaultTimeout;
    int patch_fuzz = 3;
};

struct Detection {
    Verdict verdict;
    std::vector<DataInfo> data;    // facts given to the prompt, if any
    std::optional<AgentRun> agent_run;
};

/// Runtime facts for a prompt variant that uses them; empty for the others.
std::vector<DataInfo> prompt_data(const SnippetRecord& record, const std::filesystem::path& root,
                                  const Detector& detector);

/// Asks for a verdict on one record. Throws on every failure; agent-loop
/// failures arrive as AgentFailure with the partial run.
Detection detect(const SnippetRecord& record, const std::filesystem::path& root, const Detector& detector);

/// What happened to one record under one configuration.
struct RecordOutcome {
    std::string id;
    bool is_misuse = false;
    std::optional<Verdict> verdict;
    std::optional<FixOutcome> fix;
    /// First failure while judging or validating, as CODE and message.
    std::optional<std::string> error_code;
    std::optional<std::string> error_detail;
    CallLog calls;
    int model_turns = 0;

    bool flagged() const noexcept { return verdict && verdict->flags_misuse(); }
    bool fixed() const noexcept { return fix && fix->classification == FixClass::Fixed; }
};

/// detect() plus fix validation for flagged misuses; never throws for
/// record-level problems, which end up in error_code/error_detail.
RecordOutcome evaluate_record(const SnippetRecord& record, const std::filesystem::path& root,
                              const Detector& detector);

enum class Subset { All, WithDirective, DataDependent };

std::string_view to_string(Subset subset);
Subset subset_from_string(std::string_view text);

/// Records of the subset, in dataset order.
Dataset select_subset(const Dataset& dataset, Subset subset);

struct ProviderSpec {
    std::string kind = "replay";  // "replay" or "http"
    std::filesystem::path transcripts;
    std::optional<std::string> api_base;
    std::optional<std::filesystem::path> record_dir;  // http only: save transcripts here
};

struct ExecutionSpec {
    std::string kind = "live";  // "live", "replay" or "none"
    std::filesystem::path transcript;  // replay: read; live: written when set
    std::optional<std::string> interpreter;
    std::optional<std::filesystem::path> shim;
};

/// One named detector configuration of an evaluation file.
struct ConfigurationSpec {
    std::string name;
    DetectorMode mode = DetectorMode::Prompt;
    PromptVariant variant = PromptVariant::Base;
    GenerationParams params;
    int max_iterations = 8;
    bool allow_unlimited_calls = true;
    DataSource data_source = DataSource::Auto;
    ProviderSpec provider;
    ExecutionSpec execution;
    std::optional<std::filesystem::path> docs;
    std::optional<std::filesystem::path> exemplars;
    std::optional<std::filesystem::path> prompt_template;
    std::optional<std::filesystem::path> adjudications;
    std::optional<AdjudicationMode> adjudication_mode;
};

struct EvalConfig {
    std::vector<ConfigurationSpec> configurations;
    BootstrapOptions bootstrap;
    Subset subset = Subset::All;
    int patch_fuzz = 3;
    std::chrono::milliseconds timeout = kDefaultTimeout;
    /// SHA-256 of the normalized configuration JSON.
    std::string digest;
};

/// Parses an evaluation file; relative paths resolve against `base_dir`.
EvalConfig parse_eval_config(std::string_view text, const std::filesystem::path& base_dir);
EvalConfig load_eval_config(const std::filesystem::path& path);

/// Builds the provider, executor, index and exemplars a configuration names.
struct EvalEnvironment {
    std::function<std::shared_ptr<ChatProvider>(const ConfigurationSpec&)> make_provider;
    std::function<std::shared_ptr<Executor>(const ConfigurationSpec&)> make_executor;
};

/// Providers and executors as the specs describe them.
EvalEnvironment default_environment();

struct EvalOptions {
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    /// Used for configurations without an adjudication file of their own.
    std::optional<Adjudication> adjudication;
    /// Overrides every configuration's mode. Default: STRICT when an
    /// adjudication is available, RAW otherwise.
    std::optional<AdjudicationMode> adjudication_mode;
};

struct ConfigurationResult {
    std::string name;
    std::string description;
    AdjudicationMode adjudication_mode = AdjudicationMode::Raw;
    ConfusionCounts counts;
    DetectionMetrics metrics;
    std::size_t fixed = 0;
    double fix_rate = 0.0;
    std::size_t failures = 0;
    std::vector<RecordOutcome> records;
    std::vector<double> bootstrap_f1;
    std::vector<double> bootstrap_fix_rate;
};

struct NormalityCheck {
    std::string configuration;
    std::string metric;
    std::optional<ShapiroWilk> result;
    std::string error;  // set when the test could not be computed
};

struct PairwiseComparison {
    std::string metric;
    std::string first;
    std::string second;
    DunnComparison test;
};

struct EvalReport {
    std::string config_digest;
    std::string dataset_digest;
    Subset subset = Subset::All;
    std::size_t record_count = 0;
    std::size_t misuse_count = 0;
    std::uint64_t seed = 0;
    BootstrapOptions bootstrap;
    std::vector<ConfigurationResult> configurations;
    std::vector<NormalityCheck> normality;
    std::vector<PairwiseComparison> comparisons;
    std::vector<std::string> comparison_errors;
};

/// Runs every configuration over the selected records, then aggregates,
/// resamples and compares. Record-level failures are outcomes; aggregate
/// problems (missing adjudications, unknown libraries, bad files) throw.
EvalReport evaluate(const Dataset& dataset, const EvalConfig& config, const EvalOptions& options,
                    const EvalEnvironment& environment = default_environment());

/// Deterministic structured form; equal reports dump to equal bytes.
Json report_to_json(const EvalReport& report);

/// Metric rows (P, R, F1, fix rate), one line per configuration under each,
/// followed by the pairwise comparisons.
std::string render_report_table(const EvalReport& report);

}  // namespace dschecker
