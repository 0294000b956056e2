#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace dschecker {

using Json = nlohmann::json;

/// A (variable, line) pair whose runtime value should be described to the model.
struct ProbeTarget {
    std::string variable_name;
    int line_number = 0;  // 1-based

    auto operator<=>(const ProbeTarget&) const = default;
};

enum class DataKind { Frame, NdArray, Sequence, Other };

struct FrameColumn {
    std::string name;
    std::string dtype;
    std::int64_t non_null = 0;

    bool operator==(const FrameColumn&) const = default;
};

struct FrameDetail {
    std::vector<FrameColumn> columns;
    std::int64_t row_count = 0;
    /// Whitespace-normalized head rows, at most three.
    std::vector<std::string> sample_rows;

    bool operator==(const FrameDetail&) const = default;
};

struct ArrayDetail {
    std::vector<std::int64_t> shape;
    std::string dtype;

    bool operator==(const ArrayDetail&) const = default;
};

struct SequenceDetail {
    std::int64_t length = 0;

    bool operator==(const SequenceDetail&) const = default;
};

struct OtherDetail {
    bool operator==(const OtherDetail&) const = default;
};

using DataDetail = std::variant<FrameDetail, ArrayDetail, SequenceDetail, OtherDetail>;

/// Runtime facts about one probed variable.
struct DataInfo {
    ProbeTarget target;
    std::string type_name;
    DataDetail detail = OtherDetail{};

    DataKind kind() const noexcept { return static_cast<DataKind>(detail.index()); }
    bool operator==(const DataInfo&) const = default;
};

struct Directive {
    std::string api;
    std::string text;
    std::optional<std::string> parameter;
    std::optional<std::string> source_url;

    bool operator==(const Directive&) const = default;
};

struct ErrorSignature {
    std::string exception_class;
    std::optional<std::string> message_substring;

    bool operator==(const ErrorSignature&) const = default;
};

enum class OutputCheckMode { StdoutContains, StdoutNotContains, CheckerScript };

struct OutputCheck {
    OutputCheckMode mode = OutputCheckMode::StdoutContains;
    /// Expected text, or the checker script path for CheckerScript.
    std::string value;

    bool operator==(const OutputCheck&) const = default;
};

/// How a misuse manifests, used to decide whether a patch fixed it.
struct Expectation {
    std::optional<ErrorSignature> error_signature;
    std::optional<OutputCheck> output_check;

    bool empty() const noexcept { return !error_signature && !output_check; }
    bool operator==(const Expectation&) const = default;
};

enum class GroundTruth { Misuse, Correct };

struct SnippetRecord {
    std::string id;
    std::string library;
    std::string snippet_path;             // relative to the manifest directory
    std::vector<std::string> data_files;  // relative to the manifest directory
    std::string target_api;
    std::vector<Directive> directives;
    std::vector<ProbeTarget> probe_targets;
    bool data_dependent = false;
    GroundTruth ground_truth = GroundTruth::Correct;
    std::string misuse_description;
    Expectation expectation;
    /// Probe output captured when the dataset was built; optional.
    std::vector<DataInfo> recorded_data;

    /// Snippet text, read at load time; not part of the manifest.
    std::string source;

    bool is_misuse() const noexcept { return ground_truth == GroundTruth::Misuse; }
    bool operator==(const SnippetRecord&) const = default;
};

enum class Answer { Yes, No };

/// The model's structured answer.
struct Verdict {
    Answer correct = Answer::Yes;
    std::optional<std::string> patch;
    std::optional<std::string> explanation;
    std::string raw;

    bool flags_misuse() const noexcept { return correct == Answer::No; }
    bool operator==(const Verdict&) const = default;
};

struct GenerationParams {
    std::string model_name;
    double temperature = 0.0;
    int max_output_tokens = 2048;

    /// Throws InvariantViolation when out of range.
    void validate() const;
    bool operator==(const GenerationParams&) const = default;
};

std::string_view to_string(DataKind kind);
std::string_view to_string(GroundTruth truth);
std::string_view to_string(OutputCheckMode mode);
std::string_view to_string(Answer answer);

DataKind data_kind_from_string(std::string_view text);
GroundTruth ground_truth_from_string(std::string_view text);
OutputCheckMode output_check_mode_from_string(std::string_view text);

// JSON forms. Parsing is strict: unknown enum spellings and wrong types throw
// nlohmann exceptions or dschecker::Error(InvariantViolation).
void to_json(Json& j, const ProbeTarget& v);
void from_json(const Json& j, ProbeTarget& v);
void to_json(Json& j, const DataInfo& v);
void from_json(const Json& j, DataInfo& v);
void to_json(Json& j, const Directive& v);
void from_json(const Json& j, Directive& v);
void to_json(Json& j, const Expectation& v);
void from_json(const Json& j, Expectation& v);
void to_json(Json& j, const SnippetRecord& v);
void from_json(const Json& j, SnippetRecord& v);
void to_json(Json& j, const GenerationParams& v);
void from_json(const Json& j, GenerationParams& v);

/// The verdict in the response contract form: {"correct": "no", "patch": ..., "explanation": ...}.
Json verdict_contract_json(const Verdict& verdict);

/// DataInfo invariants: sample rows <= 3, non-negative shape, positive line.
void validate(const DataInfo& info);

}  // namespace dschecker
