#include "dschecker/model.hpp"

#include "dschecker/error.hpp"

#include <fmt/format.h>

namespace dschecker {

namespace {

template <typename T>
void put_optional(Json& j, const char* key, const std::optional<T>& value)
{
    if (value)
        j[key] = *value;
}

template <typename T>
std::optional<T> get_optional(const Json& j, const char* key)
{
    auto it = j.find(key);
    if (it == j.end() || it->is_null())
        return std::nullopt;
    return it->get<T>();
}

}  // namespace

void GenerationParams::validate() const
{
    if (!(temperature >= 0.0 && temperature <= 2.0))
        fail(ErrorCode::InvariantViolation, fmt::format("temperature {} outside [0, 2]", temperature));
    if (max_output_tokens <= 0)
        fail(ErrorCode::InvariantViolation, "max_output_tokens must be positive");
}

std::string_view to_string(DataKind kind)
{
    switch (kind) {
    case DataKind::Frame: return "FRAME";
    case DataKind::NdArray: return "NDARRAY";
    case DataKind::Sequence: return "SEQUENCE";
    case DataKind::Other: return "OTHER";
    }
    return "OTHER";
}

std::string_view to_string(GroundTruth truth)
{
    return truth == GroundTruth::Misuse ? "MISUSE" : "CORRECT";
}

std::string_view to_string(OutputCheckMode mode)
{
    switch (mode) {
    case OutputCheckMode::StdoutContains: return "STDOUT_CONTAINS";
    case OutputCheckMode::StdoutNotContains: return "STDOUT_NOT_CONTAINS";
    case OutputCheckMode::CheckerScript: return "CHECKER_SCRIPT";
    }
    return "STDOUT_CONTAINS";
}

std::string_view to_string(Answer answer)
{
    return answer == Answer::Yes ? "yes" : "no";
}

DataKind data_kind_from_string(std::string_view text)
{
    if (text == "FRAME") return DataKind::Frame;
    if (text == "NDARRAY") return DataKind::NdArray;
    if (text == "SEQUENCE") return DataKind::Sequence;
    if (text == "OTHER") return DataKind::Other;
    fail(ErrorCode::InvariantViolation, fmt::format("unknown data kind '{}'", text));
}

GroundTruth ground_truth_from_string(std::string_view text)
{
    if (text == "MISUSE") return GroundTruth::Misuse;
    if (text == "CORRECT") return GroundTruth::Correct;
    fail(ErrorCode::InvariantViolation, fmt::format("unknown ground_truth '{}'", text));
}

OutputCheckMode output_check_mode_from_string(std::string_view text)
{
    if (text == "STDOUT_CONTAINS") return OutputCheckMode::StdoutContains;
    if (text == "STDOUT_NOT_CONTAINS") return OutputCheckMode::StdoutNotContains;
    if (text == "CHECKER_SCRIPT") return OutputCheckMode::CheckerScript;
    fail(ErrorCode::InvariantViolation, fmt::format("unknown output_check mode '{}'", text));
}

void to_json(Json& j, const ProbeTarget& v)
{
    j = Json{{"variable_name", v.variable_name}, {"line_number", v.line_number}};
}

void from_json(const Json& j, ProbeTarget& v)
{
    j.at("variable_name").get_to(v.variable_name);
    const auto& line = j.at("line_number");
    if (!line.is_number_integer())
        fail(ErrorCode::InvariantViolation, "line_number must be an integer");
    v.line_number = line.get<int>();
}

void to_json(Json& j, const DataInfo& v)
{
    j = Json{{"variable_name", v.target.variable_name},
             {"line_number", v.target.line_number},
             {"kind", to_string(v.kind())},
             {"type_name", v.type_name}};
    std::visit(
        [&j](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, FrameDetail>) {
                auto cols = Json::array();
                for (const auto& c : d.columns)
                    cols.push_back({{"name", c.name}, {"dtype", c.dtype}, {"non_null", c.non_null}});
                j["columns"] = std::move(cols);
                j["row_count"] = d.row_count;
                j["sample_rows"] = d.sample_rows;
            } else if constexpr (std::is_same_v<T, ArrayDetail>) {
                j["shape"] = d.shape;
                j["dtype"] = d.dtype;
            } else if constexpr (std::is_same_v<T, SequenceDetail>) {
                j["length"] = d.length;
            }
        },
        v.detail);
}

void from_json(const Json& j, DataInfo& v)
{
    from_json(j, v.target);
    j.at("type_name").get_to(v.type_name);
    switch (data_kind_from_string(j.at("kind").get<std::string>())) {
    case DataKind::Frame: {
        FrameDetail d;
        for (const auto& c : j.at("columns"))
            d.columns.push_back({c.at("name").get<std::string>(), c.at("dtype").get<std::string>(),
                                 c.at("non_null").get<std::int64_t>()});
        j.at("row_count").get_to(d.row_count);
        j.at("sample_rows").get_to(d.sample_rows);
        v.detail = std::move(d);
        break;
    }
    case DataKind::NdArray: {
        ArrayDetail d;
        j.at("shape").get_to(d.shape);
        j.at("dtype").get_to(d.dtype);
        v.detail = std::move(d);
        break;
    }
    case DataKind::Sequence:
        v.detail = SequenceDetail{j.at("length").get<std::int64_t>()};
        break;
    case DataKind::Other:
        v.detail = OtherDetail{};
        break;
    }
    validate(v);
}

void validate(const DataInfo& info)
{
    if (info.target.line_number < 1)
        fail(ErrorCode::InvariantViolation,
             fmt::format("probe of '{}' has non-positive line {}", info.target.variable_name,
                         info.target.line_number));
    if (const auto* frame = std::get_if<FrameDetail>(&info.detail)) {
        if (frame->sample_rows.size() > 3)
            fail(ErrorCode::InvariantViolation,
                 fmt::format("frame '{}' carries {} sample rows (max 3)", info.target.variable_name,
                             frame->sample_rows.size()));
        if (frame->row_count < 0)
            fail(ErrorCode::InvariantViolation, "negative row_count");
    } else if (const auto* array = std::get_if<ArrayDetail>(&info.detail)) {
        for (auto dim : array->shape)
            if (dim < 0)
                fail(ErrorCode::InvariantViolation,
                     fmt::format("array '{}' has a negative dimension", info.target.variable_name));
    } else if (const auto* seq = std::get_if<SequenceDetail>(&info.detail)) {
        if (seq->length < 0)
            fail(ErrorCode::InvariantViolation, "negative sequence length");
    }
}

void to_json(Json& j, const Directive& v)
{
    j = Json{{"api", v.api}, {"text", v.text}};
    put_optional(j, "parameter", v.parameter);
    put_optional(j, "source_url", v.source_url);
}

void from_json(const Json& j, Directive& v)
{
    v.api = j.value("api", std::string{});
    j.at("text").get_to(v.text);
    v.parameter = get_optional<std::string>(j, "parameter");
    v.source_url = get_optional<std::string>(j, "source_url");
}

void to_json(Json& j, const Expectation& v)
{
    j = Json::object();
    if (v.error_signature) {
        Json sig{{"exception_class", v.error_signature->exception_class}};
        put_optional(sig, "message_substring", v.error_signature->message_substring);
        j["error_signature"] = std::move(sig);
    }
    if (v.output_check)
        j["output_check"] = {{"mode", to_string(v.output_check->mode)}, {"value", v.output_check->value}};
}

void from_json(const Json& j, Expectation& v)
{
    v = {};
    if (auto it = j.find("error_signature"); it != j.end() && !it->is_null()) {
        ErrorSignature sig;
        it->at("exception_class").get_to(sig.exception_class);
        sig.message_substring = get_optional<std::string>(*it, "message_substring");
        v.error_signature = std::move(sig);
    }
    if (auto it = j.find("output_check"); it != j.end() && !it->is_null()) {
        OutputCheck check;
        check.mode = output_check_mode_from_string(it->at("mode").get<std::string>());
        it->at("value").get_to(check.value);
        v.output_check = std::move(check);
    }
}

void to_json(Json& j, const SnippetRecord& v)
{
    j = Json{{"id", v.id},
             {"library", v.library},
             {"snippet_path", v.snippet_path},
             {"data_files", v.data_files},
             {"target_api", v.target_api},
             {"directives", v.directives},
             {"probe_targets", v.probe_targets},
             {"data_dependent", v.data_dependent},
             {"ground_truth", to_string(v.ground_truth)},
             {"misuse_description", v.misuse_description},
             {"expectation", v.expectation}};
    if (!v.recorded_data.empty())
        j["recorded_data"] = v.recorded_data;
}

void from_json(const Json& j, SnippetRecord& v)
{
    j.at("id").get_to(v.id);
    j.at("library").get_to(v.library);
    j.at("snippet_path").get_to(v.snippet_path);
    v.data_files = j.value("data_files", std::vector<std::string>{});
    j.at("target_api").get_to(v.target_api);
    v.directives = j.value("directives", std::vector<Directive>{});
    v.probe_targets = j.value("probe_targets", std::vector<ProbeTarget>{});
    v.data_dependent = j.value("data_dependent", false);
    v.ground_truth = ground_truth_from_string(j.at("ground_truth").get<std::string>());
    v.misuse_description = j.value("misuse_description", std::string{});
    v.expectation = j.value("expectation", Expectation{});
    v.recorded_data = j.value("recorded_data", std::vector<DataInfo>{});
}

void to_json(Json& j, const GenerationParams& v)
{
    j = Json{{"model_name", v.model_name},
             {"temperature", v.temperature},
             {"max_output_tokens", v.max_output_tokens}};
}

void from_json(const Json& j, GenerationParams& v)
{
    v.model_name = j.value("model_name", std::string{});
    v.temperature = j.value("temperature", 0.0);
    v.max_output_tokens = j.value("max_output_tokens", 2048);
}

Json verdict_contract_json(const Verdict& verdict)
{
    Json j{{"correct", to_string(verdict.correct)}};
    if (verdict.flags_misuse()) {
        j["patch"] = verdict.patch.value_or("");
        j["explanation"] = verdict.explanation.value_or("");
    }
    return j;
}

}  // namespace dschecker
