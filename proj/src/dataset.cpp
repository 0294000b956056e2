#include "dschecker/dataset.hpp"

#include "dschecker/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace dschecker {

namespace {

[[noreturn]] void record_error(ErrorCode code, const SnippetRecord& record, std::string_view field,
                               std::string_view what)
{
    fail(code, fmt::format("record '{}' field '{}': {}", record.id, field, what));
}

bool is_identifier_char(char c)
{
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

}  // namespace

const SnippetRecord* Dataset::find(std::string_view id) const
{
    auto it = std::find_if(records.begin(), records.end(), [&](const auto& r) { return r.id == id; });
    return it == records.end() ? nullptr : &*it;
}

std::size_t Dataset::misuse_count() const
{
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [](const auto& r) { return r.is_misuse(); }));
}

std::string read_text_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorCode::MissingFile, fmt::format("cannot read '{}'", path.string()));
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::size_t line_count(std::string_view text)
{
    if (text.empty())
        return 0;
    auto n = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
    return text.back() == '\n' ? n : n + 1;
}

bool identifier_occurs(std::string_view source, std::string_view name)
{
    if (name.empty())
        return false;
    for (auto pos = source.find(name); pos != std::string_view::npos; pos = source.find(name, pos + 1)) {
        bool left_ok = pos == 0 || !is_identifier_char(source[pos - 1]);
        auto end = pos + name.size();
        bool right_ok = end == source.size() || !is_identifier_char(source[end]);
        if (left_ok && right_ok)
            return true;
    }
    return false;
}

void validate_record(const SnippetRecord& record, const fs::path& root)
{
    if (record.id.empty())
        fail(ErrorCode::InvariantViolation, "record with empty id");
    if (record.library.empty())
        record_error(ErrorCode::InvariantViolation, record, "library", "must not be empty");
    if (record.target_api.empty())
        record_error(ErrorCode::InvariantViolation, record, "target_api", "must not be empty");

    if (!fs::is_regular_file(root / record.snippet_path))
        record_error(ErrorCode::MissingFile, record, "snippet_path",
                     fmt::format("'{}' does not exist", record.snippet_path));
    for (const auto& data : record.data_files)
        if (!fs::is_regular_file(root / data))
            record_error(ErrorCode::MissingFile, record, "data_files", fmt::format("'{}' does not exist", data));

    if (record.ground_truth == GroundTruth::Correct) {
        if (!record.misuse_description.empty())
            record_error(ErrorCode::InvariantViolation, record, "misuse_description",
                         "must be empty for a CORRECT record");
        if (record.expectation.error_signature)
            record_error(ErrorCode::InvariantViolation, record, "expectation.error_signature",
                         "must be absent for a CORRECT record");
    } else if (record.expectation.empty()) {
        record_error(ErrorCode::InvariantViolation, record, "expectation",
                     "a MISUSE record needs error_signature or output_check");
    }

    for (const auto& d : record.directives)
        if (d.text.empty())
            record_error(ErrorCode::InvariantViolation, record, "directives", "directive text is empty");

    const auto lines = line_count(record.source);
    for (const auto& probe : record.probe_targets) {
        if (probe.line_number < 1 || static_cast<std::size_t>(probe.line_number) > lines)
            record_error(ErrorCode::InvariantViolation, record, "probe_targets",
                         fmt::format("line {} outside snippet of {} lines", probe.line_number, lines));
        if (!identifier_occurs(record.source, probe.variable_name))
            record_error(ErrorCode::InvariantViolation, record, "probe_targets",
                         fmt::format("variable '{}' does not occur in the snippet", probe.variable_name));
    }
    for (const auto& info : record.recorded_data) {
        try {
            validate(info);
        } catch (const Error& e) {
            record_error(ErrorCode::InvariantViolation, record, "recorded_data", e.detail());
        }
    }
}

Dataset parse_dataset(std::string_view manifest_text, const fs::path& root)
{
    Dataset dataset;
    dataset.root = root;
    std::set<std::string, std::less<>> seen;

    std::istringstream in{std::string(manifest_text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos)
            continue;

        SnippetRecord record;
        try {
            record = Json::parse(line).get<SnippetRecord>();
        } catch (const Json::exception& e) {
            fail(ErrorCode::ManifestSyntax, fmt::format("manifest line {}: {}", line_no, e.what()));
        } catch (const Error& e) {
            fail(ErrorCode::ManifestSyntax, fmt::format("manifest line {}: {}", line_no, e.what()));
        }

        if (!seen.insert(record.id).second)
            fail(ErrorCode::DuplicateId, fmt::format("manifest line {}: duplicate id '{}'", line_no, record.id));

        if (fs::is_regular_file(root / record.snippet_path))
            record.source = read_text_file(root / record.snippet_path);
        validate_record(record, root);
        dataset.records.push_back(std::move(record));
    }
    return dataset;
}

Dataset load_dataset(const fs::path& manifest_path)
{
    if (!fs::is_regular_file(manifest_path))
        fail(ErrorCode::MissingFile, fmt::format("manifest '{}' does not exist", manifest_path.string()));
    auto root = manifest_path.parent_path();
    if (root.empty())
        root = ".";
    return parse_dataset(read_text_file(manifest_path), root);
}

std::string serialize_dataset(const Dataset& dataset)
{
    std::string out;
    for (const auto& record : dataset.records) {
        out += Json(record).dump();
        out += '\n';
    }
    return out;
}

}  // namespace dschecker
