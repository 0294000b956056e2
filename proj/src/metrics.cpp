#include "dschecker/metrics.hpp"

#include "dschecker/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>

namespace dschecker {

DetectionMetrics detection_metrics(const ConfusionCounts& counts)
{
    if (counts.total_misuses == 0)
        fail(ErrorCode::EmptyDataset, "no misuses to measure recall against");
    DetectionMetrics m;
    m.precision = counts.flagged ? static_cast<double>(counts.tp) / static_cast<double>(counts.flagged) : 0.0;
    m.recall = static_cast<double>(counts.tp) / static_cast<double>(counts.total_misuses);
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

double fix_rate(std::size_t correct_patches, std::size_t total_misuses)
{
    if (total_misuses == 0)
        fail(ErrorCode::EmptyDataset, "no misuses to compute a fix rate over");
    return static_cast<double>(correct_patches) / static_cast<double>(total_misuses);
}

Adjudication parse_adjudication(std::string_view text)
{
    Adjudication out;
    try {
        auto j = Json::parse(text);
        if (!j.is_object())
            fail(ErrorCode::ConfigSyntax, "adjudication file must be a JSON object of id -> boolean");
        for (const auto& [id, valid] : j.items()) {
            if (!valid.is_boolean())
                fail(ErrorCode::ConfigSyntax, fmt::format("adjudication for '{}' must be true or false", id));
            out.emplace(id, valid.get<bool>());
        }
    } catch (const Json::exception& e) {
        fail(ErrorCode::ConfigSyntax, fmt::format("adjudication file: {}", e.what()));
    }
    return out;
}

Adjudication load_adjudication(const std::filesystem::path& path)
{
    if (!std::filesystem::is_regular_file(path))
        fail(ErrorCode::MissingFile, fmt::format("adjudication file '{}' not found", path.string()));
    return parse_adjudication(read_text_file(path));
}

std::string_view to_string(AdjudicationMode mode)
{
    return mode == AdjudicationMode::Strict ? "strict" : "raw";
}

AdjudicationMode adjudication_mode_from_string(std::string_view text)
{
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "strict")
        return AdjudicationMode::Strict;
    if (lower == "raw")
        return AdjudicationMode::Raw;
    fail(ErrorCode::ConfigSyntax, fmt::format("unknown adjudication mode '{}'", text));
}

ConfusionCounts adjudicated_counts(std::span<const DetectionOutcome> outcomes, const Dataset& dataset,
                                   const Adjudication* adjudication, AdjudicationMode mode)
{
    ConfusionCounts counts;
    counts.total_records = dataset.records.size();
    counts.total_misuses = dataset.misuse_count();

    if (adjudication) {
        for (const auto& [id, valid] : *adjudication)
            if (!dataset.find(id))
                fail(ErrorCode::InvariantViolation, fmt::format("adjudication names unknown record '{}'", id));
    }

    std::vector<std::string> missing;
    for (const auto& o : outcomes) {
        const auto* record = dataset.find(o.id);
        if (!record)
            fail(ErrorCode::InvariantViolation, fmt::format("outcome for unknown record '{}'", o.id));
        if (!o.flagged)
            continue;
        ++counts.flagged;
        if (!record->is_misuse())
            continue;
        if (mode == AdjudicationMode::Raw) {
            ++counts.tp;
            continue;
        }
        const auto it = adjudication ? adjudication->find(o.id) : Adjudication::const_iterator{};
        if (!adjudication || it == adjudication->end()) {
            missing.push_back(o.id);
            continue;
        }
        if (it->second)
            ++counts.tp;
    }
    if (!missing.empty())
        fail(ErrorCode::MissingAdjudication,
             fmt::format("no adjudication for flagged misuse(s): {}", fmt::join(missing, ", ")));
    return counts;
}

}  // namespace dschecker
