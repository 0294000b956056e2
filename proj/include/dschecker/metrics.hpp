#pragma once

#include "dschecker/dataset.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dschecker {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t flagged = 0;
    std::size_t total_misuses = 0;
    std::size_t total_records = 0;

    bool operator==(const ConfusionCounts&) const = default;
};

struct DetectionMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// P = tp/flagged (0 when nothing is flagged), R = tp/misuses,
/// F1 = 2PR/(P+R) (0 when P+R = 0). EMPTY_DATASET when there are no misuses.
DetectionMetrics detection_metrics(const ConfusionCounts& counts);

/// correct_patches / total_misuses; EMPTY_DATASET when there are no misuses.
double fix_rate(std::size_t correct_patches, std::size_t total_misuses);

/// Human judgement per record id: does the explanation describe the real misuse?
using Adjudication = std::map<std::string, bool, std::less<>>;

/// Reads a JSON object {"<id>": true|false, ...}.
Adjudication load_adjudication(const std::filesystem::path& path);
Adjudication parse_adjudication(std::string_view text);

enum class AdjudicationMode { Strict, Raw };

std::string_view to_string(AdjudicationMode mode);
AdjudicationMode adjudication_mode_from_string(std::string_view text);

struct DetectionOutcome {
    std::string id;
    bool flagged = false;  // verdict was "no"
};

/// flagged = verdicts "no"; tp counts flagged misuses, and in STRICT mode
/// only those whose explanation was adjudicated valid. STRICT without an
/// entry for a flagged misuse is MISSING_ADJUDICATION (all ids listed).
ConfusionCounts adjudicated_counts(std::span<const DetectionOutcome> outcomes, const Dataset& dataset,
                                   const Adjudication* adjudication, AdjudicationMode mode);

}  // namespace dschecker
