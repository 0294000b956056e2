#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace dschecker {

struct ShapiroWilk {
    double w = 0.0;
    double p = 0.0;
};

/// Royston's AS R94 algorithm, 3 <= n <= 5000, with exact normal quantiles
/// for the expected order statistics. Input order does not matter.
/// Throws SAMPLE_SIZE or DEGENERATE_SAMPLE (all values equal).
ShapiroWilk shapiro_wilk(std::span<const double> xs);

struct DunnComparison {
    std::size_t i = 0;
    std::size_t j = 0;
    double z = 0.0;
    double p_raw = 1.0;
    double p_adjusted = 1.0;
    bool significant = false;
};

inline constexpr double kSignificanceLevel = 0.05;

/// Dunn's pairwise test on pooled mid-ranks with tie correction and
/// Bonferroni adjustment over k(k-1)/2 pairs. Pairs come in (0,1), (0,2), ...,
/// (k-2,k-1) order. Each group needs at least two values (GROUP_TOO_SMALL).
std::vector<DunnComparison> dunn_test(const std::vector<std::vector<double>>& groups);

/// One record's contribution to detection and fix counts.
struct RecordScore {
    bool is_misuse = false;
    bool flagged = false;
    bool true_positive = false;
    bool fixed = false;
};

using SampleStatistic = std::function<double(std::span<const RecordScore>)>;

/// F1 of the sample with the zero conventions of detection_metrics, except
/// that a sample without misuses has recall 0 instead of failing.
double sample_f1(std::span<const RecordScore> sample);
/// fixed / misuses in the sample; 0 when the sample has no misuses.
double sample_fix_rate(std::span<const RecordScore> sample);

struct BootstrapOptions {
    std::size_t sample_size = 20;
    std::size_t resamples = 50;
    bool with_replacement = true;
};

/// Seeded resampling with std::mt19937_64. A draw from n items is
/// floor(u * n / 2^64) for the next 64-bit output u; without replacement a
/// partial Fisher-Yates shuffle swaps position k with k + floor(u * (n-k) / 2^64).
/// Every statistic is evaluated on the same drawn samples; result[s][r] is
/// statistic s on resample r.
std::vector<std::vector<double>> bootstrap(std::span<const RecordScore> population, const BootstrapOptions& options,
                                           std::uint64_t seed, const std::vector<SampleStatistic>& statistics);

}  // namespace dschecker
