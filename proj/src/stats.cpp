#include "dschecker/stats.hpp"

#include "dschecker/error.hpp"

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace dschecker {

namespace {

/// c[0] + c[1] x + c[2] x^2 + ...
template <std::size_t N>
double poly(const double (&c)[N], double x)
{
    double r = 0.0;
    for (std::size_t k = N; k-- > 0;)
        r = r * x + c[k];
    return r;
}

double upper_normal_tail(double z)
{
    return 0.5 * std::erfc(z / std::sqrt(2.0));
}

double normal_quantile(double p)
{
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

std::uint64_t scaled_draw(std::mt19937_64& gen, std::uint64_t n)
{
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(gen()) * n) >> 64);
}

}  // namespace

ShapiroWilk shapiro_wilk(std::span<const double> xs)
{
    const std::size_t n = xs.size();
    if (n < 3 || n > 5000)
        fail(ErrorCode::SampleSize, fmt::format("Shapiro-Wilk needs 3 to 5000 values, got {}", n));

    std::vector<double> x(xs.begin(), xs.end());
    std::sort(x.begin(), x.end());
    const double range = x.back() - x.front();
    if (!(range > 1e-19))
        fail(ErrorCode::DegenerateSample, "all values are identical");

    // Coefficients a[0] >= a[1] >= ... for the nn2 extreme order-statistic pairs.
    static const double c1[] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
    static const double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
    const std::size_t nn2 = n / 2;
    const double an = static_cast<double>(n);
    std::vector<double> a(nn2);
    if (n == 3) {
        a[0] = std::sqrt(0.5);
    } else {
        const double an25 = an + 0.25;
        double summ2 = 0.0;
        for (std::size_t i = 1; i <= nn2; ++i) {
            a[i - 1] = normal_quantile((static_cast<double>(i) - 0.375) / an25);
            summ2 += a[i - 1] * a[i - 1];
        }
        summ2 *= 2.0;
        const double ssumm2 = std::sqrt(summ2);
        const double rsn = 1.0 / std::sqrt(an);
        const double a1 = poly(c1, rsn) - a[0] / ssumm2;
        std::size_t i1;
        double fac;
        if (n > 5) {
            i1 = 3;
            const double a2 = -a[1] / ssumm2 + poly(c2, rsn);
            fac = std::sqrt((summ2 - 2.0 * a[0] * a[0] - 2.0 * a[1] * a[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
            a[1] = a2;
        } else {
            i1 = 2;
            fac = std::sqrt((summ2 - 2.0 * a[0] * a[0]) / (1.0 - 2.0 * a1 * a1));
        }
        a[0] = a1;
        for (std::size_t i = i1; i <= nn2; ++i)
            a[i - 1] = -a[i - 1] / fac;
    }

    // W as the squared correlation between the scaled data and the coefficients.
    auto coefficient = [&](std::size_t i) {
        const std::size_t j = n - 1 - i;
        if (i == j)
            return 0.0;
        return i < j ? -a[i] : a[j];
    };
    double sa = 0.0, sx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sa += coefficient(i);
        sx += x[i] / range;
    }
    sa /= an;
    sx /= an;
    double ssa = 0.0, ssx = 0.0, sax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double asa = coefficient(i) - sa;
        const double xsx = x[i] / range - sx;
        ssa += asa * asa;
        ssx += xsx * xsx;
        sax += asa * xsx;
    }
    const double ssassx = std::sqrt(ssa * ssx);
    const double w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    ShapiroWilk result;
    result.w = 1.0 - w1;

    if (n == 3) {
        constexpr double pi6 = 1.90985931710274;   // 6 / pi
        constexpr double stqr = 1.04719755119660;  // pi / 3
        result.p = std::max(0.0, pi6 * (std::asin(std::sqrt(result.w)) - stqr));
        result.p = std::min(result.p, 1.0);
        return result;
    }
    if (w1 <= 0.0) {
        result.p = 1.0;
        return result;
    }

    static const double g[] = {-2.273, 0.459};
    static const double c3[] = {0.544, -0.39978, 0.025054, -6.714e-4};
    static const double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
    static const double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
    static const double c6[] = {-0.4803, -0.082676, 0.0030302};
    double y = std::log(w1);
    double m, s;
    if (n <= 11) {
        const double gamma = poly(g, an);
        if (y >= gamma) {
            result.p = 1e-99;
            return result;
        }
        y = -std::log(gamma - y);
        m = poly(c3, an);
        s = std::exp(poly(c4, an));
    } else {
        const double xx = std::log(an);
        m = poly(c5, xx);
        s = std::exp(poly(c6, xx));
    }
    result.p = upper_normal_tail((y - m) / s);
    return result;
}

std::vector<DunnComparison> dunn_test(const std::vector<std::vector<double>>& groups)
{
    const std::size_t k = groups.size();
    if (k < 2)
        fail(ErrorCode::GroupTooSmall, "Dunn's test needs at least two groups");
    for (std::size_t g = 0; g < k; ++g)
        if (groups[g].size() < 2)
            fail(ErrorCode::GroupTooSmall, fmt::format("group {} has {} value(s); at least 2 needed", g,
                                                       groups[g].size()));

    struct Item {
        double value;
        std::size_t group;
    };
    std::vector<Item> pooled;
    for (std::size_t g = 0; g < k; ++g)
        for (double v : groups[g])
            pooled.push_back({v, g});
    std::sort(pooled.begin(), pooled.end(), [](const Item& a, const Item& b) { return a.value < b.value; });

    const double N = static_cast<double>(pooled.size());
    std::vector<double> rank_sum(k, 0.0);
    double tie_term = 0.0;
    for (std::size_t start = 0; start < pooled.size();) {
        std::size_t end = start;
        while (end < pooled.size() && pooled[end].value == pooled[start].value)
            ++end;
        const double t = static_cast<double>(end - start);
        const double mid_rank = (static_cast<double>(start + 1) + static_cast<double>(end)) / 2.0;
        for (std::size_t i = start; i < end; ++i)
            rank_sum[pooled[i].group] += mid_rank;
        tie_term += t * t * t - t;
        start = end;
    }
    const double tie_correction = tie_term / (12.0 * (N - 1.0));
    const double variance_base = N * (N + 1.0) / 12.0 - tie_correction;
    const double pairs = static_cast<double>(k * (k - 1) / 2);

    std::vector<DunnComparison> out;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            const double ni = static_cast<double>(groups[i].size());
            const double nj = static_cast<double>(groups[j].size());
            const double se = std::sqrt(variance_base * (1.0 / ni + 1.0 / nj));
            DunnComparison c{i, j};
            if (se > 0.0) {
                c.z = (rank_sum[i] / ni - rank_sum[j] / nj) / se;
                c.p_raw = std::erfc(std::fabs(c.z) / std::sqrt(2.0));
            }
            c.p_adjusted = std::min(1.0, c.p_raw * pairs);
            c.significant = c.p_adjusted < kSignificanceLevel;
            out.push_back(c);
        }
    }
    return out;
}

double sample_f1(std::span<const RecordScore> sample)
{
    std::size_t tp = 0, flagged = 0, misuses = 0;
    for (const auto& r : sample) {
        tp += r.true_positive;
        flagged += r.flagged;
        misuses += r.is_misuse;
    }
    const double p = flagged ? static_cast<double>(tp) / static_cast<double>(flagged) : 0.0;
    const double r = misuses ? static_cast<double>(tp) / static_cast<double>(misuses) : 0.0;
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

double sample_fix_rate(std::span<const RecordScore> sample)
{
    std::size_t fixed = 0, misuses = 0;
    for (const auto& r : sample) {
        fixed += r.fixed;
        misuses += r.is_misuse;
    }
    return misuses ? static_cast<double>(fixed) / static_cast<double>(misuses) : 0.0;
}

std::vector<std::vector<double>> bootstrap(std::span<const RecordScore> population, const BootstrapOptions& options,
                                           std::uint64_t seed, const std::vector<SampleStatistic>& statistics)
{
    const std::size_t n = population.size();
    if (n == 0)
        fail(ErrorCode::EmptyDataset, "cannot resample an empty population");
    if (options.sample_size == 0)
        fail(ErrorCode::SampleSize, "bootstrap sample size must be at least 1");
    if (!options.with_replacement && options.sample_size > n)
        fail(ErrorCode::SampleSize, fmt::format("cannot draw {} of {} records without replacement",
                                                options.sample_size, n));

    std::mt19937_64 gen(seed);
    std::vector<std::vector<double>> out(statistics.size());
    std::vector<RecordScore> sample(options.sample_size);
    std::vector<std::size_t> order(n);
    for (std::size_t r = 0; r < options.resamples; ++r) {
        if (options.with_replacement) {
            for (auto& s : sample)
                s = population[scaled_draw(gen, n)];
        } else {
            std::iota(order.begin(), order.end(), std::size_t{0});
            for (std::size_t k = 0; k < options.sample_size; ++k) {
                const auto j = k + scaled_draw(gen, n - k);
                std::swap(order[k], order[j]);
                sample[k] = population[order[k]];
            }
        }
        for (std::size_t s = 0; s < statistics.size(); ++s)
            out[s].push_back(statistics[s](sample));
    }
    return out;
}

}  // namespace dschecker
