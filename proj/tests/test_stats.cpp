#include "support.hpp"

#include "dschecker/metrics.hpp"
#include "dschecker/stats.hpp"

#include <cmath>

using namespace test;

namespace {

const Json& reference()
{
    static const Json j = Json::parse(read_text_file(fixture("stats/reference.json")));
    return j;
}

const Json& bootstrap_reference()
{
    static const Json j = Json::parse(read_text_file(fixture("stats/bootstrap_reference.json")));
    return j;
}

// Same population as the bootstrap oracle: (is_misuse, flagged, true_positive, fixed).
const std::vector<RecordScore> kPopulation{
    {true, true, true, true},   {true, true, true, false}, {true, true, false, false}, {true, false, false, false},
    {false, true, false, false}, {false, false, false, false}, {false, false, false, false},
    {true, true, true, true},   {false, true, false, false}, {true, false, false, false},
};

Dataset two_misuses_one_correct()
{
    Dataset d;
    SnippetRecord a, b, c;
    a.id = "a";
    a.ground_truth = GroundTruth::Misuse;
    b.id = "b";
    b.ground_truth = GroundTruth::Misuse;
    c.id = "c";
    d.records = {a, b, c};
    return d;
}

}  // namespace

TEST_CASE("detection metrics and their zero conventions")
{
    auto m = detection_metrics({21, 46, 39, 76});
    CHECK(m.precision == doctest::Approx(21.0 / 46));
    CHECK(m.recall == doctest::Approx(21.0 / 39));
    CHECK(m.f1 == doctest::Approx(2.0 * 21 / (46 + 39)));

    auto none = detection_metrics({0, 0, 39, 76});
    CHECK(none.precision == 0.0);
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);

    CHECK(error_code_of([] { detection_metrics({0, 3, 0, 3}); }) == ErrorCode::EmptyDataset);
    CHECK(error_code_of([] { fix_rate(0, 0); }) == ErrorCode::EmptyDataset);
    CHECK(fix_rate(19, 38) == 0.5);
}

TEST_CASE("adjudicated counts")
{
    const auto d = two_misuses_one_correct();
    const std::vector<DetectionOutcome> outcomes{{"a", true}, {"b", true}, {"c", true}};

    CHECK(adjudicated_counts(outcomes, d, nullptr, AdjudicationMode::Raw) == ConfusionCounts{2, 3, 2, 3});

    Adjudication adj{{"a", true}, {"b", false}};
    CHECK(adjudicated_counts(outcomes, d, &adj, AdjudicationMode::Strict) == ConfusionCounts{1, 3, 2, 3});
    CHECK(adjudicated_counts(outcomes, d, &adj, AdjudicationMode::Raw) == ConfusionCounts{2, 3, 2, 3});

    Adjudication partial{{"a", true}};
    try {
        adjudicated_counts(outcomes, d, &partial, AdjudicationMode::Strict);
        FAIL("expected MISSING_ADJUDICATION");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingAdjudication);
        CHECK(e.detail().find("b") != std::string::npos);
    }
    CHECK(error_code_of([&] { adjudicated_counts(outcomes, d, nullptr, AdjudicationMode::Strict); }) ==
          ErrorCode::MissingAdjudication);
    // Unflagged misuses need no judgement.
    const std::vector<DetectionOutcome> quiet{{"a", true}, {"b", false}, {"c", false}};
    CHECK(adjudicated_counts(quiet, d, &partial, AdjudicationMode::Strict) == ConfusionCounts{1, 1, 2, 3});
}

TEST_CASE("adjudication files")
{
    auto a = load_adjudication(smoke_dir() / "adjudications.json");
    CHECK(a == Adjudication{{kMisuseId, true}});
    CHECK(error_code_of([] { parse_adjudication("[true]"); }) == ErrorCode::ConfigSyntax);
    CHECK(error_code_of([] { parse_adjudication("{\"a\": \"yes\"}"); }) == ErrorCode::ConfigSyntax);
    CHECK(adjudication_mode_from_string("strict") == AdjudicationMode::Strict);
    CHECK(adjudication_mode_from_string("RAW") == AdjudicationMode::Raw);
}

TEST_CASE("Shapiro-Wilk agrees with the reference implementation")
{
    for (const auto& s : reference()["shapiro"]) {
        CAPTURE(s["name"].get<std::string>());
        auto xs = s["values"].get<std::vector<double>>();
        auto r = shapiro_wilk(xs);
        CHECK(std::abs(r.w - s["w"].get<double>()) <= 1e-6);
        CHECK(std::abs(r.p - s["p"].get<double>()) <= 1e-6);

        std::reverse(xs.begin(), xs.end());
        auto again = shapiro_wilk(xs);
        CHECK(again.w == doctest::Approx(r.w).epsilon(1e-12));
    }
}

TEST_CASE("Shapiro-Wilk input checks")
{
    CHECK(error_code_of([] { shapiro_wilk(std::vector<double>{1, 2}); }) == ErrorCode::SampleSize);
    CHECK(error_code_of([] { shapiro_wilk(std::vector<double>(5001, 1.0)); }) == ErrorCode::SampleSize);
    CHECK(error_code_of([] { shapiro_wilk(std::vector<double>{0.5, 0.5, 0.5, 0.5}); }) ==
          ErrorCode::DegenerateSample);
}

TEST_CASE("Dunn's test agrees with the reference implementation")
{
    for (const auto& set : reference()["dunn"]) {
        CAPTURE(set["name"].get<std::string>());
        auto groups = set["groups"].get<std::vector<std::vector<double>>>();
        auto result = dunn_test(groups);
        const auto& pairs = set["pairs"];
        REQUIRE(result.size() == pairs.size());
        for (std::size_t k = 0; k < result.size(); ++k) {
            CHECK(result[k].i == pairs[k]["i"].get<std::size_t>());
            CHECK(result[k].j == pairs[k]["j"].get<std::size_t>());
            CHECK(std::abs(result[k].p_raw - pairs[k]["p_raw"].get<double>()) <= 1e-4);
            CHECK(std::abs(result[k].p_adjusted - pairs[k]["p_adjusted"].get<double>()) <= 1e-4);
            CHECK(result[k].significant == (result[k].p_adjusted < kSignificanceLevel));
        }
    }
}

TEST_CASE("Dunn's test is rank-based")
{
    std::vector<std::vector<double>> groups{{0.1, 0.4, 0.4, 0.7}, {0.2, 0.5, 0.9}, {0.3, 0.3, 0.8, 0.95, 0.6}};
    auto base = dunn_test(groups);
    auto shifted = groups;
    for (auto& g : shifted)
        for (auto& x : g)
            x = 3.0 * x + 10.0;
    auto moved = dunn_test(shifted);
    REQUIRE(base.size() == 3);
    for (std::size_t k = 0; k < base.size(); ++k) {
        CHECK(moved[k].z == doctest::Approx(base[k].z));
        CHECK(moved[k].p_adjusted == doctest::Approx(base[k].p_adjusted));
        CHECK(base[k].p_adjusted == doctest::Approx(std::min(1.0, 3 * base[k].p_raw)));
    }

    auto same = dunn_test({{0.5, 0.5}, {0.5, 0.5, 0.5}});
    CHECK(same[0].z == 0.0);
    CHECK(same[0].p_adjusted == 1.0);

    CHECK(error_code_of([] { dunn_test({{1.0, 2.0}, {3.0}}); }) == ErrorCode::GroupTooSmall);
    CHECK(error_code_of([] { dunn_test({{1.0, 2.0}}); }) == ErrorCode::GroupTooSmall);
}

TEST_CASE("sample statistics")
{
    // 6 flagged, 6 misuses, 3 true positives.
    CHECK(sample_f1(kPopulation) == doctest::Approx(0.5));
    CHECK(sample_fix_rate(kPopulation) == doctest::Approx(2.0 / 6));
    std::vector<RecordScore> clean(3);
    CHECK(sample_f1(clean) == 0.0);
    CHECK(sample_fix_rate(clean) == 0.0);
}

TEST_CASE("bootstrap draws match the independent oracle")
{
    const auto& ref = bootstrap_reference();
    auto with = bootstrap(kPopulation, {20, 50, true}, 7, {sample_f1, sample_fix_rate});
    CHECK(with[0] == ref["with_replacement"]["f1"].get<std::vector<double>>());
    CHECK(with[1] == ref["with_replacement"]["fix_rate"].get<std::vector<double>>());

    auto without = bootstrap(kPopulation, {5, 50, false}, 7, {sample_f1, sample_fix_rate});
    CHECK(without[0] == ref["without_replacement"]["f1"].get<std::vector<double>>());
    CHECK(without[1] == ref["without_replacement"]["fix_rate"].get<std::vector<double>>());

    CHECK(bootstrap(kPopulation, {20, 50, true}, 7, {sample_f1}) == std::vector<std::vector<double>>{with[0]});
    CHECK(bootstrap(kPopulation, {20, 50, true}, 8, {sample_f1})[0] != with[0]);
}

TEST_CASE("bootstrap input checks")
{
    CHECK(error_code_of([] { bootstrap(kPopulation, {11, 50, false}, 7, {sample_f1}); }) == ErrorCode::SampleSize);
    CHECK(error_code_of([] { bootstrap({}, {5, 50, true}, 7, {sample_f1}); }) == ErrorCode::EmptyDataset);
    CHECK(error_code_of([] { bootstrap(kPopulation, {0, 50, true}, 7, {sample_f1}); }) == ErrorCode::SampleSize);
}
