#include <random>
#include <sstream>

#include "crisisvit/report.hpp"
#include "doctest.h"
#include "stats_oracle.hpp"

using namespace crisisvit;

TEST_CASE("scorecard averages and display rounding") {
    const auto vit = scorecard_from_means("ViT-Base", {84.10, 86.59, 79.43, 77.18});
    CHECK(vit.avg == doctest::Approx(81.825).epsilon(1e-12));
    CHECK(std::abs(vit.avg - 81.82) <= 0.01);
    CHECK(format_fixed(vit.avg) == "81.83");
    const auto best = scorecard_from_means("best", {85.26, 87.97, 80.34, 78.72});
    CHECK(format_fixed(best.avg) == "83.07");
    CHECK(scorecard_from_means("zero", {0, 0, 0, 0}).avg == 0.0);
    CHECK(round_half_up(0.125) == 0.13);
    CHECK(round_half_up(2.675) == 2.68);

    const auto s = scorecard("sys", {{TaskId::disaster_types, {80, 82, 84}},
                                     {TaskId::informativeness, {90}},
                                     {TaskId::humanitarian, {70, 71}},
                                     {TaskId::damage_severity, {60, 60, 63}}});
    CHECK(s.mean(TaskId::disaster_types) == 82);
    CHECK(s.avg == (s.means[0] + s.means[1] + s.means[2] + s.means[3]) / 4);
    CHECK_THROWS_AS(scorecard("sys", {{TaskId::disaster_types, {80}}}), DataError);
    CHECK_THROWS_AS(scorecard("sys", {{TaskId::disaster_types, {80}},
                                      {TaskId::informativeness, {}},
                                      {TaskId::humanitarian, {1}},
                                      {TaskId::damage_severity, {1}}}),
                    DataError);
}

TEST_CASE("scorecard from run results uses percent and test splits") {
    std::vector<RunResult> runs;
    for (TaskId t : kAllTasks)
        for (int seed = 0; seed < 3; ++seed) {
            RunResult r;
            r.task = t;
            r.seed = static_cast<std::uint64_t>(seed);
            r.predictions = {{"a", 0, 0}, {"b", 1, seed == 0 ? 0 : 1}};
            r.accuracy = r.recompute_accuracy();
            runs.push_back(r);
        }
    RunResult validation = runs[0];
    validation.split = kSplitValidation;
    validation.accuracy = 0;
    runs.push_back(validation);
    const auto s = scorecard_from_runs("sys", runs);
    CHECK(s.runs[0].size() == 3);
    CHECK(s.means[0] == doctest::Approx(100.0 * (0.5 + 1 + 1) / 3));
    CHECK(s.per_example.size() == 4 * 3 * 2);
    CHECK(s.per_example.at("disaster_types/0/b") == 0.0);
}

TEST_CASE("paired t-test examples") {
    CHECK(paired_t_test({1, 2, 3}, {1, 2, 3}) == 1.0);
    CHECK(paired_t_test({1, 0}, {0, 1}) == doctest::Approx(1.0));
    const std::vector<double> base = {80, 81, 82, 83, 84};
    const std::vector<double> shifted = {81, 82.1, 82.9, 84, 85};
    const double p = paired_t_test(shifted, base);
    CHECK(p < 0.001);
    CHECK(p == doctest::Approx(oracle::paired_p(shifted, base)).epsilon(1e-9));
    CHECK(paired_t_test({1, 2, 3}, {0, 1, 2}) == 0.0);
    CHECK_THROWS_AS(paired_t_test({1, 2}, {1}), StatisticsError);
    CHECK_THROWS_AS(paired_t_test({1}, {1}), StatisticsError);
}

TEST_CASE("paired t-test agrees with an independent t distribution") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> len(2, 30);
    std::normal_distribution<double> noise(0, 1);
    std::uniform_real_distribution<double> shift(-1.5, 1.5);
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = len(rng);
        const double mu = shift(rng);
        std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            b[static_cast<std::size_t>(i)] = 80 + noise(rng);
            a[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(i)] + mu + noise(rng);
        }
        const double p = paired_t_test(a, b);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        CHECK(p == paired_t_test(b, a));
        worst = std::max(worst, std::abs(p - oracle::paired_p(a, b)));
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("Holm-Bonferroni examples") {
    CHECK(holm_bonferroni({0.001, 0.02, 0.04}, 0.05) == std::vector<bool>{true, true, true});
    CHECK(holm_bonferroni({0.04, 0.001, 0.03}, 0.05) == std::vector<bool>{false, true, false});
    CHECK(holm_bonferroni({0.01, 0.04, 0.03}, 0.05) == std::vector<bool>{true, false, false});
    CHECK(holm_bonferroni({0.03}, 0.05) == std::vector<bool>{true});
    CHECK(holm_bonferroni({0.06}, 0.05) == std::vector<bool>{false});
    CHECK(holm_bonferroni({1, 1, 1}, 0.01) == std::vector<bool>{false, false, false});
    CHECK(holm_bonferroni({}, 0.01).empty());
    CHECK_THROWS_AS(holm_bonferroni({0.5, 1.2}, 0.05), StatisticsError);
    CHECK_THROWS_AS(holm_bonferroni({0.5}, 0), StatisticsError);
    CHECK_THROWS_AS(bonferroni({-0.1}, 0.05), StatisticsError);
}

TEST_CASE("Holm matches the rank oracle, contains Bonferroni and is monotone") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> size(1, 20);
    std::uniform_real_distribution<double> unit(0, 1);
    for (int trial = 0; trial < 1000; ++trial) {
        const int m = size(rng);
        std::vector<double> p(static_cast<std::size_t>(m));
        for (auto& x : p) x = std::pow(unit(rng), 4);  // skew toward small p
        if (trial % 10 == 0) p[0] = p.back();            // ties
        const double alpha = trial % 2 ? 0.05 : 0.01;
        const auto holm = holm_bonferroni(p, alpha);
        REQUIRE(holm == oracle::holm(p, alpha));
        const auto bonf = bonferroni(p, alpha);
        for (int i = 0; i < m; ++i) CHECK((!bonf[static_cast<std::size_t>(i)] || holm[static_cast<std::size_t>(i)]));
        for (int i = 0; i < m; ++i) {
            if (!holm[static_cast<std::size_t>(i)]) continue;
            auto lowered = p;
            lowered[static_cast<std::size_t>(i)] *= unit(rng);
            const auto again = holm_bonferroni(lowered, alpha);
            for (int j = 0; j < m; ++j)
                if (holm[static_cast<std::size_t>(j)]) CHECK(again[static_cast<std::size_t>(j)]);
        }
    }
}

TEST_CASE("comparison against a baseline") {
    std::vector<SystemScorecard> systems = {
        scorecard("base", {{TaskId::disaster_types, {80, 81, 80.5}},
                           {TaskId::informativeness, {85, 85.5, 85.2}},
                           {TaskId::humanitarian, {75, 75.1, 75.3}},
                           {TaskId::damage_severity, {70, 70.4, 70.2}}}),
        scorecard("better", {{TaskId::disaster_types, {82, 83.1, 82.4}},
                             {TaskId::informativeness, {87, 87.6, 87.1}},
                             {TaskId::humanitarian, {77.2, 77, 77.3}},
                             {TaskId::damage_severity, {72, 72.5, 72.3}}}),
        scorecard("same", {{TaskId::disaster_types, {80, 81, 80.5}},
                           {TaskId::informativeness, {85, 85.5, 85.2}},
                           {TaskId::humanitarian, {75, 75.1, 75.3}},
                           {TaskId::damage_severity, {70, 70.4, 70.2}}}),
        scorecard_from_means("reported", {81, 86, 76, 71}),
    };
    const auto r = compare_to_baseline(systems, "base", 0.01);
    REQUIRE(r.comparisons.size() == 3);
    CHECK(r.find("better")->tested);
    CHECK(r.find("better")->reject);
    CHECK(r.find("same")->p_value == 1.0);
    CHECK_FALSE(r.find("same")->reject);
    CHECK_FALSE(r.find("reported")->tested);
    CHECK(r.to_json()["comparisons"].size() == 3);
    CHECK_THROWS_AS(compare_to_baseline(systems, "missing"), ConfigError);
    CHECK(compare_to_baseline({systems[0]}, "base").comparisons.empty());
}

TEST_CASE("reference rows reproduce the reported derived quantities") {
    const auto rows = load_reference_rows();
    REQUIRE(rows.size() == 17);
    auto find = [&](const std::string& name) {
        for (const auto& r : rows)
            if (r.score.system == name) return r;
        FAIL("missing row " << name);
        return rows[0];
    };
    const auto resnet = find("ResNet101");
    CHECK(resnet.score.avg == doctest::Approx(79.175).epsilon(1e-12));
    const auto vit = find("ViT-Base");
    const auto best = find("CrisisViT Multi-Class (Places) 20ep");
    CHECK(std::abs(vit.score.avg - 81.82) <= 0.01);
    CHECK(std::abs(best.score.avg - 83.07) <= 0.01);
    CHECK(std::abs((best.score.avg - vit.score.avg) - 1.25) <= 0.01);
    CHECK(std::abs((best.score.avg - resnet.score.avg) - 3.90) <= 0.01);
    for (const auto& r : rows) CHECK(r.reference);
}

TEST_CASE("comparison table") {
    auto rows = load_reference_rows();
    SystemRow mine;
    mine.score = scorecard_from_means("toy places", {90, 95, 85, 80});
    mine.model = "CrisisViT";
    mine.type = "TF";
    mine.methodology = "Multi-Class (Places)";
    mine.family = "incidents1m";
    mine.epochs = 2;
    rows.insert(rows.begin(), mine);
    std::vector<SystemScorecard> cards;
    for (const auto& r : rows) cards.push_back(r.score);
    const auto sig = compare_to_baseline(cards, "ViT-Base", 0.01);
    const auto doc = emit_table(rows, sig, "ViT-Base");

    CHECK(doc.text.find("ResNet101 [paper-reported]") != std::string::npos);
    CHECK(doc.text.find("\ntoy places ") != std::string::npos);
    CHECK(doc.text.find("toy places [paper-reported]") == std::string::npos);
    CHECK(doc.text.find("-2.65") != std::string::npos);  // ResNet101 gain 79.175 - 81.825
    CHECK(doc.text.find("90.00^") != std::string::npos);
    CHECK(doc.text.find("87.50 ^") != std::string::npos);  // toy AVG is the column maximum
    // CNN rows precede every CrisisViT row
    CHECK(doc.text.find("VGG16") < doc.text.find("toy places"));
    CHECK(doc.text.find("ViT-Base") < doc.text.find("toy places"));

    std::istringstream tsv(doc.tsv);
    std::string line;
    std::getline(tsv, line);
    CHECK(line.rfind("system\treference", 0) == 0);
    std::size_t lines = 0;
    while (std::getline(tsv, line)) ++lines;
    CHECK(lines == rows.size());
    CHECK(doc.tsv.find("79.174999") != std::string::npos);

    CHECK_THROWS_AS(emit_table(rows, sig, "AlexNet"), ConfigError);

    const std::vector<SystemRow> single = {mine};
    const auto lone = emit_table(single, compare_to_baseline({mine.score}, "toy places"), "toy places");
    const auto row_start = lone.text.find("\ntoy places ") + 1;
    const auto row = lone.text.substr(row_start, lone.text.find('\n', row_start) - row_start);
    CHECK(row.find('*') == std::string::npos);
}
