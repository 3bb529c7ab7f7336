#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "crisisvit/benchmark.hpp"

namespace crisisvit {

/// Accuracies are in percent throughout. Task order follows kAllTasks.
struct SystemScorecard {
    std::string system;
    std::array<double, 4> means{};
    std::array<std::vector<double>, 4> runs;
    double avg = 0;
    /// "task/run/image_id" -> 1 when correct; filled only from run results.
    std::map<std::string, double> per_example;

    double mean(TaskId t) const { return means[static_cast<std::size_t>(t)]; }
};

/// Per-task means of the run lists and their arithmetic mean. Every task
/// needs at least one run; a missing task throws DataError.
SystemScorecard scorecard(const std::string& system, const std::map<TaskId, std::vector<double>>& runs_percent);

/// Groups test-split results by task (fractions become percent).
SystemScorecard scorecard_from_runs(const std::string& system, const std::vector<RunResult>& results);

/// A scorecard holding one value per task, for externally reported numbers.
SystemScorecard scorecard_from_means(const std::string& system, const std::array<double, 4>& means_percent);

/// Half-up rounding for display; the stored values stay unrounded.
double round_half_up(double value, int decimals = 2);
std::string format_fixed(double value, int decimals = 2);

/// Two-sided p-value of the paired t-test on a - b. Differences that are all
/// zero give 1. Throws StatisticsError for unequal lengths or n < 2.
double paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

/// Step-down Holm-Bonferroni decisions in input order.
std::vector<bool> holm_bonferroni(const std::vector<double>& p_values, double alpha);
/// Single-step Bonferroni: reject when p <= alpha / m.
std::vector<bool> bonferroni(const std::vector<double>& p_values, double alpha);

enum class Pairing { per_run, per_example };

struct Comparison {
    std::string system;
    double p_value = 1;
    bool reject = false;
    bool tested = false;
    std::string note;  // why a comparison was not tested
};

struct SignificanceReport {
    std::string baseline;
    double alpha = 0.01;
    std::string method = "holm-bonferroni";
    Pairing pairing = Pairing::per_run;
    std::vector<Comparison> comparisons;

    const Comparison* find(const std::string& system) const;
    nlohmann::json to_json() const;
};

/// Paired t-tests of every system against `baseline`, corrected together.
/// Per-run pairing matches run i of each task across systems; per-example
/// pairing matches task/run/image keys. Systems whose samples cannot be
/// paired with the baseline are reported untested. Unknown baseline throws
/// ConfigError.
SignificanceReport compare_to_baseline(const std::vector<SystemScorecard>& systems, const std::string& baseline,
                                       double alpha = 0.01, Pairing pairing = Pairing::per_run);

}  // namespace crisisvit
