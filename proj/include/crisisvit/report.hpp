#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crisisvit/stats.hpp"

namespace crisisvit {

/// A scorecard with the descriptive columns of the comparison table.
struct SystemRow {
    SystemScorecard score;
    std::string model;
    std::string type;  // CNN | TF
    std::string self_supervised_dataset = "None";
    std::string supervised_dataset;
    std::string methodology;
    int epochs = 0;
    std::optional<double> training_hours;
    std::string family;      // cnn, vit, incidents1m, imagenet+incidents1m, ...
    bool reference = false;  // externally reported, not reproduced
};

/// Rank used to order table rows; unknown families sort last.
int family_rank(const std::string& family);

/// Rows of an externally reported results file (JSON {"rows": [...]}).
std::vector<SystemRow> load_reference_rows(const std::filesystem::path& path = data_dir() / "reference" /
                                                                              "reported_results.json");

struct TableDocument {
    std::string text;  // fixed-width
    std::string tsv;   // unrounded values, p-values and decisions
};

/// Rows ordered by family, '*' after the AVG of systems significantly
/// different from the baseline, '^' on each column maximum, a gain column of
/// AVG minus the baseline AVG, and reference rows suffixed "[paper-reported]".
/// Throws ConfigError when `baseline` names no row.
TableDocument emit_table(const std::vector<SystemRow>& rows, const SignificanceReport& significance,
                         const std::string& baseline);

}  // namespace crisisvit
