#include "crisisvit/report.hpp"

#include <algorithm>
#include <sstream>

#include "crisisvit/errors.hpp"
#include "crisisvit/io.hpp"

namespace crisisvit {

int family_rank(const std::string& family) {
    static const std::vector<std::string> order = {"cnn", "vit", "incidents1m", "imagenet+incidents1m"};
    const auto it = std::find(order.begin(), order.end(), family);
    return it == order.end() ? static_cast<int>(order.size()) : static_cast<int>(it - order.begin());
}

std::vector<SystemRow> load_reference_rows(const std::filesystem::path& path) {
    const auto doc = nlohmann::json::parse(read_file(path));
    std::vector<SystemRow> rows;
    for (const auto& r : doc.at("rows")) {
        SystemRow row;
        row.score = scorecard_from_means(r.at("system").get<std::string>(),
                                         {r.at("disaster").get<double>(), r.at("info").get<double>(),
                                          r.at("human").get<double>(), r.at("damage").get<double>()});
        row.model = r.value("model", row.score.system);
        row.type = r.value("type", "");
        row.self_supervised_dataset = r.value("self_supervised_dataset", "None");
        row.supervised_dataset = r.value("supervised_dataset", "");
        row.methodology = r.value("methodology", "");
        row.epochs = r.value("epochs", 0);
        if (r.contains("training_hours") && r["training_hours"].is_number())
            row.training_hours = r["training_hours"].get<double>();
        row.family = r.value("family", "");
        row.reference = true;
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

constexpr const char* kReferenceFlag = " [paper-reported]";

std::string join(const std::vector<std::string>& cells, const std::vector<std::size_t>& widths) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        std::string cell = cells[i];
        // first five columns are text, the rest numbers
        if (i < 5)
            cell.resize(widths[i], ' ');
        else
            cell.insert(0, widths[i] - cell.size(), ' ');
        line += (i ? " | " : "") + cell;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    return line + "\n";
}

}  // namespace

TableDocument emit_table(const std::vector<SystemRow>& input, const SignificanceReport& significance,
                         const std::string& baseline) {
    const auto base = std::find_if(input.begin(), input.end(), [&](const auto& r) { return r.score.system == baseline; });
    if (base == input.end()) throw ConfigError("baseline '" + baseline + "' is not among the table rows");
    const double base_avg = base->score.avg;

    std::vector<SystemRow> rows = input;
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return family_rank(a.family) < family_rank(b.family); });

    std::array<double, 5> column_max;
    column_max.fill(-1e300);
    for (const auto& r : rows) {
        for (std::size_t t = 0; t < 4; ++t) column_max[t] = std::max(column_max[t], r.score.means[t]);
        column_max[4] = std::max(column_max[4], r.score.avg);
    }

    const std::vector<std::string> header = {"System", "Type", "Self-Sup. Dataset", "Sup. Dataset", "Methodology",
                                             "Epochs", "Disaster", "Info", "Human", "Damage", "AVG", "Gain",
                                             "Time (h)"};
    std::vector<std::vector<std::string>> body;
    std::ostringstream tsv;
    tsv << "system\treference\tfamily\ttype\tself_supervised_dataset\tsupervised_dataset\tmethodology\tepochs\t"
           "disaster\tinfo\thuman\tdamage\tavg\tgain\truns\tp_value\tsignificant\ttraining_hours\n";
    tsv.precision(17);
    for (const auto& r : rows) {
        const Comparison* cmp = significance.find(r.score.system);
        const bool significant = cmp && cmp->tested && cmp->reject;
        std::vector<std::string> cells = {r.score.system + (r.reference ? kReferenceFlag : ""),
                                          r.type,
                                          r.self_supervised_dataset,
                                          r.supervised_dataset,
                                          r.methodology,
                                          std::to_string(r.epochs)};
        for (std::size_t t = 0; t < 4; ++t)
            cells.push_back(format_fixed(r.score.means[t]) + (r.score.means[t] == column_max[t] ? "^" : " "));
        cells.push_back(format_fixed(r.score.avg) + (significant ? "*" : " ") + (r.score.avg == column_max[4] ? "^" : " "));
        cells.push_back(r.score.system == baseline ? "-" : format_fixed(r.score.avg - base_avg));
        cells.push_back(r.training_hours ? format_fixed(*r.training_hours, 0) : "N/A");
        body.push_back(std::move(cells));

        tsv << r.score.system << '\t' << (r.reference ? 1 : 0) << '\t' << r.family << '\t' << r.type << '\t'
            << r.self_supervised_dataset << '\t' << r.supervised_dataset << '\t' << r.methodology << '\t' << r.epochs;
        for (double m : r.score.means) tsv << '\t' << m;
        tsv << '\t' << r.score.avg << '\t' << r.score.avg - base_avg << '\t' << r.score.runs[0].size() << '\t';
        if (cmp && cmp->tested) tsv << cmp->p_value;
        tsv << '\t' << (significant ? 1 : 0) << '\t';
        if (r.training_hours) tsv << *r.training_hours;
        tsv << '\n';
    }

    std::vector<std::size_t> widths(header.size());
    for (std::size_t i = 0; i < header.size(); ++i) {
        widths[i] = header[i].size();
        for (const auto& cells : body) widths[i] = std::max(widths[i], cells[i].size());
    }
    std::string text = join(header, widths);
    std::size_t rule = text.size() - 1;
    text += std::string(rule, '-') + "\n";
    for (const auto& cells : body) text += join(cells, widths);
    text += std::string(rule, '-') + "\n";
    std::ostringstream legend;
    legend << "* significant vs " << baseline << " (paired t-test, " << significance.method << ", alpha "
           << significance.alpha << ")   ^ column maximum   Gain = AVG - " << baseline << " AVG\n";
    text += legend.str();
    return {text, tsv.str()};
}

}  // namespace crisisvit
