#include "crisisvit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "crisisvit/errors.hpp"

namespace crisisvit {

namespace {

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

void finish(SystemScorecard& s) {
    for (std::size_t t = 0; t < 4; ++t) s.means[t] = mean_of(s.runs[t]);
    s.avg = (s.means[0] + s.means[1] + s.means[2] + s.means[3]) / 4.0;
}

}  // namespace

SystemScorecard scorecard(const std::string& system, const std::map<TaskId, std::vector<double>>& runs_percent) {
    SystemScorecard s;
    s.system = system;
    for (TaskId t : kAllTasks) {
        const auto it = runs_percent.find(t);
        if (it == runs_percent.end() || it->second.empty())
            throw DataError("scorecard for " + system + " has no runs for task " + to_string(t));
        s.runs[static_cast<std::size_t>(t)] = it->second;
    }
    finish(s);
    return s;
}

SystemScorecard scorecard_from_runs(const std::string& system, const std::vector<RunResult>& results) {
    std::map<TaskId, std::vector<double>> runs;
    std::map<std::string, double> per_example;
    for (const auto& r : results) {
        if (r.split != kSplitTest) continue;
        auto& list = runs[r.task];
        const std::string prefix = to_string(r.task) + "/" + std::to_string(list.size()) + "/";
        list.push_back(100.0 * r.accuracy);
        for (const auto& p : r.predictions) per_example[prefix + p.image_id] = p.truth == p.predicted ? 1.0 : 0.0;
    }
    SystemScorecard s = scorecard(system, runs);
    s.per_example = std::move(per_example);
    return s;
}

SystemScorecard scorecard_from_means(const std::string& system, const std::array<double, 4>& means_percent) {
    SystemScorecard s;
    s.system = system;
    for (std::size_t t = 0; t < 4; ++t) s.runs[t] = {means_percent[t]};
    finish(s);
    return s;
}

double round_half_up(double value, int decimals) {
    const double scale = std::pow(10.0, decimals);
    // the epsilon absorbs binary representation error such as 81.825 -> 81.82499...
    return std::floor(value * scale + 0.5 + 1e-9) / scale;
}

std::string format_fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, round_half_up(value, decimals));
    return buf;
}

double paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw StatisticsError("paired t-test: samples differ in length");
    if (a.size() < 2) throw StatisticsError("paired t-test: at least two pairs are required");
    const auto n = static_cast<double>(a.size());
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    if (std::all_of(d.begin(), d.end(), [](double x) { return x == 0; })) return 1.0;
    const double mean = mean_of(d);
    double ss = 0;
    for (double x : d) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (n - 1));
    if (sd == 0) return 0.0;
    const double t = mean / (sd / std::sqrt(n));
    const boost::math::students_t dist(n - 1);
    return std::clamp(2 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
}

namespace {

void check_inputs(const std::vector<double>& p, double alpha) {
    if (!(alpha > 0 && alpha < 1)) throw StatisticsError("alpha must be in (0, 1)");
    for (double x : p)
        if (!(x >= 0 && x <= 1)) throw StatisticsError("p-value outside [0, 1]");
}

}  // namespace

std::vector<bool> holm_bonferroni(const std::vector<double>& p_values, double alpha) {
    check_inputs(p_values, alpha);
    const std::size_t m = p_values.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return p_values[i] < p_values[j]; });
    std::vector<bool> reject(m, false);
    for (std::size_t k = 0; k < m; ++k) {
        if (!(p_values[order[k]] <= alpha / static_cast<double>(m - k))) break;
        reject[order[k]] = true;
    }
    return reject;
}

std::vector<bool> bonferroni(const std::vector<double>& p_values, double alpha) {
    check_inputs(p_values, alpha);
    std::vector<bool> reject(p_values.size());
    for (std::size_t i = 0; i < p_values.size(); ++i)
        reject[i] = p_values[i] <= alpha / static_cast<double>(p_values.size());
    return reject;
}

const Comparison* SignificanceReport::find(const std::string& system) const {
    for (const auto& c : comparisons)
        if (c.system == system) return &c;
    return nullptr;
}

nlohmann::json SignificanceReport::to_json() const {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& c : comparisons) {
        nlohmann::json j = {{"system", c.system}, {"tested", c.tested}, {"reject", c.reject}};
        if (c.tested)
            j["p_value"] = c.p_value;
        else
            j["note"] = c.note;
        list.push_back(j);
    }
    return {{"baseline", baseline},
            {"alpha", alpha},
            {"method", method},
            {"pairing", pairing == Pairing::per_run ? "per_run" : "per_example"},
            {"comparisons", list}};
}

namespace {

bool paired_samples(const SystemScorecard& sys, const SystemScorecard& base, Pairing pairing, std::vector<double>& a,
                    std::vector<double>& b, std::string& note) {
    if (pairing == Pairing::per_example) {
        for (const auto& [key, v] : sys.per_example)
            if (auto it = base.per_example.find(key); it != base.per_example.end()) {
                a.push_back(v);
                b.push_back(it->second);
            }
        if (a.size() < 2) note = "no per-example predictions shared with the baseline";
        return a.size() >= 2;
    }
    for (std::size_t t = 0; t < 4; ++t) {
        if (sys.runs[t].size() != base.runs[t].size()) {
            note = "run counts differ from the baseline";
            return false;
        }
        a.insert(a.end(), sys.runs[t].begin(), sys.runs[t].end());
        b.insert(b.end(), base.runs[t].begin(), base.runs[t].end());
    }
    return true;
}

}  // namespace

SignificanceReport compare_to_baseline(const std::vector<SystemScorecard>& systems, const std::string& baseline,
                                       double alpha, Pairing pairing) {
    const auto base = std::find_if(systems.begin(), systems.end(), [&](const auto& s) { return s.system == baseline; });
    if (base == systems.end()) throw ConfigError("baseline '" + baseline + "' is not among the systems");
    if (!(alpha > 0 && alpha < 1)) throw ConfigError("alpha: must be in (0, 1)");

    SignificanceReport report;
    report.baseline = baseline;
    report.alpha = alpha;
    report.pairing = pairing;
    std::vector<double> p;
    std::vector<std::size_t> tested;
    for (const auto& s : systems) {
        if (s.system == baseline) continue;
        Comparison c;
        c.system = s.system;
        std::vector<double> a, b;
        if (paired_samples(s, *base, pairing, a, b, c.note)) {
            c.tested = true;
            c.p_value = paired_t_test(a, b);
            p.push_back(c.p_value);
            tested.push_back(report.comparisons.size());
        }
        report.comparisons.push_back(std::move(c));
    }
    if (!p.empty()) {
        const auto reject = holm_bonferroni(p, alpha);
        for (std::size_t i = 0; i < tested.size(); ++i) report.comparisons[tested[i]].reject = reject[i];
    }
    return report;
}

}  // namespace crisisvit
