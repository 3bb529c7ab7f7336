#pragma once

// Reference implementations kept independent of the library code.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace oracle {

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
inline double incomplete_beta(double x, double a, double b) {
    if (x <= 0) return 0;
    if (x >= 1) return 1;
    if (x > (a + 1) / (a + b + 2)) return 1 - incomplete_beta(1 - x, b, a);
    const double front =
        std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x)) / a;
    const double tiny = 1e-300;
    double f = 1, c = 1, d = 0;
    for (int i = 0; i <= 1000; ++i) {
        const int m = i / 2;
        double num;
        if (i == 0)
            num = 1;
        else if (i % 2 == 0)
            num = m * (b - m) * x / ((a + 2.0 * m - 1) * (a + 2.0 * m));
        else
            num = -((a + m) * (a + b + m) * x) / ((a + 2.0 * m) * (a + 2.0 * m + 1));
        d = 1 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        d = 1 / d;
        c = 1 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        f *= c * d;
        if (std::abs(1 - c * d) < 1e-15) return front * (f - 1);
    }
    throw std::runtime_error("incomplete beta did not converge");
}

/// Two-sided paired t-test p-value computed from scratch.
inline double paired_p(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double mean = 0;
    for (std::size_t i = 0; i < a.size(); ++i) mean += (a[i] - b[i]) / n;
    double ss = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
    if (ss == 0 && mean == 0) return 1;
    const double t = mean / std::sqrt(ss / (n - 1) / n);
    const double dof = n - 1;
    return incomplete_beta(dof / (dof + t * t), dof / 2, 0.5);
}

/// Holm step-down by explicit ranks: hypothesis j is rejected iff every
/// hypothesis ranked at or before it meets its threshold alpha / (m - rank).
inline std::vector<bool> holm(const std::vector<double>& p, double alpha) {
    const std::size_t m = p.size();
    auto rank_of = [&](std::size_t j) {
        std::size_t r = 0;
        for (std::size_t i = 0; i < m; ++i) r += (p[i] < p[j] || (p[i] == p[j] && i < j)) ? 1 : 0;
        return r;
    };
    std::vector<std::size_t> at_rank(m);
    for (std::size_t j = 0; j < m; ++j) at_rank[rank_of(j)] = j;
    std::vector<bool> out(m);
    for (std::size_t j = 0; j < m; ++j) {
        bool ok = true;
        for (std::size_t k = 0; k <= rank_of(j) && ok; ++k) ok = p[at_rank[k]] <= alpha / static_cast<double>(m - k);
        out[j] = ok;
    }
    return out;
}

}  // namespace oracle
