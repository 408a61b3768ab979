// Copyright (c) 2026, homesynth contributors
// SPDX-License-Identifier: Apache-2.0
//
// Slow, direct reference implementations used to check the library.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace oracle {

/// Direct sum of p ln(p/q) over eps-smoothed histograms on shared edges.
inline double kl(const std::vector<double>& p_samples, const std::vector<double>& q_samples, std::size_t bins,
                 double eps) {
    double lo = p_samples[0], hi = p_samples[0];
    for (const auto* s : {&p_samples, &q_samples})
        for (double v : *s) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    auto masses = [&](const std::vector<double>& s) {
        std::vector<double> m(bins, 0.0);
        for (double v : s) {
            auto k = static_cast<std::size_t>(std::floor((v - lo) / (hi - lo) * static_cast<double>(bins)));
            m[std::min(k, bins - 1)] += 1.0;
        }
        double total = 0;
        for (double& x : m) {
            x = x / static_cast<double>(s.size()) + eps;
            total += x;
        }
        for (double& x : m) x /= total;
        return m;
    };
    const auto p = masses(p_samples), q = masses(q_samples);
    double d = 0;
    for (std::size_t i = 0; i < bins; ++i)
        if (p[i] > 0) d += p[i] * std::log(p[i] / q[i]);
    return d;
}

/// Double-loop biased MMD^2 over row-major samples of `dim` values.
inline double mmd_squared(const std::vector<double>& x, const std::vector<double>& y, double sigma, std::size_t dim) {
    auto k = [&](const double* a, const double* b) {
        double s = 0;
        for (std::size_t i = 0; i < dim; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return std::exp(-s / (2 * sigma * sigma));
    };
    const std::size_t n = x.size() / dim, m = y.size() / dim;
    double xx = 0, xy = 0, yy = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) xx += k(&x[i * dim], &x[j * dim]);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) xy += k(&x[i * dim], &y[j * dim]);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) yy += k(&y[i * dim], &y[j * dim]);
    const double dn = static_cast<double>(n), dm = static_cast<double>(m);
    return xx / (dn * dn) - 2 * xy / (dn * dm) + yy / (dm * dm);
}

/// Minimum mean |x_i - y_pi(i)| over every bijection pi (equal sizes).
inline double w1_matching(const std::vector<double>& x, std::vector<double> y) {
    std::sort(y.begin(), y.end());
    double best = INFINITY;
    do {
        double c = 0;
        for (std::size_t i = 0; i < x.size(); ++i) c += std::abs(x[i] - y[i]);
        best = std::min(best, c / static_cast<double>(x.size()));
    } while (std::next_permutation(y.begin(), y.end()));
    return best;
}

/// Integral over u in (0,1) of the gap between the two empirical quantile
/// functions, summed piecewise over the merged breakpoints.
inline double w1_quantiles(std::vector<double> x, std::vector<double> y) {
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    std::vector<double> cuts{0.0, 1.0};
    for (std::size_t i = 1; i < x.size(); ++i) cuts.push_back(static_cast<double>(i) / static_cast<double>(x.size()));
    for (std::size_t j = 1; j < y.size(); ++j) cuts.push_back(static_cast<double>(j) / static_cast<double>(y.size()));
    std::sort(cuts.begin(), cuts.end());
    auto q = [](const std::vector<double>& s, double u) {
        auto k = static_cast<std::size_t>(std::floor(u * static_cast<double>(s.size())));
        return s[std::min(k, s.size() - 1)];
    };
    double total = 0;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
        const double width = cuts[c + 1] - cuts[c];
        if (width <= 0) continue;
        const double mid = 0.5 * (cuts[c] + cuts[c + 1]);
        total += width * std::abs(q(x, mid) - q(y, mid));
    }
    return total;
}

/// Two-pass mean and population standard deviation.
inline std::pair<double, double> mean_std(const std::vector<double>& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

/// 0 for 32 slots, ramp k*100/9 (k = 1..8), 40 slots at 100, ramp down, 8 zeros.
inline std::vector<double> trapezoid_day(double height = 100.0) {
    std::vector<double> d(32, 0.0);
    for (int k = 1; k <= 8; ++k) d.push_back(k * height / 9.0);
    d.insert(d.end(), 40, height);
    for (int k = 8; k >= 1; --k) d.push_back(k * height / 9.0);
    d.insert(d.end(), 8, 0.0);
    return d;
}

inline std::vector<double> spike_day(std::size_t at = 48) {
    std::vector<double> d(96, 0.0);
    d[at] = 100.0;
    return d;
}

}  // namespace oracle
