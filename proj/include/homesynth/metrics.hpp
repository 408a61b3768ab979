// Copyright (c) 2026, homesynth contributors
// SPDX-License-Identifier: Apache-2.0
//
// Fidelity metrics between real and synthetic daily profiles: histogram KL
// divergence, RBF-kernel MMD, 1-D Wasserstein distance and five load-shape
// statistics per day, aggregated as mean and population std.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "homesynth/datapipe.hpp"
#include "homesynth/error.hpp"
#include "homesynth/kv.hpp"

namespace homesynth::metrics {

// ---------------------------------------------------------------------------
// KL divergence

struct Histogram {
    std::vector<double> edges;   // bins + 1, ascending
    std::vector<double> masses;  // sum to 1
    double smoothing_eps = 0.0;
};

/// `bins` equal-width bins spanning the union range of both sample sets.
inline std::vector<double> shared_edges(std::span<const double> a, std::span<const double> b, std::size_t bins) {
    if (bins < 1) throw UsageError("histogram needs at least one bin");
    if (a.empty() && b.empty()) throw DataError("histogram of empty samples");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (auto s : {a, b}) {
        for (double v : s) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    std::vector<double> edges(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    edges.back() = hi;
    return edges;
}

/// Bin masses over fixed edges; values at the top edge fall in the last bin.
/// With eps > 0, every mass is raised by eps and the result renormalized.
inline Histogram histogram(std::span<const double> samples, std::span<const double> edges, double eps = 0.0) {
    if (samples.empty()) throw DataError("histogram of empty samples");
    if (edges.size() < 2) throw UsageError("histogram needs at least one bin");
    const std::size_t bins = edges.size() - 1;
    const double lo = edges.front(), hi = edges.back();
    Histogram h{std::vector<double>(edges.begin(), edges.end()), std::vector<double>(bins, 0.0), eps};
    for (double v : samples) {
        auto idx = static_cast<std::ptrdiff_t>(std::floor((v - lo) / (hi - lo) * static_cast<double>(bins)));
        idx = std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(bins) - 1);
        h.masses[static_cast<std::size_t>(idx)] += 1.0;
    }
    double total = 0.0;
    for (double& m : h.masses) {
        m = m / static_cast<double>(samples.size()) + eps;
        total += m;
    }
    for (double& m : h.masses) m /= total;
    return h;
}

/// sum_i p_i ln(p_i / q_i); terms with p_i == 0 contribute nothing.
inline double kl_from_masses(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size() || p.empty()) throw UsageError("KL divergence needs equal, non-empty mass vectors");
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) d += p[i] * std::log(p[i] / q[i]);
    }
    return std::max(0.0, d);
}

/// D_KL(real || synth) between eps-smoothed histograms on shared edges.
inline double kl_divergence(std::span<const double> real, std::span<const double> synth, std::size_t bins,
                            double eps = 1e-10) {
    if (real.empty() || synth.empty()) throw DataError("kl_divergence: empty sample set");
    const auto edges = shared_edges(real, synth, bins);
    const auto p = histogram(real, edges, eps);
    const auto q = histogram(synth, edges, eps);
    return kl_from_masses(p.masses, q.masses);
}

// ---------------------------------------------------------------------------
// MMD

namespace detail {

inline double sq_dist(const double* a, const double* b, std::size_t dim) {
    double s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return s;
}

inline double kernel_sum(std::span<const double> a, std::span<const double> b, std::size_t dim, double gamma) {
    const std::size_t na = a.size() / dim, nb = b.size() / dim;
    double s = 0.0;
    for (std::size_t i = 0; i < na; ++i) {
        for (std::size_t j = 0; j < nb; ++j) s += std::exp(-gamma * sq_dist(&a[i * dim], &b[j * dim], dim));
    }
    return s;
}

}  // namespace detail

/// Biased (V-statistic) MMD with K(x,y) = exp(-|x-y|^2 / (2 sigma^2)).
/// `x` and `y` hold row-major samples of `dim` values each. Returns
/// sqrt(max(0, MMD^2)).
inline double mmd_rbf(std::span<const double> x, std::span<const double> y, double sigma, std::size_t dim = 1) {
    if (!(sigma > 0.0)) throw UsageError("mmd_rbf: sigma must be positive");
    if (dim < 1 || x.size() % dim || y.size() % dim) throw UsageError("mmd_rbf: sample size is not a multiple of dim");
    if (x.empty() || y.empty()) throw DataError("mmd_rbf: empty sample set");
    const double n = static_cast<double>(x.size() / dim), m = static_cast<double>(y.size() / dim);
    const double gamma = 1.0 / (2.0 * sigma * sigma);
    const double xx = detail::kernel_sum(x, x, dim, gamma) / (n * n);
    const double xy = 2.0 * detail::kernel_sum(x, y, dim, gamma) / (n * m);
    const double yy = detail::kernel_sum(y, y, dim, gamma) / (m * m);
    return std::sqrt(std::max(0.0, xx - xy + yy));
}

/// Median Euclidean distance between pairs of the pooled sample; 1 when it
/// is zero or undefined. Pools above `max_points` are thinned with a fixed
/// stride so the pair list stays bounded.
inline double median_heuristic(std::span<const double> x, std::span<const double> y, std::size_t dim = 1,
                               std::size_t max_points = 2000) {
    std::vector<double> all(x.begin(), x.end());
    all.insert(all.end(), y.begin(), y.end());
    const std::size_t total = all.size() / dim;
    const std::size_t stride = total > max_points ? (total + max_points - 1) / max_points : 1;
    std::vector<double> pool;
    for (std::size_t i = 0; i < total; i += stride) pool.insert(pool.end(), &all[i * dim], &all[i * dim] + dim);
    const std::size_t n = pool.size() / dim;
    if (n < 2) return 1.0;
    std::vector<double> d;
    d.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) d.push_back(std::sqrt(detail::sq_dist(&pool[i * dim], &pool[j * dim], dim)));
    }
    if (d.empty()) return 1.0;
    const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    double med = *mid;
    if (d.size() % 2 == 0) med = 0.5 * (med + *std::max_element(d.begin(), mid));
    return med > 0.0 ? med : 1.0;
}

// ---------------------------------------------------------------------------
// Wasserstein-1

/// Exact 1-D W1 between empirical distributions: the integral of
/// |F_x(t) - F_y(t)| over t, equal to the integral of the quantile gap.
inline double wasserstein1(std::span<const double> x, std::span<const double> y) {
    if (x.empty() || y.empty()) throw DataError("wasserstein1: empty sample set");
    std::vector<double> a(x.begin(), x.end()), b(y.begin(), y.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double t = std::min(a.front(), b.front());
    double total = 0.0;
    while (i < a.size() || j < b.size()) {
        double next;
        if (j == b.size() || (i < a.size() && a[i] <= b[j])) {
            next = a[i];
        } else {
            next = b[j];
        }
        total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - t);
        t = next;
        while (i < a.size() && a[i] == t) ++i;
        while (j < b.size() && b[j] == t) ++j;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Load-shape statistics

struct ShapeParams {
    double alpha_high = 0.9;  // high-load band starts at base + alpha_high * (peak - base)
    double alpha_low = 0.1;   // near-base band ends at base + alpha_low * (peak - base)
    double slot_hours = 0.25;

    void validate() const {
        if (!(alpha_low > 0.0 && alpha_low < alpha_high && alpha_high <= 1.0)) {
            throw UsageError("load-shape thresholds need 0 < alpha_low < alpha_high <= 1");
        }
        if (!(slot_hours > 0.0)) throw UsageError("slot_hours must be positive");
    }
};

struct DayShape {
    double p_peak = 0.0;
    double p_base = 0.0;
    double high_load_duration = 0.0;  // hours
    double rise_time = 0.0;           // hours
    double fall_time = 0.0;           // hours
};

/// Percentile by linear interpolation between order statistics of `sorted`.
inline double percentile_sorted(std::span<const double> sorted, double q) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Smallest reading that exceeds at least 97.5 % of the day's readings, or
/// the maximum when ties at the top leave no such reading.
inline double near_peak(std::span<const double> sorted) {
    const double need = 0.975 * static_cast<double>(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (i > 0 && sorted[i] == sorted[i - 1]) continue;
        if (static_cast<double>(i) >= need) return sorted[i];
    }
    return sorted.back();
}

inline DayShape load_shape(std::span<const double> day, const ShapeParams& sp = {}) {
    sp.validate();
    if (day.empty()) throw DataError("load_shape: empty day");
    for (double v : day) {
        if (!std::isfinite(v)) throw DataError("load_shape: non-finite reading");
    }
    std::vector<double> sorted(day.begin(), day.end());
    std::sort(sorted.begin(), sorted.end());

    DayShape s;
    s.p_base = percentile_sorted(sorted, 0.025);
    s.p_peak = near_peak(sorted);
    if (!(s.p_peak > s.p_base)) return s;

    const double span = s.p_peak - s.p_base;
    const double high = s.p_base + sp.alpha_high * span;
    const double low = s.p_base + sp.alpha_low * span;
    const std::size_t n = day.size();

    std::size_t count_high = 0;
    std::optional<std::size_t> first_high, last_high;
    for (std::size_t t = 0; t < n; ++t) {
        if (day[t] >= high) {
            ++count_high;
            if (!first_high) first_high = t;
            last_high = t;
        }
    }
    s.high_load_duration = static_cast<double>(count_high) * sp.slot_hours;
    if (!first_high) return s;

    for (std::size_t t = *first_high; t-- > 0;) {
        if (day[t] <= low) {
            s.rise_time = static_cast<double>(*first_high - t) * sp.slot_hours;
            break;
        }
    }
    for (std::size_t t = *last_high + 1; t < n; ++t) {
        if (day[t] <= low) {
            s.fall_time = static_cast<double>(t - *last_high) * sp.slot_hours;
            break;
        }
    }
    return s;
}

struct Moments {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
};

struct LoadShapeStats {
    Moments p_peak, p_base, high_load_duration, rise_time, fall_time;
    std::size_t days = 0;
};

/// Mean and population std of each load-shape parameter across the rows
/// (Welford accumulation).
inline LoadShapeStats aggregate_stats(const data::DayMatrix& days, const ShapeParams& sp = {}) {
    if (days.rows == 0) throw DataError("aggregate_stats: no days");
    struct Acc {
        double mean = 0.0, m2 = 0.0;
        void add(double v, std::size_t k) {
            const double delta = v - mean;
            mean += delta / static_cast<double>(k);
            m2 += delta * (v - mean);
        }
        Moments done(std::size_t k) const { return {mean, std::sqrt(std::max(0.0, m2 / static_cast<double>(k)))}; }
    } peak, base, high, rise, fall;
    for (std::size_t r = 0; r < days.rows; ++r) {
        const DayShape s = load_shape(days.row(r), sp);
        const std::size_t k = r + 1;
        peak.add(s.p_peak, k);
        base.add(s.p_base, k);
        high.add(s.high_load_duration, k);
        rise.add(s.rise_time, k);
        fall.add(s.fall_time, k);
    }
    const std::size_t n = days.rows;
    return {peak.done(n), base.done(n), high.done(n), rise.done(n), fall.done(n), n};
}

// ---------------------------------------------------------------------------
// Full report

struct MetricsConfig {
    std::size_t bins = 100;
    double kl_eps = 1e-10;
    std::optional<double> sigma;  // nullopt: median heuristic
    bool mmd_on_days = true;      // false: pooled scalar readings
    ShapeParams shape;
};

struct MetricsReport {
    double kl = 0.0;
    double mmd = 0.0;
    double wasserstein = 0.0;
    double sigma = 0.0;  // kernel width actually used
    LoadShapeStats real_stats;
    LoadShapeStats synth_stats;
    Histogram real_hist;  // unsmoothed, for plotting
    Histogram synth_hist;
    MetricsConfig config;
    std::string label;  // model name shown by the comparison table
};

/// Both matrices must be in watts.
inline MetricsReport full_report(const data::DayMatrix& real, const data::DayMatrix& synth, const MetricsConfig& cfg = {}) {
    if (real.normalized || synth.normalized) throw DataError("full_report: inputs must be denormalized to watts");
    if (real.rows == 0 || synth.rows == 0) throw DataError("full_report: empty matrix");
    if (real.cols != synth.cols) throw DataError("full_report: real and synthetic days differ in length");
    cfg.shape.validate();

    MetricsReport r;
    r.config = cfg;
    r.kl = kl_divergence(real.values, synth.values, cfg.bins, cfg.kl_eps);
    const std::size_t dim = cfg.mmd_on_days ? real.cols : 1;
    r.sigma = cfg.sigma ? *cfg.sigma : median_heuristic(real.values, synth.values, dim);
    r.mmd = mmd_rbf(real.values, synth.values, r.sigma, dim);
    r.wasserstein = wasserstein1(real.values, synth.values);
    r.real_stats = aggregate_stats(real, cfg.shape);
    r.synth_stats = aggregate_stats(synth, cfg.shape);
    const auto edges = shared_edges(real.values, synth.values, cfg.bins);
    r.real_hist = histogram(real.values, edges);
    r.synth_hist = histogram(synth.values, edges);
    return r;
}

inline nlohmann::ordered_json stats_json(const LoadShapeStats& s) {
    auto m = [](const Moments& x) { return nlohmann::ordered_json{{"mean", x.mean}, {"std", x.std}}; };
    return {{"base_load", m(s.p_base)},
            {"peak_load", m(s.p_peak)},
            {"high_load_duration", m(s.high_load_duration)},
            {"rise_time", m(s.rise_time)},
            {"fall_time", m(s.fall_time)},
            {"days", s.days}};
}

/// Report document. Keys: label, units, kl, mmd, wasserstein, load_shape
/// {real, synthetic} x {base_load, peak_load, high_load_duration, rise_time,
/// fall_time} x {mean, std}, and config (every setting that shaped the
/// numbers).
inline nlohmann::ordered_json to_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["label"] = r.label;
    j["units"] = {{"readings", "W"}, {"durations", "h"}};
    j["kl"] = r.kl;
    j["mmd"] = r.mmd;
    j["wasserstein"] = r.wasserstein;
    j["load_shape"] = {{"real", stats_json(r.real_stats)}, {"synthetic", stats_json(r.synth_stats)}};
    j["config"] = {
        {"kl_basis", "pooled per-reading marginal"},
        {"kl_bins", r.config.bins},
        {"kl_smoothing_eps", r.config.kl_eps},
        {"kl_log", "natural"},
        {"mmd_basis", r.config.mmd_on_days ? "day vectors" : "pooled readings"},
        {"mmd_sigma_mode", r.config.sigma ? "fixed" : "median"},
        {"mmd_sigma", r.sigma},
        {"mmd_estimator", "biased V-statistic"},
        {"wasserstein_basis", "pooled readings"},
        {"alpha_high", r.config.shape.alpha_high},
        {"alpha_low", r.config.shape.alpha_low},
        {"slot_hours", r.config.shape.slot_hours},
        {"base_percentile", "2.5th, linear interpolation"},
        {"peak_rule", "smallest reading exceeding 97.5% of readings"},
    };
    return j;
}

inline void write_report(const std::string& path, const MetricsReport& r) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << to_json(r).dump(2) << '\n';
    if (!out) throw DataError("write failed: " + path);
}

inline void write_histogram_csv(const std::string& path, const Histogram& real, const Histogram& synth) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << "bin_left,bin_right,real_mass,synth_mass\n";
    for (std::size_t i = 0; i + 1 < real.edges.size(); ++i) {
        out << format_double(real.edges[i]) << ',' << format_double(real.edges[i + 1]) << ','
            << format_double(real.masses[i]) << ',' << format_double(synth.masses[i]) << '\n';
    }
}

}  // namespace homesynth::metrics
