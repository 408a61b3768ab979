// Copyright (c) 2026, homesynth contributors
// SPDX-License-Identifier: Apache-2.0
//
// Smart-meter ingestion: CSV parsing, window-mean resampling, day
// completeness filtering, global min-max normalization and the DayMatrix
// file format.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "homesynth/error.hpp"
#include "homesynth/kv.hpp"

namespace homesynth::data {

using Instant = std::chrono::sys_seconds;

/// Readings on a fixed sampling grid. A missing reading (gap marker) is an
/// empty optional; gap markers are never written to disk.
struct TimeSeries {
    std::vector<Instant> timestamps;
    std::vector<std::optional<double>> values;
    int period_minutes = 0;

    std::size_t size() const noexcept { return timestamps.size(); }

    /// Throws DataError unless timestamps increase strictly and every gap is
    /// a multiple of the period.
    void validate() const {
        if (timestamps.size() != values.size()) throw DataError("time series: timestamp/value count mismatch");
        if (period_minutes <= 0) throw DataError("time series: period must be positive");
        const auto period = std::chrono::minutes(period_minutes);
        for (std::size_t i = 1; i < timestamps.size(); ++i) {
            const auto gap = timestamps[i] - timestamps[i - 1];
            if (gap <= std::chrono::seconds(0)) throw DataError("time series: timestamps are not strictly increasing");
            if (gap % period != std::chrono::seconds(0)) {
                throw DataError("time series: gap at index " + std::to_string(i) + " is not a multiple of " +
                                std::to_string(period_minutes) + " min");
            }
        }
    }
};

enum class SeriesKind { Load, Pv };

inline std::string to_string(SeriesKind k) { return k == SeriesKind::Load ? "load" : "pv"; }

inline SeriesKind parse_kind(const std::string& s) {
    if (s == "load") return SeriesKind::Load;
    if (s == "pv") return SeriesKind::Pv;
    throw UsageError("unknown series kind '" + s + "' (expected load or pv)");
}

inline constexpr std::size_t kSlotsPerDay = 96;
inline constexpr int kSlotMinutes = 15;

/// One daily profile per row. Values are watts until normalize() maps them to
/// [0,1]; the min/max used are kept so denormalize() can invert the mapping.
struct DayMatrix {
    std::size_t rows = 0;
    std::size_t cols = kSlotsPerDay;
    std::vector<double> values;
    SeriesKind kind = SeriesKind::Load;
    bool normalized = false;
    double norm_min = 0.0;
    double norm_max = 0.0;
    std::vector<std::string> dates;

    std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
    std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
    bool has_norm() const noexcept { return norm_max > norm_min; }
};

// ---------------------------------------------------------------------------
// Timestamps

/// Parses `YYYY-MM-DD[T| ]hh:mm[:ss[.fff]][Z|+hh:mm|-hh:mm|+hhmm]`. A missing
/// offset means UTC.
inline std::optional<Instant> parse_iso8601(std::string_view s) {
    auto digits = [&](std::size_t pos, std::size_t n, int& out) {
        if (pos + n > s.size()) return false;
        int v = 0;
        for (std::size_t i = pos; i < pos + n; ++i) {
            if (s[i] < '0' || s[i] > '9') return false;
            v = v * 10 + (s[i] - '0');
        }
        out = v;
        return true;
    };
    int y, mo, d, h, mi, sec = 0;
    if (!digits(0, 4, y) || s.size() < 16 || s[4] != '-' || !digits(5, 2, mo) || s[7] != '-' || !digits(8, 2, d) ||
        (s[10] != 'T' && s[10] != ' ') || !digits(11, 2, h) || s[13] != ':' || !digits(14, 2, mi)) {
        return std::nullopt;
    }
    std::size_t pos = 16;
    if (pos < s.size() && s[pos] == ':') {
        if (!digits(pos + 1, 2, sec)) return std::nullopt;
        pos += 3;
        if (pos < s.size() && s[pos] == '.') {
            ++pos;
            while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
        }
    }
    int offset_min = 0;
    if (pos < s.size()) {
        if (s[pos] == 'Z' && pos + 1 == s.size()) {
            pos = s.size();
        } else if (s[pos] == '+' || s[pos] == '-') {
            const int sign = s[pos] == '-' ? -1 : 1;
            int oh, om;
            if (!digits(pos + 1, 2, oh)) return std::nullopt;
            std::size_t p = pos + 3;
            if (p < s.size() && s[p] == ':') ++p;
            if (!digits(p, 2, om) || p + 2 != s.size()) return std::nullopt;
            offset_min = sign * (oh * 60 + om);
        } else {
            return std::nullopt;
        }
    }
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) return std::nullopt;
    return sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec} - minutes{offset_min};
}

inline std::string format_date(std::chrono::sys_days day) {
    const std::chrono::year_month_day ymd{day};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

/// Parses a fixed UTC offset such as `+01:00`, `-0500` or `Z` into minutes.
inline int parse_utc_offset(const std::string& text) {
    const std::string s = trim(text);
    if (s.empty() || s == "Z" || s == "UTC") return 0;
    if (s[0] != '+' && s[0] != '-') throw UsageError("bad UTC offset '" + text + "'");
    const auto probe = parse_iso8601("1970-01-01T00:00" + s);
    if (!probe) throw UsageError("bad UTC offset '" + text + "'");
    return static_cast<int>(-std::chrono::duration_cast<std::chrono::minutes>(probe->time_since_epoch()).count());
}

// ---------------------------------------------------------------------------
// CSV ingestion

struct ColumnSpec {
    std::string timestamp = "timestamp";
    std::string value = "power";
    int period_minutes = 0;  // 0: infer from the smallest gap
};

namespace detail {

inline std::string unquote(std::string s) {
    s = trim(s);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

}  // namespace detail

/// Reads a comma-separated file with a header row. Rows come back sorted by
/// time; empty value cells are treated as missing readings and dropped.
inline TimeSeries load_csv(const std::string& path, const ColumnSpec& spec = {}) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open input file " + path);

    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    const auto header = split(line, ',');
    std::optional<std::size_t> ts_col, val_col;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string name = detail::unquote(header[i]);
        if (name == spec.timestamp) ts_col = i;
        if (name == spec.value) val_col = i;
    }
    if (!ts_col) throw DataError(path + ": no column named '" + spec.timestamp + "'");
    if (!val_col) throw DataError(path + ": no column named '" + spec.value + "'");

    struct Row {
        Instant ts;
        double value;
        int line;
    };
    std::vector<Row> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split(line, ',');
        const std::string where = path + ":" + std::to_string(lineno) + ": ";
        if (cells.size() <= std::max(*ts_col, *val_col)) throw DataError(where + "too few columns");
        const std::string ts_text = detail::unquote(cells[*ts_col]);
        const auto ts = parse_iso8601(ts_text);
        if (!ts) throw DataError(where + "cannot parse timestamp '" + ts_text + "'");
        const std::string v_text = detail::unquote(cells[*val_col]);
        if (v_text.empty()) continue;
        double v;
        if (!parse_double(v_text, v)) throw DataError(where + "cannot parse value '" + v_text + "'");
        if (v < 0.0) throw DataError(where + "negative power reading " + v_text);
        rows.push_back({*ts, v, lineno});
    }

    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.ts < b.ts; });
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].ts == rows[i - 1].ts) {
            throw DataError(path + ": duplicate timestamp on lines " + std::to_string(rows[i - 1].line) + " and " +
                            std::to_string(rows[i].line));
        }
    }

    TimeSeries series;
    series.period_minutes = spec.period_minutes;
    if (series.period_minutes == 0) {
        std::chrono::seconds smallest{0};
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const auto gap = rows[i].ts - rows[i - 1].ts;
            if (smallest.count() == 0 || gap < smallest) smallest = gap;
        }
        if (smallest.count() == 0) {
            series.period_minutes = 5;
        } else if (smallest.count() % 60 != 0) {
            throw DataError(path + ": sampling interval is not a whole number of minutes");
        } else {
            series.period_minutes = static_cast<int>(smallest.count() / 60);
        }
    }
    for (const Row& r : rows) {
        series.timestamps.push_back(r.ts);
        series.values.emplace_back(r.value);
    }
    series.validate();
    return series;
}

// ---------------------------------------------------------------------------
// Resampling

/// Averages consecutive readings into windows of `target_minutes`, aligned to
/// multiples of the target period since the epoch. A window missing any
/// source reading becomes a gap marker.
inline TimeSeries resample(const TimeSeries& series, int target_minutes) {
    if (series.period_minutes <= 0 || target_minutes <= 0 || target_minutes % series.period_minutes != 0) {
        throw DataError("resample: target period " + std::to_string(target_minutes) +
                        " min is not a multiple of the source period " + std::to_string(series.period_minutes) +
                        " min");
    }
    TimeSeries out;
    out.period_minutes = target_minutes;
    if (series.size() == 0) return out;

    const std::int64_t window = std::int64_t{target_minutes} * 60;
    const std::int64_t per_window = target_minutes / series.period_minutes;
    auto window_of = [&](Instant t) {
        const std::int64_t s = t.time_since_epoch().count();
        return s >= 0 ? s / window : -((-s + window - 1) / window);
    };

    const std::int64_t first = window_of(series.timestamps.front());
    const std::int64_t last = window_of(series.timestamps.back());
    std::vector<std::int64_t> counts(static_cast<std::size_t>(last - first + 1), 0);
    std::vector<double> sums(counts.size(), 0.0);
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (!series.values[i]) continue;
        const auto w = static_cast<std::size_t>(window_of(series.timestamps[i]) - first);
        ++counts[w];
        sums[w] += *series.values[i];
    }
    for (std::size_t w = 0; w < counts.size(); ++w) {
        out.timestamps.push_back(Instant{std::chrono::seconds{(first + static_cast<std::int64_t>(w)) * window}});
        if (counts[w] == per_window) {
            out.values.emplace_back(sums[w] / static_cast<double>(per_window));
        } else {
            out.values.emplace_back(std::nullopt);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Day extraction

struct DayOptions {
    int utc_offset_minutes = 0;  // local midnight = UTC midnight shifted by this
    double min_coverage = 1.0;   // fraction of the 96 slots that must be present
    SeriesKind kind = SeriesKind::Load;
};

/// Groups a 15-minute series into local calendar days and keeps the days
/// whose coverage reaches `min_coverage`. With coverage below 1, the missing
/// slots of a kept day are linearly interpolated from present neighbours.
inline DayMatrix clean_days(const TimeSeries& series, const DayOptions& opts = {}) {
    if (series.period_minutes != kSlotMinutes) {
        throw DataError("clean_days: expected a " + std::to_string(kSlotMinutes) + "-minute series, got " +
                        std::to_string(series.period_minutes) + " min");
    }
    if (!(opts.min_coverage > 0.0 && opts.min_coverage <= 1.0)) {
        throw UsageError("day coverage threshold must lie in (0, 1]");
    }
    using namespace std::chrono;
    std::map<sys_days, std::vector<std::optional<double>>> by_day;
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (!series.values[i]) continue;
        const auto local = series.timestamps[i] + minutes{opts.utc_offset_minutes};
        const sys_days day = floor<days>(local);
        const auto slot = static_cast<std::size_t>((local - day) / minutes{kSlotMinutes});
        auto& slots = by_day.try_emplace(day, kSlotsPerDay).first->second;
        slots[slot] = series.values[i];
    }

    DayMatrix m;
    m.kind = opts.kind;
    const auto required = static_cast<std::size_t>(std::ceil(opts.min_coverage * kSlotsPerDay - 1e-9));
    for (auto& [day, slots] : by_day) {
        const auto present = static_cast<std::size_t>(std::count_if(slots.begin(), slots.end(), [](const auto& v) {
            return v.has_value();
        }));
        if (present < required || present == 0) continue;
        for (std::size_t s = 0; s < kSlotsPerDay; ++s) {
            if (slots[s]) {
                m.values.push_back(*slots[s]);
                continue;
            }
            std::optional<std::size_t> lo, hi;
            for (std::size_t j = s; j-- > 0;) {
                if (slots[j]) {
                    lo = j;
                    break;
                }
            }
            for (std::size_t j = s + 1; j < kSlotsPerDay; ++j) {
                if (slots[j]) {
                    hi = j;
                    break;
                }
            }
            double v;
            if (lo && hi) {
                const double f = static_cast<double>(s - *lo) / static_cast<double>(*hi - *lo);
                v = *slots[*lo] + f * (*slots[*hi] - *slots[*lo]);
            } else {
                v = lo ? *slots[*lo] : *slots[*hi];
            }
            m.values.push_back(v);
        }
        m.dates.push_back(format_date(day));
        ++m.rows;
    }
    if (m.rows == 0) throw DataError("clean_days: no complete day in the series");
    return m;
}

// ---------------------------------------------------------------------------
// Normalization

/// Min-max normalization with a single min/max over the whole matrix.
inline DayMatrix normalize(const DayMatrix& raw) {
    if (raw.values.empty()) throw DataError("normalize: empty matrix");
    const auto [lo, hi] = std::minmax_element(raw.values.begin(), raw.values.end());
    if (!(*hi > *lo)) throw DataError("normalize: constant data (min == max == " + format_double(*lo) + ")");
    DayMatrix m = raw;
    m.norm_min = *lo;
    m.norm_max = *hi;
    m.normalized = true;
    const double range = m.norm_max - m.norm_min;
    for (double& v : m.values) v = (v - m.norm_min) / range;
    return m;
}

/// Maps normalized values back to watts using the stored min/max.
inline DayMatrix denormalize(const DayMatrix& m) {
    if (!m.normalized) return m;
    if (!m.has_norm()) throw DataError("denormalize: matrix has no normalization metadata");
    DayMatrix out = m;
    out.normalized = false;
    const double range = m.norm_max - m.norm_min;
    for (double& v : out.values) v = v * range + m.norm_min;
    return out;
}

// ---------------------------------------------------------------------------
// DayMatrix files: `<name>.csv` (header t00..tNN, one day per row) plus the
// sidecar `<name>.csv.meta` of key = value lines.

inline std::string column_name(std::size_t slot) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "t%02zu", slot);
    return buf;
}

inline std::string sidecar_path(const std::string& csv_path) { return csv_path + ".meta"; }

inline void write_day_matrix(const std::string& path, const DayMatrix& m, const KeyValues& extra = {}) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    for (std::size_t c = 0; c < m.cols; ++c) out << (c ? "," : "") << column_name(c);
    out << '\n';
    for (std::size_t r = 0; r < m.rows; ++r) {
        const auto row = m.row(r);
        for (std::size_t c = 0; c < m.cols; ++c) out << (c ? "," : "") << format_double(row[c]);
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path);

    KeyValues meta = extra;
    meta["kind"] = to_string(m.kind);
    meta["normalized"] = m.normalized ? "true" : "false";
    meta["norm_min"] = format_double(m.norm_min);
    meta["norm_max"] = format_double(m.norm_max);
    meta["rows"] = std::to_string(m.rows);
    meta["cols"] = std::to_string(m.cols);
    std::string dates;
    for (std::size_t i = 0; i < m.dates.size(); ++i) dates += (i ? "," : "") + m.dates[i];
    meta["dates"] = dates;
    write_key_values(sidecar_path(path), meta);
}

/// Reads a DayMatrix CSV. The sidecar is optional; without it the values are
/// taken as unnormalized load readings.
inline DayMatrix read_day_matrix(const std::string& path, KeyValues* meta_out = nullptr) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    DayMatrix m;
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    m.cols = split(trim(line), ',').size();
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split(trim(line), ',');
        if (cells.size() != m.cols) {
            throw DataError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(m.cols) + " values");
        }
        for (const auto& c : cells) {
            double v;
            if (!parse_double(c, v)) throw DataError(path + ":" + std::to_string(lineno) + ": bad value '" + c + "'");
            m.values.push_back(v);
        }
        ++m.rows;
    }
    if (std::ifstream probe(sidecar_path(path)); probe) {
        const KeyValues meta = parse_key_values(probe, sidecar_path(path));
        auto get = [&](const char* key) -> std::string {
            auto it = meta.find(key);
            return it == meta.end() ? std::string{} : it->second;
        };
        if (!get("kind").empty()) m.kind = parse_kind(get("kind"));
        m.normalized = get("normalized") == "true";
        if (!get("norm_min").empty() && !parse_double(get("norm_min"), m.norm_min)) {
            throw DataError(sidecar_path(path) + ": bad norm_min");
        }
        if (!get("norm_max").empty() && !parse_double(get("norm_max"), m.norm_max)) {
            throw DataError(sidecar_path(path) + ": bad norm_max");
        }
        if (const std::string d = get("dates"); !d.empty()) m.dates = split(d, ',');
        if (meta_out) *meta_out = meta;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Toy data

/// Daily sinusoid profiles in watts: a random amplitude, offset and phase per
/// day plus Gaussian noise, clipped at zero.
inline DayMatrix make_sinusoid_days(std::size_t n_days, std::uint64_t seed, double noise_watts = 20.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> amplitude(1000.0, 3000.0), offset(100.0, 500.0), phase(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> noise(0.0, noise_watts);
    DayMatrix m;
    m.rows = n_days;
    m.values.reserve(n_days * kSlotsPerDay);
    for (std::size_t d = 0; d < n_days; ++d) {
        const double a = amplitude(rng), b = offset(rng), ph = phase(rng);
        for (std::size_t t = 0; t < kSlotsPerDay; ++t) {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(t) / kSlotsPerDay + ph;
            m.values.push_back(std::max(0.0, b + a * 0.5 * (1.0 + std::sin(angle)) + noise(rng)));
        }
        m.dates.push_back("toy-" + std::to_string(d));
    }
    return m;
}

}  // namespace homesynth::data
