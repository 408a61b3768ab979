// Copyright (c) 2026, homesynth contributors
// SPDX-License-Identifier: Apache-2.0
//
// Sampling synthetic daily profiles from a trained generator.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "homesynth/datapipe.hpp"
#include "homesynth/error.hpp"
#include "homesynth/kv.hpp"
#include "homesynth/nets.hpp"

namespace homesynth::synth {

struct SynthBatch {
    data::DayMatrix profiles;  // normalized, in [0,1]
    data::DayMatrix denorm;    // watts
    std::string checkpoint_id;
    std::string model;
    std::uint64_t seed = 0;
    std::size_t latent_draws = 0;
};

/// Draws n latent vectors z ~ N(0, I) from `seed` and decodes them with the
/// generator. Outputs are clamped to [0,1] and mapped to watts with the
/// training data's min/max.
inline SynthBatch sample(const nets::Model& model, std::size_t n, std::uint64_t seed,
                         const std::string& checkpoint_id = {}) {
    if (n == 0) throw UsageError("sample: number of profiles must be at least 1");
    if (!(model.norm_max > model.norm_min)) {
        throw DataError("sample: model carries no normalization metadata (train it on normalized data first)");
    }
    std::mt19937_64 rng(seed);
    const Tensor z = nets::normal_tensor({n, model.arch.latent}, rng);

    SynthBatch b;
    b.checkpoint_id = checkpoint_id;
    b.model = nets::to_string(model.kind);
    b.seed = seed;
    b.latent_draws = n;

    data::DayMatrix& p = b.profiles;
    p.rows = n;
    p.cols = model.arch.seq_len;
    p.kind = model.series_kind;
    p.normalized = true;
    p.norm_min = model.norm_min;
    p.norm_max = model.norm_max;
    p.values.reserve(n * p.cols);
    constexpr std::size_t chunk = 256;
    for (std::size_t begin = 0; begin < n; begin += chunk) {
        const std::size_t rows = std::min(chunk, n - begin);
        const auto first = z.values().begin() + static_cast<std::ptrdiff_t>(begin * model.arch.latent);
        Tensor zc({rows, model.arch.latent},
                  std::vector<double>(first, first + static_cast<std::ptrdiff_t>(rows * model.arch.latent)));
        const Tensor out = nets::generate(model, zc);
        for (double v : out.values()) p.values.push_back(std::clamp(v, 0.0, 1.0));
    }
    for (std::size_t i = 0; i < n; ++i) p.dates.push_back("synthetic-" + std::to_string(i));
    b.denorm = data::denormalize(p);
    return b;
}

/// Writes the profiles in watts (header t00..t95, one day per row) and a
/// sidecar with provenance and scale.
inline void export_batch(const SynthBatch& b, const std::string& path) {
    KeyValues provenance{{"checkpoint_id", b.checkpoint_id},
                         {"model", b.model},
                         {"seed", std::to_string(b.seed)},
                         {"latent_draws", std::to_string(b.latent_draws)},
                         {"units", "W"}};
    data::write_day_matrix(path, b.denorm, provenance);
}

/// Largest pairwise L2 distance between profiles (normalized scale).
inline double max_pairwise_distance(const data::DayMatrix& m) {
    double best = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = i + 1; j < m.rows; ++j) {
            const auto a = m.row(i), b = m.row(j);
            double s = 0.0;
            for (std::size_t t = 0; t < m.cols; ++t) s += (a[t] - b[t]) * (a[t] - b[t]);
            best = std::max(best, std::sqrt(s));
        }
    }
    return best;
}

/// True when every pair of profiles is closer than `tol`: the generator
/// ignores its input.
inline bool mode_collapsed(const SynthBatch& b, double tol = 1e-6) {
    return max_pairwise_distance(b.profiles) < tol;
}

}  // namespace homesynth::synth
