// Copyright (c) 2026, homesynth contributors
// SPDX-License-Identifier: Apache-2.0
//
// Alternating adversarial training for the VAE-GAN and the GAN baseline.
// Training is single-threaded and fully determined by the seed: two runs with
// the same data, architecture and config write bit-identical checkpoints.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "homesynth/datapipe.hpp"
#include "homesynth/error.hpp"
#include "homesynth/kv.hpp"
#include "homesynth/nets.hpp"

namespace homesynth::train {

using nets::LossBundle;
using nets::Model;
using nets::ModelKind;

struct TrainConfig {
    int epochs = 100;
    std::size_t batch_size = 32;
    double lr_g = 2e-4;
    double lr_d = 2e-4;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 42;
    int d_steps_per_g_step = 1;
    int checkpoint_every = 10;
    // Also show the discriminator generator outputs decoded from prior draws
    // z ~ N(0, I), in addition to reconstructions of the real batch.
    bool fake_includes_prior = false;

    void validate() const {
        if (epochs < 1) throw UsageError("epochs must be at least 1");
        if (batch_size < 1) throw UsageError("batch_size must be at least 1");
        if (!(lr_g >= 0.0) || !(lr_d >= 0.0)) throw UsageError("learning rates must be non-negative");
        if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
            throw UsageError("Adam betas must lie in [0, 1)");
        }
        if (!(adam_eps > 0.0)) throw UsageError("adam_eps must be positive");
        if (d_steps_per_g_step < 1) throw UsageError("d_steps_per_g_step must be at least 1");
        if (checkpoint_every < 0) throw UsageError("checkpoint_every must be non-negative");
    }
};

/// One Adam update with bias correction; `t` is the 1-based update count.
inline void adam_step(Param& p, double lr, double beta1, double beta2, double eps, std::size_t t) {
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.grad[i];
        p.moment1[i] = beta1 * p.moment1[i] + (1.0 - beta1) * g;
        p.moment2[i] = beta2 * p.moment2[i] + (1.0 - beta2) * g * g;
        const double m_hat = p.moment1[i] / c1;
        const double v_hat = p.moment2[i] / c2;
        p.value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

struct StepRecord {
    std::size_t step = 0;  // 1-based, global across epochs
    int epoch = 0;         // 1-based
    LossBundle losses;
};

struct EpochRecord {
    int epoch = 0;
    // Mean per-point squared error of the training-step reconstructions,
    // decoded from sampled latents (VAE-GAN only).
    double recon_mse = 0.0;
    // Same error over the whole training set after the epoch, decoded from the
    // posterior mean (VAE-GAN only).
    double recon_mse_mean = 0.0;
    double seconds = 0.0;
};

struct TrainLog {
    std::vector<StepRecord> steps;
    std::vector<EpochRecord> epochs;
};

class Trainer {
public:
    /// Fresh model initialised from cfg.seed and fitted to `data`'s scale.
    Trainer(ModelKind kind, const nets::ArchConfig& arch, const TrainConfig& cfg)
        : cfg_(cfg), model_(nets::init_model(kind, arch, cfg.seed)), rng_(cfg.seed ^ 0x9e3779b97f4a7c15ULL) {
        cfg_.validate();
    }

    /// Continues a run from a checkpoint written by checkpoint(). `epochs` may
    /// be raised to train further; everything else comes from the file.
    static Trainer resume(const nets::Checkpoint& ck, std::optional<int> epochs = std::nullopt) {
        Trainer t(ck);
        if (epochs) t.cfg_.epochs = *epochs;
        t.cfg_.validate();
        return t;
    }

    const Model& model() const noexcept { return model_; }
    Model& model() noexcept { return model_; }
    const TrainConfig& config() const noexcept { return cfg_; }
    const TrainLog& log() const noexcept { return log_; }
    int epochs_done() const noexcept { return epoch_; }
    std::size_t steps_done() const noexcept { return step_; }

    /// Trains until cfg.epochs have completed. `on_epoch` runs after each
    /// epoch (checkpointing hooks).
    void run(const data::DayMatrix& data, const std::function<void(const Trainer&)>& on_epoch = {}) {
        check_data(data);
        while (epoch_ < cfg_.epochs) {
            run_epoch(data);
            if (on_epoch) on_epoch(*this);
        }
    }

    void run_epoch(const data::DayMatrix& data) {
        check_data(data);
        const auto start = std::chrono::steady_clock::now();
        ++epoch_;
        std::vector<std::size_t> order(data.rows);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng_);

        double sq_sum = 0.0;
        std::size_t sq_rows = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg_.batch_size) {
            const std::size_t end = std::min(order.size(), begin + cfg_.batch_size);
            Tensor batch({end - begin, data.cols});
            for (std::size_t r = begin; r < end; ++r) {
                const auto row = data.row(order[r]);
                std::copy(row.begin(), row.end(), batch.data() + (r - begin) * data.cols);
            }
            ++step_;
            StepRecord rec{step_, epoch_, {}};
            double batch_sq = 0.0;
            if (model_.kind == ModelKind::VaeGan) {
                rec.losses = vaegan_step(batch, batch_sq);
            } else {
                rec.losses = gan_step(batch);
            }
            if (!rec.losses.all_finite()) {
                throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch_) + ", step " +
                                      std::to_string(step_) + ": " + describe(rec.losses));
            }
            sq_sum += batch_sq;
            sq_rows += end - begin;
            log_.steps.push_back(rec);
        }
        EpochRecord rec{epoch_, 0.0, 0.0, 0.0};
        if (model_.kind == ModelKind::VaeGan) {
            rec.recon_mse = sq_sum / static_cast<double>(sq_rows * data.cols);
            rec.recon_mse_mean = posterior_mean_mse(data);
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        log_.epochs.push_back(rec);
    }

    /// Mean per-point squared error of G(mean(E(x))) over every row of `data`.
    double posterior_mean_mse(const data::DayMatrix& data) const {
        if (model_.kind != ModelKind::VaeGan) throw UsageError("the GAN baseline has no encoder");
        constexpr std::size_t kChunk = 256;
        double sq = 0.0;
        for (std::size_t begin = 0; begin < data.rows; begin += kChunk) {
            const std::size_t n = std::min(kChunk, data.rows - begin);
            const auto first = data.values.begin() + static_cast<std::ptrdiff_t>(begin * data.cols);
            const Tensor x({n, data.cols}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(n * data.cols)));
            const Tensor y = nets::generate(model_, nets::encode(model_, x).first);
            for (std::size_t i = 0; i < x.size(); ++i) sq += (y[i] - x[i]) * (y[i] - x[i]);
        }
        return sq / static_cast<double>(data.values.size());
    }

    /// Full training state: weights, Adam moments, counters, RNG and config.
    nets::Checkpoint checkpoint() const {
        nets::Checkpoint ck;
        ck.model = model_;
        ck.extra = config_to_kv(cfg_);
        ck.extra["state.epoch"] = std::to_string(epoch_);
        ck.extra["state.step"] = std::to_string(step_);
        ck.extra["state.adam_t_d"] = std::to_string(t_d_);
        ck.extra["state.adam_t_g"] = std::to_string(t_g_);
        std::ostringstream rs;
        rs << rng_;
        ck.extra["state.rng"] = rs.str();
        return ck;
    }

    static KeyValues config_to_kv(const TrainConfig& c) {
        return {{"train.epochs", std::to_string(c.epochs)},
                {"train.batch_size", std::to_string(c.batch_size)},
                {"train.lr_g", format_double(c.lr_g)},
                {"train.lr_d", format_double(c.lr_d)},
                {"train.adam_beta1", format_double(c.adam_beta1)},
                {"train.adam_beta2", format_double(c.adam_beta2)},
                {"train.adam_eps", format_double(c.adam_eps)},
                {"train.seed", std::to_string(c.seed)},
                {"train.d_steps_per_g_step", std::to_string(c.d_steps_per_g_step)},
                {"train.checkpoint_every", std::to_string(c.checkpoint_every)},
                {"train.fake_includes_prior", c.fake_includes_prior ? "true" : "false"}};
    }

private:
    explicit Trainer(const nets::Checkpoint& ck) : model_(ck.model) {
        auto get = [&](const std::string& key) {
            auto it = ck.extra.find(key);
            if (it == ck.extra.end()) throw DataError("checkpoint has no training state (" + key + ")");
            return it->second;
        };
        auto get_int = [&](const std::string& key) {
            long long v;
            if (!parse_int(get(key), v) || v < 0) throw DataError("checkpoint: bad " + key);
            return v;
        };
        auto get_real = [&](const std::string& key) {
            double v;
            if (!parse_double(get(key), v)) throw DataError("checkpoint: bad " + key);
            return v;
        };
        cfg_.epochs = static_cast<int>(get_int("train.epochs"));
        cfg_.batch_size = static_cast<std::size_t>(get_int("train.batch_size"));
        cfg_.lr_g = get_real("train.lr_g");
        cfg_.lr_d = get_real("train.lr_d");
        cfg_.adam_beta1 = get_real("train.adam_beta1");
        cfg_.adam_beta2 = get_real("train.adam_beta2");
        cfg_.adam_eps = get_real("train.adam_eps");
        cfg_.seed = static_cast<std::uint64_t>(get_int("train.seed"));
        cfg_.d_steps_per_g_step = static_cast<int>(get_int("train.d_steps_per_g_step"));
        cfg_.checkpoint_every = static_cast<int>(get_int("train.checkpoint_every"));
        cfg_.fake_includes_prior = get("train.fake_includes_prior") == "true";
        epoch_ = static_cast<int>(get_int("state.epoch"));
        step_ = static_cast<std::size_t>(get_int("state.step"));
        t_d_ = static_cast<std::size_t>(get_int("state.adam_t_d"));
        t_g_ = static_cast<std::size_t>(get_int("state.adam_t_g"));
        std::istringstream rs(get("state.rng"));
        rs >> rng_;
        if (!rs) throw DataError("checkpoint: bad state.rng");
    }

    void check_data(const data::DayMatrix& data) {
        if (!data.normalized) throw DataError("training data must be min-max normalized");
        if (data.rows == 0) throw DataError("training data is empty");
        if (data.cols != model_.arch.seq_len) {
            throw DataError("training data has " + std::to_string(data.cols) + " points per day, model expects " +
                            std::to_string(model_.arch.seq_len));
        }
        if (epoch_ == 0 && step_ == 0) {
            // First contact fixes the scale used to report generated data in watts.
            model_.series_kind = data.kind;
            model_.norm_min = data.norm_min;
            model_.norm_max = data.norm_max;
        }
    }

    static std::string describe(const LossBundle& b) {
        std::ostringstream os;
        os << "l_prior=" << b.l_prior << " l_reconstruction=" << b.l_reconstruction << " l_dG=" << b.l_dG
           << " l_generator=" << b.l_generator << " l_real=" << b.l_real << " l_fake=" << b.l_fake
           << " l_noise=" << b.l_noise << " l_D=" << b.l_D;
        return os.str();
    }

    void apply(nets::Network& net, double lr, std::size_t t) {
        for (Param& p : net.params) adam_step(p, lr, cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps, t);
    }

    // Appends `extra` rows below `base`.
    static Tensor stack_rows(const Tensor& base, const Tensor& extra) {
        std::vector<double> v(base.values().begin(), base.values().end());
        v.insert(v.end(), extra.values().begin(), extra.values().end());
        return Tensor({base.dim(0) + extra.dim(0), base.dim(1)}, std::move(v));
    }

    Tensor reconstruct(const Tensor& x, const Tensor& eps) const {
        auto [mean, logvar] = nets::encode(model_, x);
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += std::exp(0.5 * logvar[i]) * eps[i];
        return nets::generate(model_, mean);
    }

    void discriminator_update(nets::DiscriminatorLossGraph& dg, const ad::Bindings& inputs, LossBundle& out) {
        dg.graph.forward(inputs);
        model_.zero_grad();
        dg.graph.backward(dg.l_D);
        apply(model_.discriminator, cfg_.lr_d, ++t_d_);
        const auto& g = dg.graph;
        out.l_real = g.value(dg.l_real).item();
        out.l_fake = g.value(dg.l_fake).item();
        out.l_noise = dg.with_noise ? g.value(dg.l_noise).item() : 0.0;
        out.l_D = g.value(dg.l_D).item();
    }

    LossBundle vaegan_step(const Tensor& x, double& batch_sq) {
        const std::size_t b = x.dim(0), latent = model_.arch.latent, seq = model_.arch.seq_len;
        LossBundle out;

        nets::DiscriminatorLossGraph dg;
        nets::build_discriminator_loss(dg, model_, true);
        for (int k = 0; k < cfg_.d_steps_per_g_step; ++k) {
            const Tensor eps = nets::normal_tensor({b, latent}, rng_);
            Tensor fake = reconstruct(x, eps);
            if (cfg_.fake_includes_prior) {
                fake = stack_rows(fake, nets::generate(model_, nets::normal_tensor({b, latent}, rng_)));
            }
            const Tensor noise = nets::normal_tensor({b, seq}, rng_);
            discriminator_update(dg, {{"real", x}, {"fake", fake}, {"noise", noise}}, out);
        }

        nets::GeneratorLossGraph gg;
        nets::build_vaegan_generator_loss(gg, model_, cfg_.fake_includes_prior);
        auto& g = gg.graph;
        ad::Bindings inputs{{"x", x}, {"eps", nets::normal_tensor({b, latent}, rng_)}};
        if (cfg_.fake_includes_prior) inputs.emplace("z", nets::normal_tensor({b, latent}, rng_));
        g.forward(inputs);

        // Encoder: prior + reconstruction only.
        model_.zero_grad();
        g.backward(gg.l_reconstruction);
        ++t_g_;
        apply(model_.encoder, cfg_.lr_g, t_g_);
        // Generator: reconstruction + adversarial term. Backward reads cached
        // forward values, so the encoder update above does not leak in.
        model_.zero_grad();
        g.backward(gg.l_generator);
        apply(model_.generator, cfg_.lr_g, t_g_);

        out.l_prior = g.value(gg.l_prior).item();
        out.l_reconstruction = g.value(gg.l_reconstruction).item();
        out.l_dG = g.value(gg.l_dG).item();
        out.l_generator = g.value(gg.l_generator).item();
        batch_sq = g.value(gg.l_sq).item() * static_cast<double>(b);
        return out;
    }

    LossBundle gan_step(const Tensor& x) {
        const std::size_t b = x.dim(0), latent = model_.arch.latent;
        LossBundle out;

        nets::DiscriminatorLossGraph dg;
        nets::build_discriminator_loss(dg, model_, false);
        for (int k = 0; k < cfg_.d_steps_per_g_step; ++k) {
            const Tensor fake = nets::generate(model_, nets::normal_tensor({b, latent}, rng_));
            discriminator_update(dg, {{"real", x}, {"fake", fake}}, out);
        }

        nets::GeneratorLossGraph gg;
        nets::build_gan_generator_loss(gg, model_);
        gg.graph.forward({{"z", nets::normal_tensor({b, latent}, rng_)}});
        model_.zero_grad();
        gg.graph.backward(gg.l_generator);
        apply(model_.generator, cfg_.lr_g, ++t_g_);
        out.l_dG = gg.graph.value(gg.l_dG).item();
        out.l_generator = gg.graph.value(gg.l_generator).item();
        return out;
    }

    TrainConfig cfg_;
    Model model_;
    std::mt19937_64 rng_;
    TrainLog log_;
    int epoch_ = 0;
    std::size_t step_ = 0;
    std::size_t t_d_ = 0;
    std::size_t t_g_ = 0;
};

struct TrainResult {
    Model model;
    TrainLog log;
};

inline TrainResult train_vaegan(const data::DayMatrix& data, const TrainConfig& cfg,
                                const nets::ArchConfig& arch = {}) {
    Trainer t(ModelKind::VaeGan, arch, cfg);
    t.run(data);
    return {t.model(), t.log()};
}

inline TrainResult train_gan(const data::DayMatrix& data, const TrainConfig& cfg, const nets::ArchConfig& arch = {}) {
    Trainer t(ModelKind::Gan, arch, cfg);
    t.run(data);
    return {t.model(), t.log()};
}

// ---------------------------------------------------------------------------
// Train log CSV: step,epoch,<eight loss columns>

inline constexpr const char* kTrainLogHeader =
    "step,epoch,l_prior,l_reconstruction,l_dG,l_generator,l_real,l_fake,l_noise,l_D";

inline std::string format_step(const StepRecord& r) {
    const auto& l = r.losses;
    std::string s = std::to_string(r.step) + "," + std::to_string(r.epoch);
    for (double v : {l.l_prior, l.l_reconstruction, l.l_dG, l.l_generator, l.l_real, l.l_fake, l.l_noise, l.l_D}) {
        s += "," + format_double(v);
    }
    return s;
}

inline void write_train_log(const std::string& path, const std::vector<StepRecord>& steps) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << kTrainLogHeader << '\n';
    for (const auto& r : steps) out << format_step(r) << '\n';
    if (!out) throw DataError("write failed: " + path);
}

inline std::vector<StepRecord> read_train_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || trim(line) != kTrainLogHeader) throw DataError(path + ": not a train log");
    std::vector<StepRecord> steps;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto cells = split(trim(line), ',');
        if (cells.size() != 10) throw DataError(path + ": malformed row '" + line + "'");
        StepRecord r;
        long long step, epoch;
        double v[8];
        bool ok = parse_int(cells[0], step) && parse_int(cells[1], epoch);
        for (int i = 0; i < 8; ++i) ok = ok && parse_double(cells[2 + i], v[i]);
        if (!ok) throw DataError(path + ": malformed row '" + line + "'");
        r.step = static_cast<std::size_t>(step);
        r.epoch = static_cast<int>(epoch);
        r.losses = {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
        steps.push_back(r);
    }
    return steps;
}

inline void write_epoch_log(const std::string& path, const std::vector<EpochRecord>& epochs) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << "epoch,recon_mse,recon_mse_mean,seconds\n";
    for (const auto& e : epochs) {
        out << e.epoch << ',' << format_double(e.recon_mse) << ',' << format_double(e.recon_mse_mean) << ','
            << e.seconds << '\n';
    }
}

inline std::vector<EpochRecord> read_epoch_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    std::getline(in, line);
    std::vector<EpochRecord> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto f = split(trim(line), ',');
        EpochRecord e;
        long long epoch = 0;
        if (f.size() != 4 || !parse_int(f[0], epoch) || !parse_double(f[1], e.recon_mse) ||
            !parse_double(f[2], e.recon_mse_mean) || !parse_double(f[3], e.seconds)) {
            throw DataError(path + ":" + std::to_string(line_no) + ": malformed epoch record");
        }
        e.epoch = static_cast<int>(epoch);
        out.push_back(e);
    }
    return out;
}

}  // namespace homesynth::train
