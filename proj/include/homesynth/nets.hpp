// Copyright (c) 2026, homesynth contributors
// SPDX-License-Identifier: Apache-2.0
//
// Encoder, generator and discriminator networks built from dilated causal
// convolutions, the loss terms that train them, and the checkpoint format.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "homesynth/autodiff.hpp"
#include "homesynth/datapipe.hpp"
#include "homesynth/error.hpp"
#include "homesynth/kv.hpp"
#include "homesynth/tensor.hpp"

namespace homesynth::nets {

using ad::Graph;
using ad::NodeRef;

enum class ModelKind { VaeGan, Gan };

inline std::string to_string(ModelKind k) { return k == ModelKind::VaeGan ? "vaegan" : "gan"; }

inline ModelKind parse_model_kind(const std::string& s) {
    if (s == "vaegan") return ModelKind::VaeGan;
    if (s == "gan") return ModelKind::Gan;
    throw UsageError("unknown model '" + s + "' (expected vaegan or gan)");
}

struct ArchConfig {
    std::size_t seq_len = 96;
    std::size_t latent = 32;
    std::size_t channels = 32;
    std::size_t kernel = 3;
    std::vector<std::size_t> dilations{1, 2, 4, 8};
    double leaky_slope = 0.2;

    void validate() const {
        if (seq_len < 1 || latent < 1 || channels < 1 || kernel < 1) {
            throw UsageError("architecture sizes must be positive");
        }
        if (dilations.empty()) throw UsageError("architecture needs at least one convolution layer");
        for (auto d : dilations) {
            if (d < 1) throw UsageError("dilations must be positive");
        }
        if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw UsageError("leaky_slope must lie in [0, 1)");
    }

    /// Number of past steps one output can see.
    std::size_t receptive_field() const {
        std::size_t rf = 1;
        for (auto d : dilations) rf += (kernel - 1) * d;
        return rf;
    }
};

/// Ordered parameter list of one network. The order is fixed by the
/// builders below and is what the checkpoint format stores.
struct Network {
    std::vector<Param> params;

    std::size_t count() const noexcept {
        std::size_t n = 0;
        for (const auto& p : params) n += p.value.size();
        return n;
    }
    void zero_grad() {
        for (auto& p : params) p.zero_grad();
    }
};

struct Model {
    ModelKind kind = ModelKind::VaeGan;
    ArchConfig arch;
    std::uint64_t seed = 0;
    Network encoder;  // empty for the GAN baseline
    Network generator;
    Network discriminator;
    // Scale of the training data, needed to map generated profiles to watts.
    data::SeriesKind series_kind = data::SeriesKind::Load;
    double norm_min = 0.0;
    double norm_max = 0.0;

    void zero_grad() {
        encoder.zero_grad();
        generator.zero_grad();
        discriminator.zero_grad();
    }
};

// ---------------------------------------------------------------------------
// Initialisation

namespace detail {

inline Tensor uniform(Shape shape, double bound, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : t.values()) v = dist(rng);
    return t;
}

// Kaiming-uniform bound for a leaky-ReLU layer with the given fan-in.
inline double kaiming_bound(std::size_t fan_in, double slope) {
    return std::sqrt(6.0 / ((1.0 + slope * slope) * static_cast<double>(fan_in)));
}

inline void add_conv_stack(Network& net, const std::string& prefix, const ArchConfig& a, std::size_t in_channels,
                           std::mt19937_64& rng) {
    std::size_t cin = in_channels;
    for (std::size_t i = 0; i < a.dilations.size(); ++i) {
        const std::string name = prefix + ".conv" + std::to_string(i);
        net.params.emplace_back(name + ".w",
                                uniform({a.channels, cin, a.kernel}, kaiming_bound(cin * a.kernel, a.leaky_slope), rng));
        net.params.emplace_back(name + ".b", Tensor({a.channels}));
        cin = a.channels;
    }
}

}  // namespace detail

/// Random convolution/expansion weights, zero biases and zero output heads:
/// a fresh encoder maps everything to N(0,1), a fresh generator emits 0.5
/// everywhere and a fresh discriminator says 0.5 for every input.
inline Model init_model(ModelKind kind, const ArchConfig& arch, std::uint64_t seed) {
    arch.validate();
    Model m;
    m.kind = kind;
    m.arch = arch;
    m.seed = seed;
    std::mt19937_64 rng(seed);
    const std::size_t flat = arch.channels * arch.seq_len;

    if (kind == ModelKind::VaeGan) {
        detail::add_conv_stack(m.encoder, "encoder", arch, 1, rng);
        m.encoder.params.emplace_back("encoder.mean.w", Tensor({arch.latent, flat}));
        m.encoder.params.emplace_back("encoder.mean.b", Tensor({arch.latent}));
        m.encoder.params.emplace_back("encoder.logvar.w", Tensor({arch.latent, flat}));
        m.encoder.params.emplace_back("encoder.logvar.b", Tensor({arch.latent}));
    }

    m.generator.params.emplace_back("generator.fc.w",
                                    detail::uniform({flat, arch.latent}, detail::kaiming_bound(arch.latent, arch.leaky_slope), rng));
    m.generator.params.emplace_back("generator.fc.b", Tensor({flat}));
    detail::add_conv_stack(m.generator, "generator", arch, arch.channels, rng);
    m.generator.params.emplace_back("generator.out.w", Tensor({1, arch.channels, 1}));
    m.generator.params.emplace_back("generator.out.b", Tensor({1}));

    detail::add_conv_stack(m.discriminator, "discriminator", arch, 1, rng);
    m.discriminator.params.emplace_back("discriminator.head.w", Tensor({1, flat}));
    m.discriminator.params.emplace_back("discriminator.head.b", Tensor({1}));
    return m;
}

// ---------------------------------------------------------------------------
// Graph builders. A const Network is bound as constants (inference only); a
// mutable one as trainable parameters.

template <class Net>
NodeRef bind(Graph& g, Net& net, std::size_t i) {
    if constexpr (std::is_const_v<Net>) {
        return g.constant(net.params.at(i).value);
    } else {
        return g.param(net.params.at(i));
    }
}

namespace detail {

// Runs the dilated conv stack over h ([B,C,T]) using params starting at `first`.
template <class Net>
NodeRef conv_stack(Graph& g, Net& net, const ArchConfig& a, NodeRef h, std::size_t first) {
    for (std::size_t i = 0; i < a.dilations.size(); ++i) {
        const std::size_t w = first + 2 * i;
        h = g.conv1d(h, bind(g, net, w), bind(g, net, w + 1), a.dilations[i]);
        h = g.leaky_relu(h, a.leaky_slope);
    }
    return h;
}

}  // namespace detail

struct EncoderNodes {
    NodeRef mean;
    NodeRef logvar;
};

/// x: [B,T] in [0,1] -> mean, logvar: [B,L]; logvar is clamped to [-10, 10].
template <class Net>
EncoderNodes build_encoder(Graph& g, Net& net, const ArchConfig& a, NodeRef x) {
    NodeRef h = g.reshape(x, {1, a.seq_len});
    h = detail::conv_stack(g, net, a, h, 0);
    h = g.reshape(h, {a.channels * a.seq_len});
    const std::size_t head = 2 * a.dilations.size();
    NodeRef mean = g.dense(h, bind(g, net, head), bind(g, net, head + 1));
    NodeRef logvar = g.dense(h, bind(g, net, head + 2), bind(g, net, head + 3));
    logvar = g.clamp(logvar, -10.0, 10.0);
    g.label(mean, "encoder.mean");
    g.label(logvar, "encoder.logvar");
    return {mean, logvar};
}

/// z: [B,L] -> profiles [B,T] in [0,1] (tanh output rescaled).
template <class Net>
NodeRef build_generator(Graph& g, Net& net, const ArchConfig& a, NodeRef z) {
    NodeRef h = g.dense(z, bind(g, net, 0), bind(g, net, 1));
    h = g.reshape(h, {a.channels, a.seq_len});
    h = g.leaky_relu(h, a.leaky_slope);
    h = detail::conv_stack(g, net, a, h, 2);
    const std::size_t out = 2 + 2 * a.dilations.size();
    h = g.conv1d(h, bind(g, net, out), bind(g, net, out + 1), 1);
    h = g.reshape(h, {a.seq_len});
    h = g.tanh(h);
    NodeRef y = g.affine(h, 0.5, 0.5);
    g.label(y, "generator.output");
    return y;
}

/// x: [B,T] -> logits [B,1]; probability is sigmoid(logit).
template <class Net>
NodeRef build_discriminator(Graph& g, Net& net, const ArchConfig& a, NodeRef x) {
    NodeRef h = g.reshape(x, {1, a.seq_len});
    h = detail::conv_stack(g, net, a, h, 0);
    h = g.reshape(h, {a.channels * a.seq_len});
    const std::size_t head = 2 * a.dilations.size();
    NodeRef logit = g.dense(h, bind(g, net, head), bind(g, net, head + 1));
    g.label(logit, "discriminator.logit");
    return logit;
}

// ---------------------------------------------------------------------------
// Losses

/// Every loss scalar of one training step. The generator terms come from the
/// encoder/generator update, the discriminator terms from the discriminator
/// update. For the GAN baseline l_prior, l_reconstruction and l_noise are 0.
struct LossBundle {
    double l_prior = 0.0;
    double l_reconstruction = 0.0;
    double l_dG = 0.0;
    double l_generator = 0.0;
    double l_real = 0.0;
    double l_fake = 0.0;
    double l_noise = 0.0;
    double l_D = 0.0;

    bool all_finite() const {
        for (double v : {l_prior, l_reconstruction, l_dG, l_generator, l_real, l_fake, l_noise, l_D}) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    /// Largest violation of l_generator = l_reconstruction + l_dG and
    /// l_D = l_real + l_fake + l_noise.
    double identity_error() const {
        return std::max(std::abs(l_generator - (l_reconstruction + l_dG)),
                        std::abs(l_D - (l_real + l_fake + l_noise)));
    }
};

/// Diagonal-Gaussian KL to N(0, I), summed over latent dimensions and
/// averaged over the batch (rows of a [B,L] tensor).
inline double loss_prior(const Tensor& mean, const Tensor& logvar) {
    if (mean.shape() != logvar.shape()) throw GraphError("loss_prior: mean and logvar shapes differ");
    Graph g;
    g.gaussian_kl(g.input("mean"), g.input("logvar"));
    return g.forward({{"mean", mean}, {"logvar", logvar}}).item();
}

/// l_prior + squared L2 distance per sequence, averaged over the batch.
inline double loss_reconstruction(const Tensor& x, const Tensor& x_hat, double l_prior) {
    if (x.shape() != x_hat.shape() || x.empty()) throw GraphError("loss_reconstruction: shapes differ");
    const std::size_t seq = x.shape().back();
    double sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sq += (x_hat[i] - x[i]) * (x_hat[i] - x[i]);
    return l_prior + sq / static_cast<double>(x.size() / seq);
}

namespace detail {

inline double mean_neg_log(const std::vector<double>& probs, bool complement) {
    if (probs.empty()) return 0.0;
    double acc = 0.0;
    for (double p : probs) acc -= complement ? std::log1p(-p) : std::log(p);
    return acc / static_cast<double>(probs.size());
}

}  // namespace detail

/// Adversarial terms of the VAE-GAN objective from discriminator outputs:
/// l_real = -mean log D(x), l_fake = -mean log(1 - D(G(z))),
/// l_noise = -mean log(1 - D(n)), l_dG = -mean log D(G(z)).
/// l_generator is filled with l_dG only; add the reconstruction term to it.
inline LossBundle gan_losses(const std::vector<double>& d_real_prob, const std::vector<double>& d_fake_prob,
                             const std::vector<double>& d_noise_prob) {
    LossBundle b;
    b.l_real = detail::mean_neg_log(d_real_prob, false);
    b.l_fake = detail::mean_neg_log(d_fake_prob, true);
    b.l_noise = detail::mean_neg_log(d_noise_prob, true);
    b.l_dG = detail::mean_neg_log(d_fake_prob, false);
    b.l_generator = b.l_reconstruction + b.l_dG;
    b.l_D = b.l_real + b.l_fake + b.l_noise;
    return b;
}

struct GanLosses {
    double g_loss;
    double d_loss;
};

/// Baseline GAN: d_loss = -mean log D(x) - mean log(1 - D(G(z))),
/// g_loss = -mean log D(G(z)) (non-saturating generator objective).
inline GanLosses vanilla_gan_losses(const std::vector<double>& d_real_prob, const std::vector<double>& d_fake_prob) {
    return {detail::mean_neg_log(d_fake_prob, false),
            detail::mean_neg_log(d_real_prob, false) + detail::mean_neg_log(d_fake_prob, true)};
}

// ---------------------------------------------------------------------------
// Training graphs

/// Encoder -> reparameterize -> generator -> discriminator, with every
/// generator-side loss term as a node. Inputs: "x" [B,T], "eps" [B,L], and
/// with `with_prior` also "z" [B,L]; l_dG then averages the adversarial
/// terms of the reconstructions and of G(z).
struct GeneratorLossGraph {
    Graph graph;
    NodeRef mean, logvar, z, recon, fake_logit;
    NodeRef prior_sample, prior_logit;
    NodeRef l_prior, l_sq, l_reconstruction, l_dG, l_generator;
};

inline void build_vaegan_generator_loss(GeneratorLossGraph& out, Model& m, bool with_prior = false) {
    Graph& g = out.graph;
    const ArchConfig& a = m.arch;
    NodeRef x = g.input("x");
    auto enc = build_encoder(g, m.encoder, a, x);
    out.mean = enc.mean;
    out.logvar = enc.logvar;
    out.z = g.reparameterize(enc.mean, enc.logvar, g.input("eps"));
    out.recon = build_generator(g, m.generator, a, out.z);
    out.fake_logit = build_discriminator(g, m.discriminator, a, out.recon);
    out.l_prior = g.gaussian_kl(enc.mean, enc.logvar);
    out.l_sq = g.affine(g.mse(out.recon, x), static_cast<double>(a.seq_len), 0.0);
    out.l_reconstruction = g.add(out.l_prior, out.l_sq);
    out.l_dG = g.bce_with_logits(out.fake_logit, 1.0);
    if (with_prior) {
        out.prior_sample = build_generator(g, m.generator, a, g.input("z"));
        out.prior_logit = build_discriminator(g, m.discriminator, a, out.prior_sample);
        out.l_dG = g.affine(g.add(out.l_dG, g.bce_with_logits(out.prior_logit, 1.0)), 0.5, 0.0);
    }
    out.l_generator = g.add(out.l_reconstruction, out.l_dG);
}

/// GAN baseline generator objective. Input: "z" [B,L].
inline void build_gan_generator_loss(GeneratorLossGraph& out, Model& m) {
    Graph& g = out.graph;
    out.z = g.input("z");
    out.recon = build_generator(g, m.generator, m.arch, out.z);
    out.fake_logit = build_discriminator(g, m.discriminator, m.arch, out.recon);
    out.l_dG = g.bce_with_logits(out.fake_logit, 1.0);
    out.l_generator = g.affine(out.l_dG, 1.0, 0.0);
}

/// Discriminator objective. Inputs: "real", "fake" and (with_noise) "noise",
/// each [B,T].
struct DiscriminatorLossGraph {
    Graph graph;
    NodeRef l_real, l_fake, l_noise, l_D;
    bool with_noise = false;
};

inline void build_discriminator_loss(DiscriminatorLossGraph& out, Model& m, bool with_noise) {
    Graph& g = out.graph;
    out.with_noise = with_noise;
    out.l_real = g.bce_with_logits(build_discriminator(g, m.discriminator, m.arch, g.input("real")), 1.0);
    out.l_fake = g.bce_with_logits(build_discriminator(g, m.discriminator, m.arch, g.input("fake")), 0.0);
    out.l_D = g.add(out.l_real, out.l_fake);
    if (with_noise) {
        out.l_noise = g.bce_with_logits(build_discriminator(g, m.discriminator, m.arch, g.input("noise")), 0.0);
        out.l_D = g.add(out.l_D, out.l_noise);
    }
}

// ---------------------------------------------------------------------------
// Inference

inline std::size_t batch_rows(const Tensor& x, std::size_t width, const char* what) {
    if (x.rank() != 2 || x.dim(1) != width) {
        throw GraphError(std::string(what) + ": expected [B," + std::to_string(width) + "], got " +
                         shape_str(x.shape()));
    }
    return x.dim(0);
}

/// x: [B,T] -> (mean, logvar), each [B,L].
inline std::pair<Tensor, Tensor> encode(const Model& m, const Tensor& x) {
    if (m.kind != ModelKind::VaeGan) throw UsageError("encode: the GAN baseline has no encoder");
    batch_rows(x, m.arch.seq_len, "encode");
    Graph g;
    auto nodes = build_encoder(g, m.encoder, m.arch, g.input("x"));
    g.forward({{"x", x}});
    return {g.value(nodes.mean), g.value(nodes.logvar)};
}

/// z: [B,L] -> profiles [B,T].
inline Tensor generate(const Model& m, const Tensor& z) {
    batch_rows(z, m.arch.latent, "generate");
    Graph g;
    build_generator(g, m.generator, m.arch, g.input("z"));
    return g.forward({{"z", z}});
}

/// x: [B,T] -> probabilities of being real, [B].
inline std::vector<double> discriminate(const Model& m, const Tensor& x) {
    batch_rows(x, m.arch.seq_len, "discriminate");
    Graph g;
    build_discriminator(g, m.discriminator, m.arch, g.input("x"));
    const Tensor& logits = g.forward({{"x", x}});
    std::vector<double> probs(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) probs[i] = ad::detail::sigmoid(logits[i]);
    return probs;
}

inline Tensor normal_tensor(Shape shape, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, 1.0);
    for (double& v : t.values()) v = dist(rng);
    return t;
}

/// Discriminator probabilities for `batch` sequences of i.i.d. N(0,1) noise.
inline std::vector<double> discriminate_noise(const Model& m, std::size_t batch, std::mt19937_64& rng) {
    return discriminate(m, normal_tensor({batch, m.arch.seq_len}, rng));
}

// ---------------------------------------------------------------------------
// Checkpoints
//
//   homesynth-checkpoint 1
//   <key> = <value>            architecture, seed, data scale, extra state
//   params <count>
//   param <name> <rank> <dims...>
//   <values>                   hex floats, one line per tensor:
//   <moment1>                  value, first and second Adam moments
//   <moment2>
//
// Hex floats make the round trip bit-exact.

struct Checkpoint {
    Model model;
    KeyValues extra;  // owner-defined state, e.g. the trainer's step and RNG
};

namespace detail {

inline std::string hexfloat(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

inline void write_tensor_line(std::ostream& os, const Tensor& t) {
    for (std::size_t i = 0; i < t.size(); ++i) os << (i ? " " : "") << hexfloat(t[i]);
    os << '\n';
}

inline void read_tensor_line(std::istream& is, Tensor& t, const std::string& what) {
    std::string line;
    if (!std::getline(is, line)) throw DataError("checkpoint: truncated at " + what);
    std::istringstream ls(line);
    std::string tok;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(ls >> tok)) throw DataError("checkpoint: too few values for " + what);
        char* end = nullptr;
        t[i] = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size()) throw DataError("checkpoint: bad number '" + tok + "' in " + what);
    }
    if (ls >> tok) throw DataError("checkpoint: too many values for " + what);
}

inline std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

inline std::vector<std::size_t> parse_sizes(const std::string& s, const char* key) {
    std::vector<std::size_t> out;
    for (const auto& part : split(s, ',')) {
        long long v = 0;
        if (!parse_int(part, v) || v < 1) throw UsageError(std::string("bad value for ") + key + ": '" + s + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

}  // namespace detail

inline KeyValues arch_to_kv(const ArchConfig& a) {
    return {{"arch.seq_len", std::to_string(a.seq_len)},
            {"arch.latent", std::to_string(a.latent)},
            {"arch.channels", std::to_string(a.channels)},
            {"arch.kernel", std::to_string(a.kernel)},
            {"arch.dilations", detail::join_sizes(a.dilations)},
            {"arch.leaky_slope", format_double(a.leaky_slope)}};
}

inline void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
    const Model& m = ck.model;
    KeyValues head = ck.extra;
    for (auto& [k, v] : arch_to_kv(m.arch)) head[k] = v;
    head["model"] = to_string(m.kind);
    head["seed"] = std::to_string(m.seed);
    head["data.kind"] = data::to_string(m.series_kind);
    head["data.norm_min"] = detail::hexfloat(m.norm_min);
    head["data.norm_max"] = detail::hexfloat(m.norm_max);

    os << "homesynth-checkpoint 1\n";
    for (const auto& [k, v] : head) os << k << " = " << v << '\n';
    const Network* nets[] = {&m.encoder, &m.generator, &m.discriminator};
    std::size_t count = 0;
    for (auto* n : nets) count += n->params.size();
    os << "params " << count << '\n';
    for (auto* n : nets) {
        for (const Param& p : n->params) {
            os << "param " << p.name << ' ' << p.value.rank();
            for (auto d : p.value.shape()) os << ' ' << d;
            os << '\n';
            detail::write_tensor_line(os, p.value);
            detail::write_tensor_line(os, p.moment1);
            detail::write_tensor_line(os, p.moment2);
        }
    }
}

inline std::string checkpoint_text(const Checkpoint& ck) {
    std::ostringstream os;
    write_checkpoint(os, ck);
    return os.str();
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path);
    write_checkpoint(out, ck);
    if (!out) throw DataError("write failed: " + path);
}

inline Checkpoint read_checkpoint(std::istream& is, const std::string& source) {
    std::string line;
    if (!std::getline(is, line) || line != "homesynth-checkpoint 1") {
        throw DataError(source + ": not a homesynth checkpoint");
    }
    KeyValues head;
    std::size_t count = 0;
    while (true) {
        if (!std::getline(is, line)) throw DataError(source + ": missing parameter section");
        if (line.rfind("params ", 0) == 0) {
            long long c;
            if (!parse_int(line.substr(7), c) || c < 0) throw DataError(source + ": bad params line");
            count = static_cast<std::size_t>(c);
            break;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError(source + ": bad header line '" + line + "'");
        head[trim(std::string_view(line).substr(0, eq))] = trim(std::string_view(line).substr(eq + 1));
    }
    auto take = [&](const std::string& key) {
        auto it = head.find(key);
        if (it == head.end()) throw DataError(source + ": missing key " + key);
        std::string v = it->second;
        head.erase(it);
        return v;
    };
    auto take_size = [&](const std::string& key) {
        long long v = 0;
        if (!parse_int(take(key), v) || v < 0) throw DataError(source + ": bad " + key);
        return static_cast<std::size_t>(v);
    };
    auto take_hex = [&](const std::string& key) {
        const std::string s = take(key);
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (end != s.c_str() + s.size()) throw DataError(source + ": bad " + key);
        return v;
    };

    ArchConfig a;
    a.seq_len = take_size("arch.seq_len");
    a.latent = take_size("arch.latent");
    a.channels = take_size("arch.channels");
    a.kernel = take_size("arch.kernel");
    a.dilations = detail::parse_sizes(take("arch.dilations"), "arch.dilations");
    if (!parse_double(take("arch.leaky_slope"), a.leaky_slope)) throw DataError(source + ": bad arch.leaky_slope");
    const ModelKind kind = parse_model_kind(take("model"));
    long long seed;
    if (!parse_int(take("seed"), seed)) throw DataError(source + ": bad seed");

    Checkpoint ck;
    ck.model = init_model(kind, a, static_cast<std::uint64_t>(seed));
    ck.model.series_kind = data::parse_kind(take("data.kind"));
    ck.model.norm_min = take_hex("data.norm_min");
    ck.model.norm_max = take_hex("data.norm_max");
    ck.extra = std::move(head);

    Network* nets[] = {&ck.model.encoder, &ck.model.generator, &ck.model.discriminator};
    std::size_t expected = 0;
    for (auto* n : nets) expected += n->params.size();
    if (count != expected) {
        throw DataError(source + ": holds " + std::to_string(count) + " parameters, architecture needs " +
                        std::to_string(expected));
    }
    for (auto* n : nets) {
        for (Param& p : n->params) {
            if (!std::getline(is, line)) throw DataError(source + ": truncated before " + p.name);
            std::istringstream ls(line);
            std::string tag, name;
            std::size_t rank = 0;
            ls >> tag >> name >> rank;
            Shape shape(rank);
            for (auto& d : shape) ls >> d;
            if (tag != "param" || name != p.name || shape != p.value.shape()) {
                throw DataError(source + ": expected parameter " + p.name + " " + shape_str(p.value.shape()) +
                                ", found '" + line + "'");
            }
            detail::read_tensor_line(is, p.value, p.name);
            detail::read_tensor_line(is, p.moment1, p.name + " moment1");
            detail::read_tensor_line(is, p.moment2, p.name + " moment2");
        }
    }
    return ck;
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path);
    return read_checkpoint(in, path);
}

}  // namespace homesynth::nets
