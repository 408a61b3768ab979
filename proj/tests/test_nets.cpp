// Copyright (c) 2026, homesynth contributors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "homesynth/nets.hpp"
#include "homesynth/trainer.hpp"
#include "support.hpp"

using namespace homesynth;
using namespace homesynth::nets;

namespace {

ArchConfig tiny_arch() {
    ArchConfig a;
    a.seq_len = 16;
    a.latent = 4;
    a.channels = 3;
    a.dilations = {1, 2};
    return a;
}

Tensor uniform_batch(std::size_t b, std::size_t t, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor x({b, t});
    for (double& v : x.values()) v = u(rng);
    return x;
}

// Replaces every parameter (including the zero-initialised heads) with small
// random values so gradients flow everywhere.
void randomize(Model& m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (Network* n : {&m.encoder, &m.generator, &m.discriminator})
        for (Param& p : n->params)
            for (double& v : p.value.values()) v = u(rng);
}

double closed_form_kl(double mu, double lv) { return 0.5 * (mu * mu + std::exp(lv) - 1.0 - lv); }

}  // namespace

TEST(Arch, DefaultsAndReceptiveField) {
    const ArchConfig a;
    EXPECT_EQ(a.latent, 32u);
    EXPECT_EQ(a.channels, 32u);
    EXPECT_EQ(a.kernel, 3u);
    EXPECT_EQ(a.dilations, (std::vector<std::size_t>{1, 2, 4, 8}));
    EXPECT_EQ(a.receptive_field(), 31u);
}

TEST(Init, ParameterLayoutIsDeterministic) {
    const Model a = init_model(ModelKind::VaeGan, tiny_arch(), 5);
    const Model b = init_model(ModelKind::VaeGan, tiny_arch(), 5);
    const Model c = init_model(ModelKind::VaeGan, tiny_arch(), 6);
    ASSERT_EQ(a.generator.params.size(), b.generator.params.size());
    for (std::size_t i = 0; i < a.generator.params.size(); ++i) {
        EXPECT_EQ(a.generator.params[i].value, b.generator.params[i].value);
    }
    EXPECT_NE(a.generator.params[0].value, c.generator.params[0].value);
    EXPECT_TRUE(init_model(ModelKind::Gan, tiny_arch(), 5).encoder.params.empty());
}

TEST(Encode, FreshHeadsGiveStandardNormal) {
    std::mt19937_64 rng(1);
    const Model m = init_model(ModelKind::VaeGan, tiny_arch(), 1);
    const auto [mean, logvar] = encode(m, uniform_batch(3, 16, rng));
    EXPECT_EQ(mean.shape(), (Shape{3, 4}));
    EXPECT_EQ(logvar.shape(), (Shape{3, 4}));
    for (double v : mean.values()) EXPECT_EQ(v, 0.0);
    for (double v : logvar.values()) EXPECT_EQ(v, 0.0);
}

TEST(Encode, BatchShapeAndDeterminism) {
    std::mt19937_64 rng(2);
    Model m = init_model(ModelKind::VaeGan, tiny_arch(), 2);
    randomize(m, 3);
    Tensor x = uniform_batch(5, 16, rng);
    const auto row = x.values().subspan(0, 16);
    std::copy(row.begin(), row.end(), x.data() + 16);
    const auto [mean, logvar] = encode(m, x);
    EXPECT_EQ(mean.shape(), (Shape{5, 4}));
    for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_EQ(mean[j], mean[4 + j]);
        EXPECT_EQ(logvar[j], logvar[4 + j]);
    }
    EXPECT_EQ(encode(m, x).first, mean);
    EXPECT_THROW(encode(m, Tensor({2, 15})), GraphError);
}

TEST(Encode, LogvarIsClamped) {
    std::mt19937_64 rng(4);
    Model m = init_model(ModelKind::VaeGan, tiny_arch(), 2);
    for (auto& p : m.encoder.params)
        if (p.name == "encoder.logvar.b") p.value.fill(50.0);
    const auto [mean, logvar] = encode(m, uniform_batch(2, 16, rng));
    for (double v : logvar.values()) EXPECT_EQ(v, 10.0);
}

TEST(Generate, FreshGeneratorIsMidRange) {
    std::mt19937_64 rng(3);
    const Model m = init_model(ModelKind::VaeGan, tiny_arch(), 3);
    const Tensor y = generate(m, normal_tensor({4, 4}, rng));
    EXPECT_EQ(y.shape(), (Shape{4, 16}));
    for (double v : y.values()) EXPECT_EQ(v, 0.5);
}

TEST(Generate, OutputWithinUnitInterval) {
    std::mt19937_64 rng(3);
    Model m = init_model(ModelKind::VaeGan, tiny_arch(), 3);
    randomize(m, 8);
    for (auto& p : m.generator.params) p.value.values()[0] *= 40.0;
    const Tensor y = generate(m, normal_tensor({16, 4}, rng));
    for (double v : y.values()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(LossPrior, WorkedExamples) {
    EXPECT_EQ(loss_prior(Tensor({1, 3}, 0.0), Tensor({1, 3}, 0.0)), 0.0);
    EXPECT_NEAR(loss_prior(Tensor({1, 1}, {1.0}), Tensor({1, 1}, {0.0})), closed_form_kl(1, 0), 1e-15);
    EXPECT_NEAR(loss_prior(Tensor({1, 1}, {1.0}), Tensor({1, 1}, {0.0})), 0.5, 1e-12);
    EXPECT_NEAR(loss_prior(Tensor({1, 1}, {0.0}), Tensor({1, 1}, {std::log(4.0)})), 0.5 * (3 - std::log(4.0)), 1e-12);
    EXPECT_NEAR(loss_prior(Tensor({1, 1}, {0.0}), Tensor({1, 1}, {std::log(4.0)})), 0.8069, 1e-4);
}

TEST(LossPrior, BatchAverageOfSums) {
    std::mt19937_64 rng(5);
    const Tensor mu = normal_tensor({3, 4}, rng), lv = normal_tensor({3, 4}, rng);
    double expected = 0;
    for (std::size_t i = 0; i < mu.size(); ++i) expected += closed_form_kl(mu[i], lv[i]);
    EXPECT_NEAR(loss_prior(mu, lv), expected / 3.0, 1e-12);
    EXPECT_GE(loss_prior(mu, lv), 0.0);
}

TEST(LossReconstruction, WorkedExamples) {
    const Tensor x({1, 96}, 0.0);
    EXPECT_EQ(loss_reconstruction(x, x, 0.0), 0.0);
    EXPECT_NEAR(loss_reconstruction(x, Tensor({1, 96}, 0.1), 0.0), 96 * 0.01, 1e-12);
    EXPECT_NEAR(loss_reconstruction(x, Tensor({1, 96}, 0.1), 0.25) - 0.25, 0.96, 1e-12);
    EXPECT_THROW(loss_reconstruction(x, Tensor({1, 95}), 0.0), GraphError);
}

TEST(GanLosses, WorkedExamples) {
    const auto half = std::vector<double>{0.5, 0.5};
    const auto b = gan_losses(half, half, half);
    EXPECT_NEAR(b.l_dG, std::log(2.0), 1e-15);
    EXPECT_NEAR(b.l_D, 3 * std::log(2.0), 1e-15);
    EXPECT_LT(gan_losses({1 - 1e-12}, half, half).l_real, 1e-11);
    EXPECT_LE(b.identity_error(), 1e-12);
}

TEST(VanillaGanLosses, WorkedExamples) {
    const auto l = vanilla_gan_losses({0.5}, {0.5});
    EXPECT_NEAR(l.d_loss, 2 * std::log(2.0), 1e-15);
    EXPECT_LT(vanilla_gan_losses({1 - 1e-12}, {1e-12}).d_loss, 1e-11);
    EXPECT_LT(vanilla_gan_losses({0.5}, {1 - 1e-12}).g_loss, 1e-11);
}

TEST(DiscriminateNoise, SeededShapeAndFreshHead) {
    Model m = init_model(ModelKind::VaeGan, tiny_arch(), 7);
    std::mt19937_64 r1(9);
    const auto fresh = discriminate_noise(m, 6, r1);
    ASSERT_EQ(fresh.size(), 6u);
    for (double p : fresh) EXPECT_EQ(p, 0.5);
    randomize(m, 10);
    std::mt19937_64 r3(11), r4(11);
    const auto a = discriminate_noise(m, 6, r3), b = discriminate_noise(m, 6, r4);
    EXPECT_EQ(a, b);
    for (double p : a) {
        EXPECT_GT(p, 0.0);
        EXPECT_LT(p, 1.0);
    }
}

TEST(GeneratorLossGraph, IdentityAndNonNegativity) {
    std::mt19937_64 rng(12);
    Model m = init_model(ModelKind::VaeGan, tiny_arch(), 12);
    randomize(m, 13);
    GeneratorLossGraph gg;
    build_vaegan_generator_loss(gg, m);
    gg.graph.forward({{"x", uniform_batch(3, 16, rng)}, {"eps", normal_tensor({3, 4}, rng)}});
    auto v = [&](NodeRef r) { return gg.graph.value(r).item(); };
    EXPECT_LE(std::abs(v(gg.l_generator) - (v(gg.l_reconstruction) + v(gg.l_dG))), 1e-12);
    EXPECT_LE(std::abs(v(gg.l_reconstruction) - (v(gg.l_prior) + v(gg.l_sq))), 1e-12);
    for (NodeRef r : {gg.l_prior, gg.l_sq, gg.l_reconstruction, gg.l_dG, gg.l_generator}) EXPECT_GE(v(r), 0.0);
}

TEST(GeneratorLossGraph, MatchesStandaloneLosses) {
    std::mt19937_64 rng(14);
    Model m = init_model(ModelKind::VaeGan, tiny_arch(), 14);
    randomize(m, 15);
    const Tensor x = uniform_batch(3, 16, rng), eps = normal_tensor({3, 4}, rng);
    GeneratorLossGraph gg;
    build_vaegan_generator_loss(gg, m);
    gg.graph.forward({{"x", x}, {"eps", eps}});
    const auto [mean, logvar] = encode(m, x);
    const double prior = loss_prior(mean, logvar);
    EXPECT_NEAR(gg.graph.value(gg.l_prior).item(), prior, 1e-12);
    const Tensor recon = gg.graph.value(gg.recon);
    EXPECT_NEAR(gg.graph.value(gg.l_reconstruction).item(), loss_reconstruction(x, recon, prior), 1e-12);
    const auto p = discriminate(m, recon);
    EXPECT_NEAR(gg.graph.value(gg.l_dG).item(), gan_losses({}, p, {}).l_dG, 1e-12);
}

TEST(GeneratorLossGraph, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(16);
    Model m = init_model(ModelKind::VaeGan, tiny_arch(), 16);
    randomize(m, 17);
    GeneratorLossGraph gg;
    build_vaegan_generator_loss(gg, m);
    gg.graph.forward({{"x", uniform_batch(2, 16, rng)}, {"eps", normal_tensor({2, 4}, rng)}});
    for (Param& p : m.generator.params) EXPECT_LT(ad::grad_check(gg.graph, p, 1e-5), 1e-4) << p.name;
    for (Param& p : m.encoder.params) EXPECT_LT(ad::grad_check(gg.graph, p, 1e-5), 1e-4) << p.name;
}

TEST(GeneratorLossGraph, PriorBranchAveragesAdversarialTerms) {
    std::mt19937_64 rng(20);
    Model m = init_model(ModelKind::VaeGan, tiny_arch(), 20);
    randomize(m, 21);
    const Tensor x = uniform_batch(2, 16, rng), eps = normal_tensor({2, 4}, rng), z = normal_tensor({2, 4}, rng);
    GeneratorLossGraph gg;
    build_vaegan_generator_loss(gg, m, true);
    gg.graph.forward({{"x", x}, {"eps", eps}, {"z", z}});
    const double on_recon = gan_losses({}, discriminate(m, gg.graph.value(gg.recon)), {}).l_dG;
    const double on_prior = gan_losses({}, discriminate(m, generate(m, z)), {}).l_dG;
    auto v = [&](NodeRef r) { return gg.graph.value(r).item(); };
    EXPECT_NEAR(v(gg.l_dG), 0.5 * (on_recon + on_prior), 1e-12);
    EXPECT_LE(std::abs(v(gg.l_generator) - (v(gg.l_reconstruction) + v(gg.l_dG))), 1e-12);
    for (Param& p : m.generator.params) EXPECT_LT(ad::grad_check(gg.graph, p, 1e-5), 1e-4) << p.name;
}

TEST(DiscriminatorLossGraph, IdentityAndGradients) {
    std::mt19937_64 rng(18);
    Model m = init_model(ModelKind::VaeGan, tiny_arch(), 18);
    randomize(m, 19);
    DiscriminatorLossGraph dg;
    build_discriminator_loss(dg, m, true);
    dg.graph.forward({{"real", uniform_batch(2, 16, rng)},
                      {"fake", uniform_batch(2, 16, rng)},
                      {"noise", normal_tensor({2, 16}, rng)}});
    auto v = [&](NodeRef r) { return dg.graph.value(r).item(); };
    EXPECT_LE(std::abs(v(dg.l_D) - (v(dg.l_real) + v(dg.l_fake) + v(dg.l_noise))), 1e-12);
    for (Param& p : m.discriminator.params) EXPECT_LT(ad::grad_check(dg.graph, p, 1e-5), 1e-4) << p.name;
}

TEST(Discriminator, LossFallsOnSeparableData) {
    // G frozen: real days are high plateaus, fakes are low plateaus.
    Model m = init_model(ModelKind::VaeGan, tiny_arch(), 20);
    const Tensor real({8, 16}, 0.8), fake({8, 16}, 0.2);
    std::mt19937_64 rng(21);
    const Tensor noise = normal_tensor({8, 16}, rng);
    DiscriminatorLossGraph dg;
    build_discriminator_loss(dg, m, true);
    double prev = INFINITY;
    for (std::size_t t = 1; t <= 50; ++t) {
        dg.graph.forward({{"real", real}, {"fake", fake}, {"noise", noise}});
        const double l = dg.graph.value(dg.l_D).item();
        if (t > 1) {
            EXPECT_LT(l, prev) << "step " << t;
        }
        prev = l;
        m.zero_grad();
        dg.graph.backward(dg.l_D);
        for (Param& p : m.discriminator.params) train::adam_step(p, 1e-3, 0.5, 0.999, 1e-8, t);
    }
}

TEST(Checkpoint, BitExactRoundTrip) {
    Model m = init_model(ModelKind::VaeGan, tiny_arch(), 22);
    randomize(m, 23);
    m.generator.params[0].moment1.values()[0] = 1.0 / 3.0;
    m.generator.params[0].moment2.values()[1] = 5e-300;
    m.norm_min = 12.345678901234567;
    m.norm_max = 4321.0987654321;
    m.series_kind = data::SeriesKind::Pv;
    Checkpoint ck{m, {{"note", "x"}}};
    const std::string text = checkpoint_text(ck);
    std::istringstream in(text);
    const Checkpoint back = read_checkpoint(in, "memory");
    EXPECT_EQ(checkpoint_text(back), text);
    EXPECT_EQ(back.model.norm_min, m.norm_min);
    EXPECT_EQ(back.model.series_kind, data::SeriesKind::Pv);
    EXPECT_EQ(back.extra.at("note"), "x");
    for (std::size_t i = 0; i < m.encoder.params.size(); ++i) {
        EXPECT_EQ(back.model.encoder.params[i].value, m.encoder.params[i].value);
    }
}

TEST(Checkpoint, SavesKindAndSeed) {
    test_support::TempDir dir;
    save_checkpoint(dir.file("a.txt"), {init_model(ModelKind::Gan, tiny_arch(), 99), {}});
    save_checkpoint(dir.file("b.txt"), {init_model(ModelKind::VaeGan, tiny_arch(), 99), {}});
    const auto a = load_checkpoint(dir.file("a.txt"));
    EXPECT_EQ(a.model.kind, ModelKind::Gan);
    EXPECT_EQ(a.model.seed, 99u);
    EXPECT_EQ(load_checkpoint(dir.file("b.txt")).model.kind, ModelKind::VaeGan);
}

TEST(Checkpoint, RejectsGarbage) {
    std::istringstream in("not a checkpoint\n");
    EXPECT_THROW(read_checkpoint(in, "memory"), DataError);
    EXPECT_THROW(load_checkpoint("/nonexistent/ck.txt"), DataError);
}
