// Copyright (c) 2026, homesynth contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "homesynth/synth.hpp"
#include "homesynth/trainer.hpp"
#include "support.hpp"

using namespace homesynth;
using nets::ModelKind;

namespace {

nets::ArchConfig small_arch() {
    nets::ArchConfig a;
    a.latent = 4;
    a.channels = 4;
    a.dilations = {1, 2};
    return a;
}

nets::Model trained(ModelKind kind, int epochs = 3) {
    train::TrainConfig c;
    c.epochs = epochs;
    c.batch_size = 8;
    c.seed = 5;
    train::Trainer t(kind, small_arch(), c);
    t.run(data::normalize(data::make_sinusoid_days(32, 2)));
    return t.model();
}

}  // namespace

TEST(Sample, SameSeedSameBatch) {
    const auto m = trained(ModelKind::VaeGan);
    const auto a = synth::sample(m, 10, 99), b = synth::sample(m, 10, 99), c = synth::sample(m, 10, 100);
    EXPECT_EQ(a.profiles.values, b.profiles.values);
    EXPECT_NE(a.profiles.values, c.profiles.values);
    EXPECT_EQ(a.model, "vaegan");
    EXPECT_EQ(a.latent_draws, 10u);
}

TEST(Sample, ChunkingDoesNotChangeRows) {
    const auto m = trained(ModelKind::Gan, 1);
    const auto big = synth::sample(m, 300, 7), small = synth::sample(m, 3, 7);
    ASSERT_EQ(big.profiles.rows, 300u);
    for (std::size_t i = 0; i < 3 * 96; ++i) EXPECT_DOUBLE_EQ(big.profiles.values[i], small.profiles.values[i]);
}

TEST(Sample, ContractErrors) {
    const auto m = trained(ModelKind::Gan, 1);
    EXPECT_THROW(synth::sample(m, 0, 1), UsageError);
    const auto fresh = nets::init_model(ModelKind::Gan, small_arch(), 1);
    EXPECT_THROW(synth::sample(fresh, 4, 1), DataError);
}

TEST(Sample, FreshGeneratorGivesMidRangeConstant) {
    auto m = nets::init_model(ModelKind::VaeGan, small_arch(), 1);
    m.norm_min = 100;
    m.norm_max = 300;
    const auto b = synth::sample(m, 5, 3);
    for (double v : b.profiles.values) EXPECT_EQ(v, 0.5);
    for (double v : b.denorm.values) EXPECT_EQ(v, 200.0);
    EXPECT_TRUE(synth::mode_collapsed(b));
}

TEST(Sample, ValuesStayInTrainingRange) {
    const auto m = trained(ModelKind::VaeGan);
    const auto b = synth::sample(m, 64, 11);
    for (double v : b.profiles.values) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    for (double v : b.denorm.values) {
        EXPECT_GE(v, m.norm_min - 1e-9);
        EXPECT_LE(v, m.norm_max + 1e-9);
    }
}

TEST(Sample, TrainedGeneratorIsNotCollapsed) {
    const auto b = synth::sample(trained(ModelKind::VaeGan), 64, 4);
    EXPECT_FALSE(synth::mode_collapsed(b));
    EXPECT_GT(synth::max_pairwise_distance(b.profiles), 1e-6);
}

TEST(MaxPairwiseDistance, Example) {
    data::DayMatrix m;
    m.rows = 3;
    m.cols = 2;
    m.values = {0, 0, 3, 4, 0, 1};
    EXPECT_DOUBLE_EQ(synth::max_pairwise_distance(m), 5.0);
    m.rows = 1;
    m.values.resize(2);
    EXPECT_EQ(synth::max_pairwise_distance(m), 0.0);
}

TEST(Export, RoundTripHeaderAndSidecar) {
    test_support::TempDir dir;
    const auto m = trained(ModelKind::VaeGan);
    auto b = synth::sample(m, 6, 1234, "abc123");
    const std::string path = dir.file("synthetic.csv");
    synth::export_batch(b, path);

    KeyValues meta;
    const auto back = data::read_day_matrix(path, &meta);
    ASSERT_EQ(back.rows, 6u);
    ASSERT_EQ(back.cols, 96u);
    for (std::size_t i = 0; i < back.values.size(); ++i)
        EXPECT_NEAR(back.values[i], b.denorm.values[i], 1e-9 * std::max(1.0, std::abs(b.denorm.values[i])));
    EXPECT_EQ(meta.at("seed"), "1234");
    EXPECT_EQ(meta.at("checkpoint_id"), "abc123");
    EXPECT_EQ(meta.at("model"), "vaegan");

    const std::string text = test_support::slurp(path);
    const std::string header = text.substr(0, text.find('\n'));
    EXPECT_EQ(header.substr(0, 8), "t00,t01,");
    EXPECT_NE(header.find(",t95"), std::string::npos);
    EXPECT_EQ(header.find("t96"), std::string::npos);
}
