// Copyright (c) 2026, homesynth contributors
// SPDX-License-Identifier: Apache-2.0
//
// One small randomized graph per autodiff op kind.

#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "homesynth/autodiff.hpp"

namespace op_cases_detail {

using homesynth::Param;
using homesynth::Shape;
using homesynth::Tensor;
using homesynth::ad::Graph;

inline Tensor random_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(std::move(s));
    for (double& v : t.values()) v = u(rng);
    return t;
}

struct OpCase {
    const char* name;
    std::function<void(Graph&, std::vector<Param>&, std::mt19937_64&)> build;
};

inline std::vector<OpCase> op_cases() {
    auto mk = [](std::vector<Param>& ps, const char* n, Tensor t) -> Param& {
        ps.emplace_back(n, std::move(t));
        return ps.back();
    };
    return {
        {"dense",
         [=](Graph& g, std::vector<Param>& ps, std::mt19937_64& r) {
             ps.reserve(3);
             Param& x = mk(ps, "x", random_tensor({3, 4}, r));
             Param& w = mk(ps, "w", random_tensor({2, 4}, r));
             Param& b = mk(ps, "b", random_tensor({2}, r));
             g.sum(g.tanh(g.dense(g.param(x), g.param(w), g.param(b))));
         }},
        {"conv1d",
         [=](Graph& g, std::vector<Param>& ps, std::mt19937_64& r) {
             ps.reserve(3);
             Param& x = mk(ps, "x", random_tensor({2, 2, 7}, r));
             Param& w = mk(ps, "w", random_tensor({3, 2, 3}, r));
             Param& b = mk(ps, "b", random_tensor({3}, r));
             const std::size_t d = 1 + r() % 3;
             g.sum(g.tanh(g.conv1d(g.param(x), g.param(w), g.param(b), d)));
         }},
        {"leaky_relu",
         [=](Graph& g, std::vector<Param>& ps, std::mt19937_64& r) {
             ps.reserve(1);
             Param& x = mk(ps, "x", random_tensor({8}, r));
             for (double& v : x.value.values())
                 if (std::abs(v) < 1e-2) v = 0.5;
             g.sum(g.mul(g.leaky_relu(g.param(x), 0.2), g.constant(random_tensor({8}, r))));
         }},
        {"sigmoid",
         [=](Graph& g, std::vector<Param>& ps, std::mt19937_64& r) {
             ps.reserve(1);
             Param& x = mk(ps, "x", random_tensor({6}, r, -4, 4));
             g.sum(g.mul(g.sigmoid(g.param(x)), g.constant(random_tensor({6}, r))));
         }},
        {"tanh",
         [=](Graph& g, std::vector<Param>& ps, std::mt19937_64& r) {
             ps.reserve(1);
             Param& x = mk(ps, "x", random_tensor({6}, r, -3, 3));
             g.sum(g.mul(g.tanh(g.param(x)), g.constant(random_tensor({6}, r))));
         }},
        {"add",
         [=](Graph& g, std::vector<Param>& ps, std::mt19937_64& r) {
             ps.reserve(2);
             Param& a = mk(ps, "a", random_tensor({5}, r));
             Param& b = mk(ps, "b", random_tensor({5}, r));
             g.sum(g.tanh(g.add(g.param(a), g.param(b))));
         }},
        {"mul",
         [=](Graph& g, std::vector<Param>& ps, std::mt19937_64& r) {
             ps.reserve(2);
             Param& a = mk(ps, "a", random_tensor({5}, r));
             Param& b = mk(ps, "b", random_tensor({5}, r));
             g.sum(g.tanh(g.mul(g.param(a), g.param(b))));
         }},
        {"affine",
         [=](Graph& g, std::vector<Param>& ps, std::mt19937_64& r) {
             ps.reserve(1);
             Param& a = mk(ps, "a", random_tensor({5}, r));
             g.sum(g.tanh(g.affine(g.param(a), 0.7, -0.3)));
         }},
        {"reshape",
         [=](Graph& g, std::vector<Param>& ps, std::mt19937_64& r) {
             ps.reserve(2);
             Param& a = mk(ps, "a", random_tensor({2, 6}, r));
             Param& w = mk(ps, "w", random_tensor({1, 3, 2}, r));
             g.sum(g.tanh(g.conv1d(g.reshape(g.param(a), {3, 2}), g.param(w), g.constant(Tensor({1}, 0.0)), 1)));
         }},
        {"clamp",
         [=](Graph& g, std::vector<Param>& ps, std::mt19937_64& r) {
             ps.reserve(1);
             Param& a = mk(ps, "a", random_tensor({8}, r, -2, 2));
             for (double& v : a.value.values())
                 if (std::abs(std::abs(v) - 1.0) < 1e-2) v = 0.0;
             g.sum(g.mul(g.clamp(g.param(a), -1, 1), g.constant(random_tensor({8}, r))));
         }},
        {"mse",
         [=](Graph& g, std::vector<Param>& ps, std::mt19937_64& r) {
             ps.reserve(2);
             Param& a = mk(ps, "a", random_tensor({2, 5}, r));
             Param& b = mk(ps, "b", random_tensor({2, 5}, r));
             g.mse(g.param(a), g.param(b));
         }},
        {"bce",
         [=](Graph& g, std::vector<Param>& ps, std::mt19937_64& r) {
             ps.reserve(1);
             Param& a = mk(ps, "a", random_tensor({6}, r, -5, 5));
             g.bce_with_logits(g.param(a), r() % 2 ? 1.0 : 0.0);
         }},
        {"sum",
         [=](Graph& g, std::vector<Param>& ps, std::mt19937_64& r) {
             ps.reserve(1);
             Param& a = mk(ps, "a", random_tensor({7}, r));
             g.sum(g.param(a));
         }},
        {"mean",
         [=](Graph& g, std::vector<Param>& ps, std::mt19937_64& r) {
             ps.reserve(1);
             Param& a = mk(ps, "a", random_tensor({7}, r));
             g.mean(g.param(a));
         }},
        {"reparameterize",
         [=](Graph& g, std::vector<Param>& ps, std::mt19937_64& r) {
             ps.reserve(2);
             Param& mu = mk(ps, "mu", random_tensor({3, 4}, r));
             Param& lv = mk(ps, "lv", random_tensor({3, 4}, r));
             g.sum(g.tanh(g.reparameterize(g.param(mu), g.param(lv), g.constant(random_tensor({3, 4}, r)))));
         }},
        {"gaussian_kl",
         [=](Graph& g, std::vector<Param>& ps, std::mt19937_64& r) {
             ps.reserve(2);
             Param& mu = mk(ps, "mu", random_tensor({3, 4}, r));
             Param& lv = mk(ps, "lv", random_tensor({3, 4}, r));
             g.gaussian_kl(g.param(mu), g.param(lv));
         }},
    };
}

}  // namespace op_cases_detail

using op_cases_detail::op_cases;
using op_cases_detail::OpCase;
