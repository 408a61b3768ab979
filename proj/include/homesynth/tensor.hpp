// Copyright (c) 2026, homesynth contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "homesynth/error.hpp"

namespace homesynth {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

/// Dense row-major array of doubles. The last dimension is contiguous.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

    Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (shape_numel(shape_) != data_.size()) {
            throw GraphError("tensor shape " + shape_str(shape_) + " does not match " +
                             std::to_string(data_.size()) + " values");
        }
    }

    static Tensor scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }
    static Tensor vector(std::vector<double> v) {
        Shape s{v.size()};
        return Tensor(std::move(s), std::move(v));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    double item() const {
        if (data_.size() != 1) throw GraphError("item() on tensor of shape " + shape_str(shape_));
        return data_[0];
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    /// Same data viewed under a new shape with equal element count.
    Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// A trainable tensor together with its gradient slot and Adam moments.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor moment1;
    Tensor moment2;

    Param() = default;
    Param(std::string n, Tensor v)
        : name(std::move(n)),
          value(std::move(v)),
          grad(value.shape()),
          moment1(value.shape()),
          moment2(value.shape()) {}

    void zero_grad() { grad.fill(0.0); }
};

}  // namespace homesynth
