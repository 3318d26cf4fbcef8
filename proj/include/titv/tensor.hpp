// SPDX-License-Identifier: Apache-2.0
//
// Dense float64 tensor of rank 0, 1 or 2 with row-major storage.

#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "titv/errors.hpp"

namespace titv {

struct Shape {
    int rank = 0;
    std::size_t rows = 1; // length for rank 1
    std::size_t cols = 1;

    static Shape scalar() { return {0, 1, 1}; }
    static Shape vector(std::size_t n) { return {1, n, 1}; }
    static Shape matrix(std::size_t r, std::size_t c) { return {2, r, c}; }

    std::size_t size() const { return rows * cols; }

    bool operator==(const Shape&) const = default;

    std::string str() const {
        switch (rank) {
        case 0: return "()";
        case 1: return "(" + std::to_string(rows) + ")";
        default: return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
        }
    }
};

class Tensor {
public:
    Tensor() : shape_(Shape::scalar()), data_(1, 0.0) {}
    explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.size(), fill) {}

    Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
        if (data_.size() != shape_.size()) {
            throw DimensionError("tensor of shape " + shape_.str() + " needs " + std::to_string(shape_.size()) +
                                 " elements, got " + std::to_string(data_.size()));
        }
    }

    static Tensor scalar(double v) { return Tensor(Shape::scalar(), v); }
    static Tensor zeros(std::size_t n) { return Tensor(Shape::vector(n)); }
    static Tensor zeros(std::size_t r, std::size_t c) { return Tensor(Shape::matrix(r, c)); }
    static Tensor filled(std::size_t n, double v) { return Tensor(Shape::vector(n), v); }
    static Tensor vec(std::initializer_list<double> v) { return Tensor(Shape::vector(v.size()), std::vector<double>(v)); }
    static Tensor vec(std::vector<double> v) {
        auto n = v.size();
        return Tensor(Shape::vector(n), std::move(v));
    }

    static Tensor identity(std::size_t n) {
        Tensor t = zeros(n, n);
        for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
        return t;
    }

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    std::size_t rows() const { return shape_.rows; }
    std::size_t cols() const { return shape_.cols; }
    bool is_scalar() const { return shape_.rank == 0; }
    bool is_vector() const { return shape_.rank == 1; }
    bool is_matrix() const { return shape_.rank == 2; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_.cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_.cols + c]; }

    double item() const {
        if (data_.size() != 1) throw DimensionError("item() on tensor of shape " + shape_.str());
        return data_[0];
    }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    const std::vector<double>& storage() const { return data_; }

    /// Reshape in place, reusing the existing allocation where possible.
    void reset(Shape shape, double fill = 0.0) {
        shape_ = shape;
        data_.assign(shape.size(), fill);
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    }
}

} // namespace titv
