#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "subjgen/errors.hpp"
#include "subjgen/rng.hpp"

namespace subjgen::ad {

// Dense row-major tensor of doubles. Rank 0 (scalar), 1 or 2 in practice.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    // 2-D accessors
    int rows() const { return shape_.empty() ? 1 : shape_[0]; }
    int cols() const { return shape_.size() < 2 ? (shape_.empty() ? 1 : shape_[0]) : shape_[1]; }
    double& at(int r, int c) { return data_[static_cast<size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return data_[static_cast<size_t>(r) * cols() + c]; }

    double item() const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    void fill(double v);
    void zero() { fill(0.0); }

    void fill_uniform(Rng& rng, double lo, double hi);

    std::string shape_str() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

// A named, persistent leaf of the compute graph with its gradient
// accumulator. Models own their Parameters; tapes reference them.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape())) {}

    void zero_grad() { grad.zero(); }
};

}  // namespace subjgen::ad
