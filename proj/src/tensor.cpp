#include "subjgen/tensor.hpp"

#include <sstream>

namespace subjgen::ad {

namespace {
size_t numel(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw shape_error("tensor: negative dimension");
        n *= static_cast<size_t>(d);
    }
    return n;
}
}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)), data_(numel(shape_), 0.0) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != numel(shape_))
        throw shape_error("tensor: data length " + std::to_string(data_.size()) +
                          " does not match shape " + shape_str());
}

Tensor Tensor::scalar(double v) {
    Tensor t;
    t.shape_ = {};
    t.data_ = {v};
    return t;
}

double Tensor::item() const {
    if (data_.size() != 1) throw shape_error("tensor: item() on non-scalar " + shape_str());
    return data_[0];
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::fill(double v) {
    for (double& x : data_) x = v;
}

void Tensor::fill_uniform(Rng& rng, double lo, double hi) {
    for (double& x : data_) x = rng.uniform(lo, hi);
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << ",";
        os << shape_[i];
    }
    os << "]";
    return os.str();
}

}  // namespace subjgen::ad
