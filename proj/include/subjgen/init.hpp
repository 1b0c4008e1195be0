#pragma once

#include <cmath>

#include "subjgen/rng.hpp"
#include "subjgen/tensor.hpp"

namespace subjgen::ad {

inline Tensor uniform_init(std::vector<int> shape, Rng& rng, double lo = -0.1, double hi = 0.1) {
    Tensor t(std::move(shape));
    t.fill_uniform(rng, lo, hi);
    return t;
}

// scaled uniform over (-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out)))
inline Tensor xavier_init(std::vector<int> shape, Rng& rng) {
    Tensor t(shape);
    double fan_in = shape.size() == 2 ? shape[1] : shape[0];
    double fan_out = shape.size() == 2 ? shape[0] : shape[0];
    double limit = std::sqrt(6.0 / (fan_in + fan_out));
    t.fill_uniform(rng, -limit, limit);
    return t;
}

// zeros except the forget gate slice, which starts at 1
inline Tensor lstm_bias_init(int hidden) {
    Tensor t({4 * hidden});
    for (int k = 0; k < hidden; ++k) t[static_cast<size_t>(hidden + k)] = 1.0;
    return t;
}

}  // namespace subjgen::ad
