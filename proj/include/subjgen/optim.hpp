#pragma once

#include <vector>

#include "subjgen/tensor.hpp"

namespace subjgen::ad {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard Adam with bias correction. Moments mirror the parameter shapes.
class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamConfig cfg);

    void step();       // consumes current p->grad, increments t
    void zero_grad();
    int t() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    std::vector<Parameter*> params_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    AdamConfig cfg_;
    int t_ = 0;
};

// Scales all gradients by max_norm/g when the global L2 norm g exceeds
// max_norm. Returns the pre-clip norm.
double clip_global_norm(const std::vector<Parameter*>& params, double max_norm);

}  // namespace subjgen::ad
