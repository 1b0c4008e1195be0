#include "subjgen/optim.hpp"

#include <cmath>

#include "subjgen/errors.hpp"

namespace subjgen::ad {

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    if (cfg_.lr <= 0.0) throw contract_error("adam: learning rate must be positive");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (Parameter* p : params_) {
        m_.push_back(Tensor::zeros(p->value.shape()));
        v_.push_back(Tensor::zeros(p->value.shape()));
    }
}

void Adam::step() {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (size_t k = 0; k < params_.size(); ++k) {
        Parameter& p = *params_[k];
        if (!p.grad.same_shape(p.value))
            throw shape_error("adam: gradient shape " + p.grad.shape_str() +
                              " does not match parameter " + p.name);
        Tensor& m = m_[k];
        Tensor& v = v_[k];
        for (size_t i = 0; i < p.value.size(); ++i) {
            double g = p.grad[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            p.value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void Adam::zero_grad() {
    for (Parameter* p : params_) p->zero_grad();
}

double clip_global_norm(const std::vector<Parameter*>& params, double max_norm) {
    if (max_norm <= 0.0) throw contract_error("clip_global_norm: max_norm must be positive");
    double sq = 0.0;
    for (Parameter* p : params)
        for (size_t i = 0; i < p->grad.size(); ++i) sq += p->grad[i] * p->grad[i];
    double norm = std::sqrt(sq);
    if (norm > max_norm) {
        double s = max_norm / norm;
        for (Parameter* p : params)
            for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] *= s;
    }
    return norm;
}

}  // namespace subjgen::ad
