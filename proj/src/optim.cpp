#include "drdg/optim.hpp"

#include <cmath>

namespace drdg {

Adam::Adam(std::vector<NamedParam> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.push_back(Tensor::zeros(p.var.shape()));
        v_.push_back(Tensor::zeros(p.var.shape()));
    }
}

void Adam::step(const std::vector<Tensor>& grads) {
    if (grads.size() != params_.size()) throw ShapeError("Adam: gradient count mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i].var.mutable_value();
        const Tensor& g = grads[i];
        if (g.shape != p.shape) throw ShapeError("Adam: gradient shape mismatch for " + params_[i].name);
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (size_t k = 0; k < p.v.size(); ++k) {
            m.v[k] = cfg_.beta1 * m.v[k] + (1.0 - cfg_.beta1) * g.v[k];
            v.v[k] = cfg_.beta2 * v.v[k] + (1.0 - cfg_.beta2) * g.v[k] * g.v[k];
            const double mhat = m.v[k] / bc1;
            const double vhat = v.v[k] / bc2;
            p.v[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void Adam::clip_params(double c) {
    for (auto& np : params_) {
        Tensor& p = np.var.mutable_value();
        for (auto& x : p.v) x = std::clamp(x, -c, c);
    }
}

std::map<std::string, Tensor> Adam::state_tensors() const {
    std::map<std::string, Tensor> out;
    for (size_t i = 0; i < params_.size(); ++i) {
        out["m/" + params_[i].name] = m_[i];
        out["v/" + params_[i].name] = v_[i];
    }
    return out;
}

void Adam::load_state(int64_t t, const std::map<std::string, Tensor>& state) {
    t_ = t;
    for (size_t i = 0; i < params_.size(); ++i) {
        auto mi = state.find("m/" + params_[i].name);
        auto vi = state.find("v/" + params_[i].name);
        if (mi == state.end() || vi == state.end())
            throw DataError("Adam::load_state: missing state for " + params_[i].name);
        if (mi->second.shape != m_[i].shape || vi->second.shape != v_[i].shape)
            throw DataError("Adam::load_state: shape mismatch for " + params_[i].name);
        m_[i] = mi->second;
        v_[i] = vi->second;
    }
}

}  // namespace drdg
