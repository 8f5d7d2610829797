#pragma once

#include <map>

#include "drdg/networks.hpp"

namespace drdg {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.9;
    double eps = 1e-8;
};

class Adam {
  public:
    Adam() = default;
    Adam(std::vector<NamedParam> params, AdamConfig cfg);

    // grads aligned with the parameter list; updates in place
    void step(const std::vector<Tensor>& grads);
    // clamp every parameter to [-c, c] (weight-clipping Lipschitz mode)
    void clip_params(double c);

    const std::vector<NamedParam>& params() const { return params_; }
    int64_t t() const { return t_; }

    // checkpoint plumbing
    std::map<std::string, Tensor> state_tensors() const;
    void load_state(int64_t t, const std::map<std::string, Tensor>& state);

  private:
    std::vector<NamedParam> params_;
    std::vector<Tensor> m_, v_;
    AdamConfig cfg_;
    int64_t t_ = 0;
};

}  // namespace drdg
